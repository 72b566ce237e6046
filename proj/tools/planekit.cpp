#include "planekit/cli.hpp"

int main(int argc, char** argv) { return planekit::cli::run(argc, argv); }
