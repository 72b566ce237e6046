// Renders a seeded synthetic room, corrupts its depth, extracts plane
// hypotheses, segments the image into them and scores the result against the
// analytic ground truth.
//
//   room_demo [seed]

#include <cstdlib>
#include <iomanip>
#include <iostream>

#include "planekit/evaluation.hpp"
#include "planekit/layout.hpp"
#include "planekit/mrf.hpp"
#include "planekit/ransac.hpp"
#include "planekit/synth.hpp"

int main(int argc, char** argv) {
  using namespace planekit;
  const std::uint64_t seed = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1;

  const SceneSpec spec = random_scene(seed);
  const SceneRender truth = render_scene(spec);
  const CameraIntrinsics& k = truth.intrinsics;
  std::cout << "scene " << seed << ": " << spec.cuboids.size() << " cuboids, " << truth.planes.size()
            << " visible planes, layout " << truth.visible_roles.name() << "\n";

  const DepthMap sensor = corrupt(truth.depth, {0.01, 0.1, 0.0}, derive_seed(seed, 2));

  RansacConfig ransac;
  ransac.coverage_target = 0.98;
  ransac.rng_seed = seed;
  std::vector<Plane> hypotheses;
  for (const auto& e : extract_planes(depth_to_points(sensor, k), ransac)) hypotheses.push_back(e.plane);
  std::cout << "extracted " << hypotheses.size() << " plane hypotheses\n";

  const LabelMap labels = mrf_segment(sensor, truth.image, hypotheses, k, {});
  const DepthMap planar_depth = piecewise_depth(labels, hypotheses, k, &sensor);

  const auto matches = match_planes(truth.labels, truth.planes.planes, labels, hypotheses, k);
  const RecallCurve curve = recall_curves(matches, PlaneMasks::from_labels(truth.labels, truth.planes.planes));
  std::cout << std::fixed << std::setprecision(3) << "threshold  plane recall  pixel recall\n";
  for (std::size_t t = 0; t < curve.thresholds.size(); t += 2) {
    std::cout << std::setw(9) << curve.thresholds[t] << std::setw(14) << curve.plane_recall[t] << std::setw(14)
              << curve.pixel_recall[t] << "\n";
  }

  const DepthStats s = depth_stats(planar_depth, truth.depth);
  std::cout << "depth: rel " << s.rel << ", rmse " << s.rmse_lin << " m, delta<1.25 " << s.delta_1 << "%\n";

  const LayoutResult layout =
      estimate_layout(truth.planes.planes, truth.role_planes, ProbMaskStack::one_hot(truth.labels, truth.labels.num_planes() + 1), k);
  std::cout << "layout from ground-truth masks: " << layout.configuration.name() << ", pixel error "
            << layout_pixel_error(layout.roles, truth.roles) << "\n";
  return 0;
}
