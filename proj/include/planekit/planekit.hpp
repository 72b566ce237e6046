#pragma once

// Umbrella header for the core library (everything except file formats).

#include "planekit/dcrf.hpp"
#include "planekit/errors.hpp"
#include "planekit/evaluation.hpp"
#include "planekit/geometry.hpp"
#include "planekit/gt_pipeline.hpp"
#include "planekit/image.hpp"
#include "planekit/layout.hpp"
#include "planekit/losses.hpp"
#include "planekit/manhattan.hpp"
#include "planekit/mrf.hpp"
#include "planekit/parallel.hpp"
#include "planekit/random.hpp"
#include "planekit/ransac.hpp"
#include "planekit/synth.hpp"
