#pragma once

// Umbrella header for the openset library: metric-space open-set recognition,
// distance-based novelty detection, budgeted active learning over an
// embedding pool, k-means pseudo-labeling, and the matching evaluation suite.

#include "openset/active_learning.hpp"
#include "openset/config.hpp"
#include "openset/embedding.hpp"
#include "openset/error.hpp"
#include "openset/experiment.hpp"
#include "openset/io.hpp"
#include "openset/kernel.hpp"
#include "openset/kmeans.hpp"
#include "openset/metrics.hpp"
#include "openset/novelty.hpp"
#include "openset/numeric.hpp"
#include "openset/rng.hpp"
#include "openset/split.hpp"
#include "openset/synthetic.hpp"
