#pragma once

// Umbrella header: dyadic grids, Haar calculus, function-space norms, the
// bilinear bi-parameter model operators, commutator expansions, randomised
// grid analysis, and the experiment harness.

#include "bihaar/exact.hpp"
#include "bihaar/grid.hpp"
#include "bihaar/grid_function.hpp"
#include "bihaar/haar.hpp"
#include "bihaar/spaces.hpp"
#include "bihaar/model_ops.hpp"
#include "bihaar/expansion.hpp"
#include "bihaar/commutator.hpp"
#include "bihaar/random_grids.hpp"
#include "bihaar/exceptional.hpp"
#include "bihaar/normlab.hpp"
#include "bihaar/suites.hpp"
