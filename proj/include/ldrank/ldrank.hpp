#pragma once

// Umbrella header for the ldrank library: preconditioned Langevin dynamics
// near stationary points — closed-form Ornstein-Uhlenbeck expected-loss
// analytics, a seeded Euler-Maruyama simulator, Hessian rank estimation, the
// deep-linear-network testbed, and the polynomial-filter baseline.

#include "ldrank/errors.hpp"
#include "ldrank/gradient_oracle.hpp"
#include "ldrank/jacobi.hpp"
#include "ldrank/langevin.hpp"
#include "ldrank/linear_net.hpp"
#include "ldrank/matcore.hpp"
#include "ldrank/matrix.hpp"
#include "ldrank/ou_analytics.hpp"
#include "ldrank/polyfilter.hpp"
#include "ldrank/random_matrices.hpp"
#include "ldrank/rank_estimator.hpp"
#include "ldrank/rng.hpp"
#include "ldrank/spd_operator.hpp"
#include "ldrank/threads.hpp"
