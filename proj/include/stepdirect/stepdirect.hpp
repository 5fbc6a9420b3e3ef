#pragma once

#include "stepdirect/errors.hpp"
#include "stepdirect/logspace.hpp"
#include "stepdirect/rng.hpp"
#include "stepdirect/linalg.hpp"
#include "stepdirect/stats.hpp"
#include "stepdirect/search.hpp"
#include "stepdirect/target.hpp"
#include "stepdirect/step_approx.hpp"
#include "stepdirect/direct_sampler.hpp"
#include "stepdirect/cmp.hpp"
#include "stepdirect/car_gibbs.hpp"
#include "stepdirect/t_gibbs.hpp"
#include "stepdirect/csv.hpp"
#include "stepdirect/parallel.hpp"

namespace stepdirect {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace stepdirect
