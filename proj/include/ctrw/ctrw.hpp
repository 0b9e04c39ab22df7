#pragma once

#include "ctrw/chain.hpp"
#include "ctrw/criteria.hpp"
#include "ctrw/error.hpp"
#include "ctrw/expression.hpp"
#include "ctrw/log_math.hpp"
#include "ctrw/rng.hpp"
#include "ctrw/series.hpp"
#include "ctrw/simulator.hpp"
#include "ctrw/solver.hpp"
#include "ctrw/tridiagonal.hpp"
#include "ctrw/waiting.hpp"
