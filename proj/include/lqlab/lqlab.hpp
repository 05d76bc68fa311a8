#pragma once

#include "lqlab/divergence.hpp"
#include "lqlab/grid.hpp"
#include "lqlab/hjb.hpp"
#include "lqlab/linear_fa.hpp"
#include "lqlab/lq_model.hpp"
#include "lqlab/monotone.hpp"
#include "lqlab/qlearning.hpp"
