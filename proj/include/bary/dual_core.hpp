#pragma once

#include "bary/cost.hpp"
#include "bary/dual_bound.hpp"
#include "bary/lp.hpp"
#include "bary/sinkhorn.hpp"
#include "bary/transport.hpp"
