#pragma once

#include "fpbounds/types.hpp"
#include "fpbounds/grid.hpp"
#include "fpbounds/coeff.hpp"
#include "fpbounds/field.hpp"
#include "fpbounds/mollifier.hpp"
#include "fpbounds/oracle.hpp"
#include "fpbounds/solver.hpp"
#include "fpbounds/ladder.hpp"
#include "fpbounds/bounds.hpp"
#include "fpbounds/lyapunov.hpp"
#include "fpbounds/report.hpp"
#include "fpbounds/scenario.hpp"
