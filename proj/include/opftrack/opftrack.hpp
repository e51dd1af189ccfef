#pragma once

#include "opftrack/case_model.hpp"
#include "opftrack/cd_engine.hpp"
#include "opftrack/flop_model.hpp"
#include "opftrack/lagrangian.hpp"
#include "opftrack/lifting.hpp"
#include "opftrack/poly_solver.hpp"
#include "opftrack/synthetic.hpp"
#include "opftrack/tracking.hpp"
