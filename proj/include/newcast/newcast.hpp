#pragma once

#include "core_model.hpp"
#include "errors.hpp"
#include "parallel.hpp"
#include "planner.hpp"
#include "session_sim.hpp"
#include "traces.hpp"
