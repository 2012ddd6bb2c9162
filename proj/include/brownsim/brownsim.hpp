#pragma once

#include "brownsim/brownout.hpp"
#include "brownsim/engine.hpp"
#include "brownsim/experiment.hpp"
#include "brownsim/placement.hpp"
#include "brownsim/power.hpp"
#include "brownsim/presets.hpp"
#include "brownsim/rng.hpp"
#include "brownsim/stats.hpp"
#include "brownsim/types.hpp"
#include "brownsim/workload.hpp"
