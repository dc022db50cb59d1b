#pragma once

// Umbrella header for the fndt1 library: simulation and analysis of
// in-solution T1 spin relaxometry on fluorescent-nanodiamond ensembles.

#include "fndt1/acquisition.hpp"
#include "fndt1/analysis.hpp"
#include "fndt1/compare.hpp"
#include "fndt1/config.hpp"
#include "fndt1/constants.hpp"
#include "fndt1/ensemble.hpp"
#include "fndt1/errors.hpp"
#include "fndt1/fit.hpp"
#include "fndt1/io.hpp"
#include "fndt1/pipeline.hpp"
#include "fndt1/planner.hpp"
#include "fndt1/presets.hpp"
#include "fndt1/relax.hpp"
#include "fndt1/rng.hpp"
#include "fndt1/schedule.hpp"
#include "fndt1/units.hpp"
#include "fndt1/version.hpp"
