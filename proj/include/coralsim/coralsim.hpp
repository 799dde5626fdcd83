/// @file coralsim.hpp
/// @brief Umbrella header: the whole library in one include.

#pragma once

namespace coralsim {
inline constexpr const char* library_version = "1.0.0";
}

#include "coralsim/config.hpp"
#include "coralsim/diagnostics.hpp"
#include "coralsim/fluid.hpp"
#include "coralsim/grid.hpp"
#include "coralsim/model.hpp"
#include "coralsim/poisson.hpp"
#include "coralsim/presets.hpp"
#include "coralsim/run_io.hpp"
#include "coralsim/snapshot.hpp"
#include "coralsim/stepper.hpp"
#include "coralsim/sweep.hpp"
#include "coralsim/weakform.hpp"
