#pragma once

#include "analysis.hpp"
#include "direct_corr.hpp"
#include "dls_sim.hpp"
#include "errors.hpp"
#include "multitau.hpp"
#include "photon_events.hpp"
#include "rng.hpp"
#include "text_io.hpp"
#include "timestamp_io.hpp"

namespace mtcorr {

inline constexpr char const *version = "1.0.0";

} // namespace mtcorr
