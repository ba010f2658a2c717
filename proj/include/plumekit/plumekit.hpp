#pragma once

// Umbrella header for the plumekit hyperspectral plume-detection toolkit.

#include "classify.hpp"  // IWYU pragma: export
#include "io.hpp"        // IWYU pragma: export
#include "mif.hpp"       // IWYU pragma: export
#include "pipeline.hpp"  // IWYU pragma: export
#include "roc.hpp"       // IWYU pragma: export
#include "synth.hpp"     // IWYU pragma: export
#include "threads.hpp"   // IWYU pragma: export
#include "types.hpp"     // IWYU pragma: export
