#pragma once

// Umbrella header: tomographic registration of gravity-aligned point-cloud
// maps by slicing, per-slice rigid estimation and cross-slice consensus.

#include "tomo/bench.hpp"
#include "tomo/common.hpp"
#include "tomo/consensus.hpp"
#include "tomo/core.hpp"
#include "tomo/features.hpp"
#include "tomo/image.hpp"
#include "tomo/io.hpp"
#include "tomo/net.hpp"
#include "tomo/rigid2d.hpp"
#include "tomo/synth.hpp"
#include "tomo/tomography.hpp"
#include "tomo/wire.hpp"
