// Umbrella header for the whole library.
#pragma once

#include "exoplore/domain.hpp"
#include "exoplore/exo_controller.hpp"
#include "exoplore/gait_generator.hpp"
#include "exoplore/io.hpp"
#include "exoplore/metabolics.hpp"
#include "exoplore/metrics.hpp"
#include "exoplore/muscle_coordination.hpp"
#include "exoplore/optimizer.hpp"
#include "exoplore/parallel.hpp"
#include "exoplore/rewards.hpp"
#include "exoplore/surrogate.hpp"
