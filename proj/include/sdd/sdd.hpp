#pragma once

// Umbrella header.

#include "sdd/checkpoint.hpp"
#include "sdd/codec.hpp"
#include "sdd/data.hpp"
#include "sdd/denoiser.hpp"
#include "sdd/error.hpp"
#include "sdd/manifest.hpp"
#include "sdd/matio.hpp"
#include "sdd/matrix.hpp"
#include "sdd/metrics.hpp"
#include "sdd/report.hpp"
#include "sdd/rng.hpp"
#include "sdd/sampler.hpp"
#include "sdd/schedule.hpp"
#include "sdd/trainer.hpp"
