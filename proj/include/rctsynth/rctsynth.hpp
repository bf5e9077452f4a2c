#pragma once

#include "rctsynth/bicop.hpp"
#include "rctsynth/config.hpp"
#include "rctsynth/dataset.hpp"
#include "rctsynth/error.hpp"
#include "rctsynth/marginals.hpp"
#include "rctsynth/metrics.hpp"
#include "rctsynth/pipeline.hpp"
#include "rctsynth/random.hpp"
#include "rctsynth/reference.hpp"
#include "rctsynth/regression.hpp"
#include "rctsynth/report.hpp"
#include "rctsynth/special.hpp"
#include "rctsynth/stats.hpp"
#include "rctsynth/vine.hpp"
