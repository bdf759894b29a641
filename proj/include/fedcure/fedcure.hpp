#pragma once

#include "fedcure/coalition.hpp"
#include "fedcure/config.hpp"
#include "fedcure/core.hpp"
#include "fedcure/divergence.hpp"
#include "fedcure/engine.hpp"
#include "fedcure/experiment.hpp"
#include "fedcure/latency.hpp"
#include "fedcure/learner.hpp"
#include "fedcure/metrics.hpp"
#include "fedcure/resource.hpp"
#include "fedcure/scheduler.hpp"
