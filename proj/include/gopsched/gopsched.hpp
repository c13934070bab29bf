#pragma once

#include "error.hpp"
#include "metrics.hpp"
#include "rng.hpp"
#include "simcore.hpp"
#include "suitability.hpp"
#include "timemodel.hpp"
#include "workload.hpp"
