#pragma once

#include "logfit/errors.hpp"
#include "logfit/core_model.hpp"
#include "logfit/dynamics.hpp"
#include "logfit/integrator.hpp"
#include "logfit/baselines.hpp"
#include "logfit/rng.hpp"
#include "logfit/harness.hpp"
#include "logfit/io.hpp"
#include "logfit/checks.hpp"
