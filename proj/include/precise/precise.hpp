#pragma once

#include "precise/calibration.hpp"
#include "precise/dataset.hpp"
#include "precise/errors.hpp"
#include "precise/estimators.hpp"
#include "precise/experiments.hpp"
#include "precise/metric.hpp"
#include "precise/stats.hpp"
