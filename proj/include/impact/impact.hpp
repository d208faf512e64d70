#pragma once

#include "impact/error.hpp"
#include "impact/units.hpp"
#include "impact/numerics.hpp"
#include "impact/strategy.hpp"
#include "impact/hawkes.hpp"
#include "impact/calibration.hpp"
#include "impact/lob.hpp"
#include "impact/simulator.hpp"
#include "impact/report.hpp"
