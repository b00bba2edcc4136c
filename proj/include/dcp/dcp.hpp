#pragma once

#include "baselines.hpp"
#include "conformal.hpp"
#include "csv.hpp"
#include "dataset.hpp"
#include "fitters.hpp"
#include "grid.hpp"
#include "normal.hpp"
#include "prediction_set.hpp"
#include "rng.hpp"
#include "simulation.hpp"
#include "svg.hpp"
