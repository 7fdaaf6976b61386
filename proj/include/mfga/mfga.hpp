#pragma once

#include "mfga/baselines.hpp"
#include "mfga/bench.hpp"
#include "mfga/dataset.hpp"
#include "mfga/errors.hpp"
#include "mfga/feature_maps.hpp"
#include "mfga/greedy.hpp"
#include "mfga/model_io.hpp"
#include "mfga/multi_index.hpp"
#include "mfga/objective.hpp"
#include "mfga/task.hpp"
