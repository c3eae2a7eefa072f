#pragma once

#include "attack.hpp"
#include "convex.hpp"
#include "dataset.hpp"
#include "errors.hpp"
#include "experiment.hpp"
#include "loss01.hpp"
#include "mlp01.hpp"
#include "model_io.hpp"
#include "scd_linear.hpp"
#include "trace_io.hpp"
#include "vote.hpp"
