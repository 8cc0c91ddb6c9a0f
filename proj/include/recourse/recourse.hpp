#pragma once

// Umbrella header for the whole library.

#include "recourse/benchmark.hpp"
#include "recourse/counterfactual_set.hpp"
#include "recourse/csv.hpp"
#include "recourse/distance.hpp"
#include "recourse/error.hpp"
#include "recourse/external_predictor.hpp"
#include "recourse/factory.hpp"
#include "recourse/gower_index.hpp"
#include "recourse/moc.hpp"
#include "recourse/nice.hpp"
#include "recourse/objectives.hpp"
#include "recourse/pareto.hpp"
#include "recourse/predictor.hpp"
#include "recourse/results.hpp"
#include "recourse/schema.hpp"
#include "recourse/svg.hpp"
#include "recourse/synthetic.hpp"
#include "recourse/whatif.hpp"
