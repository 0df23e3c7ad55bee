#pragma once

#include "tvisvar/errors.hpp"
#include "tvisvar/random.hpp"
#include "tvisvar/core_model.hpp"
#include "tvisvar/priors.hpp"
#include "tvisvar/structural_sampler.hpp"
#include "tvisvar/var_sampler.hpp"
#include "tvisvar/sv_sampler.hpp"
#include "tvisvar/regime_sampler.hpp"
#include "tvisvar/gibbs.hpp"
#include "tvisvar/config_io.hpp"
#include "tvisvar/draw_store.hpp"
#include "tvisvar/chain.hpp"
#include "tvisvar/simulator.hpp"
#include "tvisvar/geweke.hpp"
#include "tvisvar/analytics.hpp"
#include "tvisvar/forecasting.hpp"
