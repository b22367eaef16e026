#pragma once

// Everything: network and contexts, demand fitting, equilibrium solver,
// reward learning, simulation, evaluation, synthetic worlds and file I/O.

#include "seirl/errors.hpp"
#include "seirl/netgraph.hpp"
#include "seirl/metrics.hpp"
#include "seirl/demand.hpp"
#include "seirl/expert.hpp"
#include "seirl/reward.hpp"
#include "seirl/equilibrium.hpp"
#include "seirl/irl.hpp"
#include "seirl/simulate.hpp"
#include "seirl/worldgen.hpp"
#include "seirl/evalkit.hpp"
#include "seirl/io.hpp"
