// dualsim.hpp
//
// Umbrella header for the dual-engine simulator.

#pragma once

#include "dualsim/binary_engine.hpp"
#include "dualsim/bitmap.hpp"
#include "dualsim/config.hpp"
#include "dualsim/errors.hpp"
#include "dualsim/experiments.hpp"
#include "dualsim/load_balancer.hpp"
#include "dualsim/orchestrator.hpp"
#include "dualsim/pipeline.hpp"
#include "dualsim/popcount.hpp"
#include "dualsim/sim_result.hpp"
#include "dualsim/sparse_decoder.hpp"
#include "dualsim/workload.hpp"
