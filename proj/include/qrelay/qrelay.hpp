#pragma once

#include "qrelay/core_model.hpp"
#include "qrelay/errors.hpp"
#include "qrelay/optimizer.hpp"
#include "qrelay/params.hpp"
#include "qrelay/relay_sim.hpp"

/// Secret-key-rate model, Monte Carlo check and optimizer for quantum-relay QKD links.
namespace qrelay {}
