#pragma once

#include "rpcaf/errors.hpp"
#include "rpcaf/harness.hpp"
#include "rpcaf/io.hpp"
#include "rpcaf/matrix.hpp"
#include "rpcaf/metrics.hpp"
#include "rpcaf/model.hpp"
#include "rpcaf/projection.hpp"
#include "rpcaf/rng.hpp"
#include "rpcaf/solver.hpp"
#include "rpcaf/svd.hpp"
#include "rpcaf/synthgen.hpp"
#include "rpcaf/threshold.hpp"
