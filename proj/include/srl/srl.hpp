#pragma once

#include "srl/conditions.hpp"
#include "srl/core.hpp"
#include "srl/ensembles.hpp"
#include "srl/errors.hpp"
#include "srl/experiments.hpp"
#include "srl/lp.hpp"
#include "srl/parallel.hpp"
#include "srl/report.hpp"
#include "srl/rng.hpp"
#include "srl/solvers.hpp"
