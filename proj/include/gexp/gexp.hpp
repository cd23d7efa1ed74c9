#pragma once

#include "gexp/band.hpp"
#include "gexp/cli.hpp"
#include "gexp/comparison.hpp"
#include "gexp/cylinder.hpp"
#include "gexp/error.hpp"
#include "gexp/gheat.hpp"
#include "gexp/parallel.hpp"
#include "gexp/payoff.hpp"
#include "gexp/report.hpp"
#include "gexp/scenarios.hpp"
