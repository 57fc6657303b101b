// Apache License, Version 2.0, refer to LICENSE.txt

#pragma once

#include "ewens/special_functions.hpp"
#include "ewens/quadrature.hpp"
#include "ewens/med.hpp"
#include "ewens/jeffreys_prior.hpp"
#include "ewens/posterior.hpp"
#include "ewens/dpmm.hpp"
#include "ewens/harness.hpp"
