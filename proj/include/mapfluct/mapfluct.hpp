#pragma once

#include "mapfluct/errors.hpp"
#include "mapfluct/jump_law.hpp"
#include "mapfluct/model.hpp"
#include "mapfluct/model_json.hpp"
#include "mapfluct/polynomial.hpp"
#include "mapfluct/spectral.hpp"
#include "mapfluct/fluctuation.hpp"
#include "mapfluct/rng.hpp"
#include "mapfluct/simulate.hpp"
#include "mapfluct/montecarlo.hpp"
#include "mapfluct/verify.hpp"
