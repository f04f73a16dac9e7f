#pragma once

// Convenience umbrella for the whole library.

#include "kyleq/backward.hpp"
#include "kyleq/equilibrium.hpp"
#include "kyleq/errors.hpp"
#include "kyleq/log.hpp"
#include "kyleq/model.hpp"
#include "kyleq/rng.hpp"
#include "kyleq/serialization.hpp"
#include "kyleq/shooting.hpp"
#include "kyleq/simulator.hpp"
