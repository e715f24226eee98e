#pragma once

/// Umbrella header: the whole library in one include.

#include "coloring.hpp"
#include "complex.hpp"
#include "function_registry.hpp"
#include "io.hpp"
#include "jets.hpp"
#include "jiggling.hpp"
#include "keys.hpp"
#include "linearization.hpp"
#include "piecewise_map.hpp"
#include "rational.hpp"
#include "region.hpp"
#include "relations.hpp"
#include "simplex_geometry.hpp"
#include "subdivision.hpp"
#include "validate.hpp"
