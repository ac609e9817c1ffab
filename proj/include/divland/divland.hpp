#pragma once

#include "divland/analysis.hpp"
#include "divland/evo.hpp"
#include "divland/flow_geometry.hpp"
#include "divland/io.hpp"
#include "divland/neuro.hpp"
#include "divland/nsga2.hpp"
#include "divland/parallel.hpp"
#include "divland/rng.hpp"
#include "divland/sim.hpp"
