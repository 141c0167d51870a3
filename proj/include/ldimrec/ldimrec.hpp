#pragma once

#include "ldimrec/amp.hpp"
#include "ldimrec/error.hpp"
#include "ldimrec/fault.hpp"
#include "ldimrec/filter.hpp"
#include "ldimrec/graph.hpp"
#include "ldimrec/ldim.hpp"
#include "ldimrec/noise.hpp"
#include "ldimrec/pc.hpp"
#include "ldimrec/poly.hpp"
#include "ldimrec/scenarios.hpp"
#include "ldimrec/spectral.hpp"
