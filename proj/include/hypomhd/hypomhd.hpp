#pragma once

#include "hypomhd/bracket.hpp"
#include "hypomhd/config.hpp"
#include "hypomhd/driver.hpp"
#include "hypomhd/ergodic.hpp"
#include "hypomhd/error.hpp"
#include "hypomhd/galerkin.hpp"
#include "hypomhd/lattice.hpp"
#include "hypomhd/malliavin.hpp"
#include "hypomhd/parallel.hpp"
#include "hypomhd/reachability.hpp"
#include "hypomhd/trig_field.hpp"
#include "hypomhd/version.hpp"
