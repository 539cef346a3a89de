#pragma once

// Umbrella header for the crowd-mfg library.

#include "adjoint.hpp"
#include "config.hpp"
#include "descent.hpp"
#include "eikonal.hpp"
#include "errors.hpp"
#include "experiment.hpp"
#include "forward.hpp"
#include "grid.hpp"
#include "hughes.hpp"
#include "io.hpp"
#include "model.hpp"
#include "particles.hpp"
#include "solver_config.hpp"
#include "tridiag.hpp"
