#pragma once

#include "mrisr/adaptivity.hpp"
#include "mrisr/butcher.hpp"
#include "mrisr/errors.hpp"
#include "mrisr/harness.hpp"
#include "mrisr/integrator.hpp"
#include "mrisr/linalg.hpp"
#include "mrisr/matrix.hpp"
#include "mrisr/newton.hpp"
#include "mrisr/problem.hpp"
#include "mrisr/problems.hpp"
#include "mrisr/rational.hpp"
#include "mrisr/stability.hpp"
#include "mrisr/tableau.hpp"
#include "mrisr/tableau_io.hpp"
#include "mrisr/theory.hpp"
#include "mrisr/trees.hpp"
