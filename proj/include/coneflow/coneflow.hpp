#pragma once

#include "coneflow/errors.hpp"
#include "coneflow/params.hpp"
#include "coneflow/grid.hpp"
#include "coneflow/operators.hpp"
#include "coneflow/cone.hpp"
#include "coneflow/linalg.hpp"
#include "coneflow/resolvent.hpp"
#include "coneflow/energy.hpp"
#include "coneflow/flow.hpp"
#include "coneflow/radial.hpp"
#include "coneflow/spectral.hpp"
#include "coneflow/io.hpp"
#include "coneflow/verify.hpp"
