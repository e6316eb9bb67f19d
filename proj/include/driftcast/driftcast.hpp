#pragma once

#include "driftcast/checkpoint.hpp"
#include "driftcast/errors.hpp"
#include "driftcast/flow.hpp"
#include "driftcast/grid.hpp"
#include "driftcast/model.hpp"
#include "driftcast/phase_space.hpp"
#include "driftcast/rng.hpp"
#include "driftcast/tensor.hpp"
#include "driftcast/train.hpp"
