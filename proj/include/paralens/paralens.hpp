#pragma once

#include "paralens/error.hpp"
#include "paralens/tensor.hpp"
#include "paralens/lens.hpp"
#include "paralens/para.hpp"
#include "paralens/rng.hpp"
#include "paralens/layers.hpp"
#include "paralens/loss.hpp"
#include "paralens/optimiser.hpp"
#include "paralens/trainer.hpp"
#include "paralens/boolean.hpp"
#include "paralens/check.hpp"
#include "paralens/io.hpp"
