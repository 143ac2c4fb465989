#pragma once

// Umbrella header: the full frame-aggregation contrastive pipeline.

#include "scfa/checkpoint.hpp"
#include "scfa/config.hpp"
#include "scfa/coverage.hpp"
#include "scfa/dataset.hpp"
#include "scfa/grid.hpp"
#include "scfa/image.hpp"
#include "scfa/loss.hpp"
#include "scfa/model.hpp"
#include "scfa/optim.hpp"
#include "scfa/rng.hpp"
#include "scfa/sampling.hpp"
#include "scfa/synth.hpp"
#include "scfa/tensor.hpp"
#include "scfa/train.hpp"
