#pragma once

#include "kanmerge/datagen.hpp"
#include "kanmerge/dataset.hpp"
#include "kanmerge/errors.hpp"
#include "kanmerge/grid.hpp"
#include "kanmerge/metrics.hpp"
#include "kanmerge/model.hpp"
#include "kanmerge/parallel.hpp"
#include "kanmerge/plf_table.hpp"
#include "kanmerge/presets.hpp"
#include "kanmerge/pretrain.hpp"
#include "kanmerge/rng.hpp"
#include "kanmerge/serialize.hpp"
#include "kanmerge/training.hpp"
