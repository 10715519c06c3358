#pragma once

#include "nssr/conv.hpp"
#include "nssr/dil_training.hpp"
#include "nssr/error.hpp"
#include "nssr/evaluation.hpp"
#include "nssr/grid.hpp"
#include "nssr/image.hpp"
#include "nssr/kernel_gallery.hpp"
#include "nssr/lcnn.hpp"
#include "nssr/metrics.hpp"
#include "nssr/random.hpp"
#include "nssr/resample.hpp"
#include "nssr/sr_pipeline.hpp"
