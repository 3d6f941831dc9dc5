#pragma once

#include "deepfix/ablation.hpp"
#include "deepfix/archive.hpp"
#include "deepfix/bicubic.hpp"
#include "deepfix/conv.hpp"
#include "deepfix/dataset.hpp"
#include "deepfix/eval.hpp"
#include "deepfix/gradcheck.hpp"
#include "deepfix/image_io.hpp"
#include "deepfix/layers.hpp"
#include "deepfix/location_bank.hpp"
#include "deepfix/metrics.hpp"
#include "deepfix/network.hpp"
#include "deepfix/ops.hpp"
#include "deepfix/optimizer.hpp"
#include "deepfix/pool.hpp"
#include "deepfix/rng.hpp"
#include "deepfix/saliency.hpp"
#include "deepfix/tensor.hpp"
#include "deepfix/trainer.hpp"
