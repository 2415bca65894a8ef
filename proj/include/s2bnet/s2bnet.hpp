#pragma once

#include "s2bnet/autograd.hpp"
#include "s2bnet/binarize.hpp"
#include "s2bnet/bitpack.hpp"
#include "s2bnet/checkpoint.hpp"
#include "s2bnet/common.hpp"
#include "s2bnet/config_json.hpp"
#include "s2bnet/data.hpp"
#include "s2bnet/efficiency.hpp"
#include "s2bnet/gabor.hpp"
#include "s2bnet/io.hpp"
#include "s2bnet/metrics.hpp"
#include "s2bnet/network.hpp"
#include "s2bnet/ops.hpp"
#include "s2bnet/optim.hpp"
#include "s2bnet/rng.hpp"
#include "s2bnet/s2bconv.hpp"
#include "s2bnet/tensor.hpp"
#include "s2bnet/trainer.hpp"
#include "s2bnet/trainer_config.hpp"
#include "s2bnet/version.hpp"
