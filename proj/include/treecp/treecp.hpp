#pragma once

// Umbrella header: tree-structured LSTM composition functions over
// constituency trees, including the canonical-decomposition cells with
// weight sharing, plus the preprocessing, training, and verification
// machinery around them.

#include "treecp/cells.hpp"
#include "treecp/checkpoint.hpp"
#include "treecp/common.hpp"
#include "treecp/config.hpp"
#include "treecp/cp.hpp"
#include "treecp/data.hpp"
#include "treecp/gradcheck.hpp"
#include "treecp/heads.hpp"
#include "treecp/model.hpp"
#include "treecp/optim.hpp"
#include "treecp/runio.hpp"
#include "treecp/synthetic.hpp"
#include "treecp/tape.hpp"
#include "treecp/tensor.hpp"
#include "treecp/train.hpp"
#include "treecp/tree.hpp"
