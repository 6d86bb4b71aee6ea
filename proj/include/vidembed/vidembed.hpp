#pragma once

// Umbrella header. The HTTP service lives in vidembed/service/query_service.hpp
// and is not included here so the core stays free of the socket dependency.

#include "vidembed/analysis/cluster.hpp"
#include "vidembed/analysis/metrics.hpp"
#include "vidembed/analysis/pca.hpp"
#include "vidembed/data/dataset.hpp"
#include "vidembed/data/synthetic.hpp"
#include "vidembed/heads/fuse.hpp"
#include "vidembed/heads/head_grad_check.hpp"
#include "vidembed/numeric/adam.hpp"
#include "vidembed/numeric/grad_check.hpp"
#include "vidembed/numeric/ops.hpp"
#include "vidembed/retrieval/index.hpp"
#include "vidembed/training/trainer.hpp"
