#pragma once

#include "dcilab/active.hpp"
#include "dcilab/common.hpp"
#include "dcilab/dataset.hpp"
#include "dcilab/dci.hpp"
#include "dcilab/metrics.hpp"
#include "dcilab/models.hpp"
#include "dcilab/neighbors.hpp"
#include "dcilab/parallel.hpp"
#include "dcilab/pca.hpp"
