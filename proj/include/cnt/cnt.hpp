// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "cnt/config.hpp"
#include "cnt/conv_strength.hpp"
#include "cnt/dataset.hpp"
#include "cnt/ensemble.hpp"
#include "cnt/errors.hpp"
#include "cnt/metrics.hpp"
#include "cnt/numeric.hpp"
#include "cnt/oracle.hpp"
#include "cnt/parallel.hpp"
#include "cnt/record_io.hpp"
#include "cnt/report_io.hpp"
#include "cnt/rng.hpp"
#include "cnt/snapshot.hpp"
#include "cnt/snapshot_io.hpp"
#include "cnt/tensor.hpp"
#include "cnt/trainer.hpp"
#include "cnt/verify.hpp"
