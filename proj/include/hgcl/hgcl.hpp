/*
 * Copyright 2026 The hgcl Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Umbrella header for the library (the CLI front end lives in cli.hpp).

#pragma once

#include "hgcl/checkpoint.hpp"
#include "hgcl/config.hpp"
#include "hgcl/dataset.hpp"
#include "hgcl/edge_io.hpp"
#include "hgcl/encoder.hpp"
#include "hgcl/grad_check.hpp"
#include "hgcl/graph.hpp"
#include "hgcl/log.hpp"
#include "hgcl/meta.hpp"
#include "hgcl/metrics.hpp"
#include "hgcl/model.hpp"
#include "hgcl/objectives.hpp"
#include "hgcl/ops.hpp"
#include "hgcl/params.hpp"
#include "hgcl/sparse.hpp"
#include "hgcl/synthetic.hpp"
#include "hgcl/tape.hpp"
#include "hgcl/tensor.hpp"
#include "hgcl/trainer.hpp"
