// Copyright 2026 The DMDK Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

#include "dmdk/attention.hpp"
#include "dmdk/checkpoint.hpp"
#include "dmdk/config.hpp"
#include "dmdk/entity.hpp"
#include "dmdk/error.hpp"
#include "dmdk/features.hpp"
#include "dmdk/graph.hpp"
#include "dmdk/knowledge.hpp"
#include "dmdk/metrics.hpp"
#include "dmdk/model.hpp"
#include "dmdk/optim.hpp"
#include "dmdk/synthetic.hpp"
#include "dmdk/tensor.hpp"
#include "dmdk/text.hpp"
