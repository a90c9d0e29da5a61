// Copyright 2026 The FARO Authors.
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

// Umbrella header.

#pragma once

#include "faro/certificates.hpp"
#include "faro/common.hpp"
#include "faro/dataset.hpp"
#include "faro/direct_alignment.hpp"
#include "faro/fairness.hpp"
#include "faro/io.hpp"
#include "faro/metrics.hpp"
#include "faro/pareto.hpp"
#include "faro/policy.hpp"
#include "faro/proxygda.hpp"
#include "faro/reward_model.hpp"
