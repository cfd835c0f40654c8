// Copyright 2026 The vasb Authors. All Rights Reserved.
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

// Umbrella header for the vasb library.

#include "vasb/bottleneck.hpp"
#include "vasb/errors.hpp"
#include "vasb/eval.hpp"
#include "vasb/experiment.hpp"
#include "vasb/io.hpp"
#include "vasb/model.hpp"
#include "vasb/ndcore/adam.hpp"
#include "vasb/ndcore/autodiff.hpp"
#include "vasb/ndcore/grad_check.hpp"
#include "vasb/ndcore/layers.hpp"
#include "vasb/ndcore/matrix.hpp"
#include "vasb/ndcore/rng.hpp"
#include "vasb/synthdata.hpp"
#include "vasb/voice.hpp"
