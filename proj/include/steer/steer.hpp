/*
 * Copyright 2026 The steer Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include "steer/error.hpp"
#include "steer/random.hpp"
#include "steer/core_model.hpp"
#include "steer/bias_mle.hpp"
#include "steer/diversity.hpp"
#include "steer/templates.hpp"
#include "steer/generation.hpp"
#include "steer/backends.hpp"
#include "steer/parallel.hpp"
#include "steer/cache.hpp"
#include "steer/http_backend.hpp"
#include "steer/selection.hpp"
#include "steer/inference.hpp"
#include "steer/metrics.hpp"
#include "steer/team.hpp"
#include "steer/evolution.hpp"
#include "steer/serialization.hpp"
#include "steer/run_io.hpp"
#include "steer/simulate.hpp"
