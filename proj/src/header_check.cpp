// Copyright 2026 The cnforge Authors.
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

// Compiles the public headers on their own, with warnings as errors.

#include "cnforge/error.hpp"
#include "cnforge/checksum.hpp"
#include "cnforge/text.hpp"
#include "cnforge/corpus.hpp"
#include "cnforge/bm25.hpp"
#include "cnforge/query.hpp"
#include "cnforge/knowledge.hpp"
#include "cnforge/prompt.hpp"
#include "cnforge/metrics.hpp"
#include "cnforge/gateway.hpp"
#include "cnforge/pipeline.hpp"
#include "cnforge/journal.hpp"
#include "cnforge/evaluation.hpp"
#include "cnforge/service.hpp"
#include "cnforge.hpp"
