// Copyright 2026 The vizrec Authors.
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

#include "vizrec/cell.hpp"
#include "vizrec/chart.hpp"
#include "vizrec/error.hpp"
#include "vizrec/features.hpp"
#include "vizrec/graph.hpp"
#include "vizrec/hints.hpp"
#include "vizrec/query.hpp"
#include "vizrec/reward.hpp"
#include "vizrec/rules.hpp"
#include "vizrec/scorer.hpp"
#include "vizrec/search.hpp"
#include "vizrec/server.hpp"
#include "vizrec/session.hpp"
#include "vizrec/table.hpp"
