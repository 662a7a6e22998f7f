// Copyright 2026 The CPT Toolkit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Umbrella header.
#pragma once

#include "cpt/backend.hpp"
#include "cpt/batching.hpp"
#include "cpt/colorspec.hpp"
#include "cpt/commands.hpp"
#include "cpt/cps.hpp"
#include "cpt/dataio.hpp"
#include "cpt/error.hpp"
#include "cpt/evalkit.hpp"
#include "cpt/image_io.hpp"
#include "cpt/pipeline.hpp"
#include "cpt/prompt.hpp"
#include "cpt/raster.hpp"
#include "cpt/remote.hpp"
#include "cpt/scoring.hpp"
