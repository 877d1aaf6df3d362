// Copyright 2026 The CBI Authors
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

#pragma once

#include "cbi/alignment.hpp"
#include "cbi/anfis.hpp"
#include "cbi/attention.hpp"
#include "cbi/codec.hpp"
#include "cbi/compositor.hpp"
#include "cbi/error.hpp"
#include "cbi/filter.hpp"
#include "cbi/font.hpp"
#include "cbi/hash.hpp"
#include "cbi/image.hpp"
#include "cbi/model_io.hpp"
#include "cbi/morphology.hpp"
#include "cbi/pipeline.hpp"
#include "cbi/samples.hpp"
#include "cbi/synthetic.hpp"
#include "cbi/tiling.hpp"
