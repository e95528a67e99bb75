// Copyright 2026 The hbproxy Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "hbproxy/bench.hpp"
#include "hbproxy/config.hpp"
#include "hbproxy/driver.hpp"
#include "hbproxy/error.hpp"
#include "hbproxy/exchange.hpp"
#include "hbproxy/field.hpp"
#include "hbproxy/mesh.hpp"
#include "hbproxy/outio.hpp"
#include "hbproxy/reduce.hpp"
#include "hbproxy/runtime.hpp"
#include "hbproxy/solver.hpp"
#include "hbproxy/spectral.hpp"
#include "hbproxy/team.hpp"
