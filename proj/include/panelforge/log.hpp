// Copyright 2026 The panelforge Authors
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

#include <functional>
#include <string_view>

namespace panelforge {

using WarningSink = std::function<void(std::string_view)>;

// Warnings go to stderr unless a sink is installed. The sink is process-wide;
// install it before starting any parallel stage.
void set_warning_sink(WarningSink sink);
void warn(std::string_view message);

}  // namespace panelforge
