/*
 * Copyright 2026 The ensdiv Authors.
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

#include <string>
#include <vector>

namespace ensdiv {

/// Entry point shared by the `ensdiv` binary and the tests. Returns 0 on
/// success, 1 on validation errors, 2 on numerical failures.
int RunCli(const std::vector<std::string>& args);

}  // namespace ensdiv
