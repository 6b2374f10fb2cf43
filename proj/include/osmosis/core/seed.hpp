/*
 * Copyright 2026 Osmosis Contributors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <random>
#include <string_view>

namespace osmosis {

/// Derives an independent stream seed from a parent seed and a tag (splitmix64 over FNV-1a).
std::uint64_t derive_seed(std::uint64_t parent, std::string_view tag);

/// CPU torch generator seeded deterministically.
torch::Generator make_generator(std::uint64_t seed);

/// Single-threaded, deterministic kernels. Called once by every entry point.
void configure_determinism();

/// Seeded permutation of [0, n).
std::vector<std::int64_t> seeded_permutation(std::int64_t n, std::uint64_t seed);

}  // namespace osmosis
