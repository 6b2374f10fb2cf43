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
#include <filesystem>

namespace osmosis {

/// Image tensors are float32 (C, H, W) or batches (N, C, H, W) with values in [0, 1].
using ImageTensor = torch::Tensor;

/// Bilinear resize with half-pixel centers (corner alignment disabled).
torch::Tensor resize_bilinear(const torch::Tensor& images, std::int64_t height, std::int64_t width);

/// Replicates single-channel images to three channels; three-channel input is returned as-is.
torch::Tensor to_three_channels(const torch::Tensor& images);

/// Throws ConfigError unless `image` is a finite (C, H, W) tensor in [0, 1].
void validate_image(const torch::Tensor& image, std::int64_t channels, std::int64_t height,
                    std::int64_t width);

/// Decodes a PNG (gray, gray+alpha, RGB or RGBA; 8 or 16 bit) into (C, H, W) in [0, 1].
/// Alpha is dropped. Throws ArtifactError on a corrupt file.
torch::Tensor read_png(const std::filesystem::path& path);

/// Encodes a (C, H, W) image with C in {1, 3, 4} as an 8-bit PNG.
void write_png(const std::filesystem::path& path, const torch::Tensor& image);

}  // namespace osmosis
