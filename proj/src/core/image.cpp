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

#include "osmosis/core/image.hpp"

#include <png.h>

#include <cstdio>
#include <memory>
#include <vector>

#include "osmosis/core/error.hpp"

namespace osmosis {

namespace F = torch::nn::functional;

torch::Tensor resize_bilinear(const torch::Tensor& images, std::int64_t height, std::int64_t width) {
  require(images.dim() == 3 || images.dim() == 4, "resize_bilinear expects (C,H,W) or (N,C,H,W)");
  const bool single = images.dim() == 3;
  auto batch = single ? images.unsqueeze(0) : images;
  if (batch.size(2) == height && batch.size(3) == width) return images;
  auto out = F::interpolate(batch, F::InterpolateFuncOptions()
                                       .size(std::vector<std::int64_t>{height, width})
                                       .mode(torch::kBilinear)
                                       .align_corners(false));
  return single ? out.squeeze(0) : out;
}

torch::Tensor to_three_channels(const torch::Tensor& images) {
  const auto channel_dim = images.dim() - 3;
  const auto c = images.size(channel_dim);
  if (c == 3) return images;
  require(c == 1, "only 1- or 3-channel images are supported");
  std::vector<std::int64_t> reps(static_cast<std::size_t>(images.dim()), 1);
  reps[static_cast<std::size_t>(channel_dim)] = 3;
  return images.repeat(reps);
}

void validate_image(const torch::Tensor& image, std::int64_t channels, std::int64_t height,
                    std::int64_t width) {
  require(image.dim() == 3, "image must be (C,H,W)");
  require(image.size(0) == channels && image.size(1) == height && image.size(2) == width,
          "image shape mismatch");
  require(torch::isfinite(image).all().item<bool>(), "image has non-finite values");
  require(image.min().item<float>() >= 0.0F && image.max().item<float>() <= 1.0F,
          "image values outside [0,1]");
}

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_fn(png_structp png, png_const_charp msg) {
  auto* what = static_cast<std::string*>(png_get_error_ptr(png));
  if (what) *what = msg;
  png_longjmp(png, 1);
}

void png_warning_fn(png_structp, png_const_charp) {}

}  // namespace

torch::Tensor read_png(const std::filesystem::path& path) {
  FilePtr file(std::fopen(path.c_str(), "rb"));
  if (!file) throw ArtifactError("cannot open " + path.string(), path.filename().string());
  std::string error;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  std::vector<unsigned char> data;
  std::vector<png_bytep> rows;
  png_uint_32 width = 0;
  png_uint_32 height = 0;
  int channels = 0;
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw ArtifactError("corrupt PNG " + path.string() + ": " + error, path.filename().string());
  }
  png_init_io(png, file.get());
  png_read_info(png, info);
  width = png_get_image_width(png, info);
  height = png_get_image_height(png, info);
  const int color = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
  if (depth == 16) png_set_strip_16(png);
  if (color & PNG_COLOR_MASK_ALPHA || png_get_valid(png, info, PNG_INFO_tRNS)) png_set_strip_alpha(png);
  png_read_update_info(png, info);
  channels = png_get_channels(png, info);
  const auto stride = png_get_rowbytes(png, info);
  data.resize(stride * height);
  rows.resize(height);
  for (png_uint_32 y = 0; y < height; ++y) rows[y] = data.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  auto hwc = torch::from_blob(data.data(), {static_cast<std::int64_t>(height), static_cast<std::int64_t>(width), channels},
                              torch::kUInt8);
  return hwc.permute({2, 0, 1}).to(torch::kFloat32).div(255.0F).contiguous();
}

void write_png(const std::filesystem::path& path, const torch::Tensor& image) {
  require(image.dim() == 3, "write_png expects (C,H,W)");
  const auto c = image.size(0);
  require(c == 1 || c == 3 || c == 4, "write_png supports 1, 3 or 4 channels");
  auto hwc = image.detach().to(torch::kCPU, torch::kFloat32).clamp(0, 1).mul(255.0F).round()
                 .to(torch::kUInt8).permute({1, 2, 0}).contiguous();
  const auto h = static_cast<png_uint_32>(image.size(1));
  const auto w = static_cast<png_uint_32>(image.size(2));
  FilePtr file(std::fopen(path.c_str(), "wb"));
  if (!file) throw ArtifactError("cannot write " + path.string(), path.filename().string());
  std::string error;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &error, png_error_fn, png_warning_fn);
  png_infop info = png_create_info_struct(png);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw ArtifactError("PNG encode failed for " + path.string() + ": " + error, path.filename().string());
  }
  png_init_io(png, file.get());
  const int color = c == 1 ? PNG_COLOR_TYPE_GRAY : (c == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_RGBA);
  png_set_IHDR(png, info, w, h, 8, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  auto* base = hwc.data_ptr<std::uint8_t>();
  const auto stride = static_cast<std::size_t>(w) * static_cast<std::size_t>(c);
  for (png_uint_32 y = 0; y < h; ++y) png_write_row(png, base + y * stride);
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

}  // namespace osmosis
