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

#include <cstdint>
#include <vector>

namespace osmosis::defense {

/// Integer Renyi orders used by the accountant.
std::vector<int> default_rdp_orders();

/// RDP of one step of the sampled Gaussian mechanism with sampling rate q and noise multiplier
/// sigma at integer order alpha >= 2.
double rdp_sampled_gaussian(double q, double sigma, int alpha);

/// Converts per-order RDP values to epsilon at the given delta (minimum over orders).
double rdp_to_epsilon(const std::vector<int>& orders, const std::vector<double>& rdp, double delta);

class RdpAccountant {
 public:
  RdpAccountant(double q, double sigma, std::vector<int> orders = default_rdp_orders());

  void step(std::int64_t n = 1) { steps_ += n; }
  std::int64_t steps() const { return steps_; }
  double epsilon(double delta) const;
  /// Epsilon after `steps` steps without changing the accountant.
  double epsilon_after(std::int64_t steps, double delta) const;

 private:
  std::vector<int> orders_;
  std::vector<double> per_step_;
  std::int64_t steps_ = 0;
};

/// Smallest noise multiplier (to bisection tolerance) that keeps `steps` steps within epsilon.
double calibrate_noise_multiplier(double epsilon, double delta, double q, std::int64_t steps);

}  // namespace osmosis::defense
