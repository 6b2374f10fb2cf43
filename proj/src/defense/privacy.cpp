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

#include "osmosis/defense/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "osmosis/core/error.hpp"

namespace osmosis::defense {

namespace {

double log_add(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

}  // namespace

std::vector<int> default_rdp_orders() {
  std::vector<int> orders;
  for (int a = 2; a <= 64; ++a) orders.push_back(a);
  for (int a : {80, 96, 128, 192, 256, 512}) orders.push_back(a);
  return orders;
}

double rdp_sampled_gaussian(double q, double sigma, int alpha) {
  require(q >= 0.0 && q <= 1.0, "sampling rate must be in [0,1]");
  require(sigma > 0.0, "noise multiplier must be positive");
  require(alpha >= 2, "RDP order must be >= 2");
  if (q == 0.0) return 0.0;
  if (q == 1.0) return static_cast<double>(alpha) / (2.0 * sigma * sigma);
  double log_a = -std::numeric_limits<double>::infinity();
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  for (int k = 0; k <= alpha; ++k) {
    const double log_binom = std::lgamma(alpha + 1.0) - std::lgamma(k + 1.0) - std::lgamma(alpha - k + 1.0);
    const double term = log_binom + k * log_q + (alpha - k) * log_1mq +
                        (static_cast<double>(k) * k - k) / (2.0 * sigma * sigma);
    log_a = log_add(log_a, term);
  }
  return log_a / (alpha - 1.0);
}

double rdp_to_epsilon(const std::vector<int>& orders, const std::vector<double>& rdp, double delta) {
  require(orders.size() == rdp.size() && !orders.empty(), "orders and RDP values differ in length");
  require(delta > 0.0 && delta < 1.0, "delta must be in (0,1)");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < orders.size(); ++i) {
    best = std::min(best, rdp[i] + std::log(1.0 / delta) / (orders[i] - 1.0));
  }
  return best;
}

RdpAccountant::RdpAccountant(double q, double sigma, std::vector<int> orders) : orders_(std::move(orders)) {
  for (const int a : orders_) per_step_.push_back(rdp_sampled_gaussian(q, sigma, a));
}

double RdpAccountant::epsilon(double delta) const { return epsilon_after(steps_, delta); }

double RdpAccountant::epsilon_after(std::int64_t steps, double delta) const {
  std::vector<double> total;
  for (const double r : per_step_) total.push_back(r * static_cast<double>(steps));
  return rdp_to_epsilon(orders_, total, delta);
}

double calibrate_noise_multiplier(double epsilon, double delta, double q, std::int64_t steps) {
  require(epsilon > 0.0, "epsilon must be positive");
  require(steps >= 1, "calibration needs at least one step");
  const auto eps_at = [&](double sigma) { return RdpAccountant(q, sigma).epsilon_after(steps, delta); };
  double lo = 1e-2;
  double hi = 1.0;
  while (eps_at(hi) > epsilon) {
    hi *= 2.0;
    require(hi < 1e6, "cannot reach the requested epsilon");
  }
  for (int i = 0; i < 100 && hi - lo > 1e-6 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    (eps_at(mid) > epsilon ? lo : hi) = mid;
  }
  return hi;
}

}  // namespace osmosis::defense
