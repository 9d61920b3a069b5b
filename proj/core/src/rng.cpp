/* Copyright 2026 The skipdiff Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "skipdiff/rng.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace skipdiff {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

// Maps 64 random bits to a double in the open interval (0, 1).
double to_open_unit(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      k[0] += kWeyl0;
      k[1] += kWeyl1;
    }
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * c[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * c[2];
    c = {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0], static_cast<std::uint32_t>(p1),
         static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1], static_cast<std::uint32_t>(p0)};
  }
  return c;
}

std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

void fill_normals(std::uint64_t key, std::uint32_t lane, std::uint32_t domain,
                  std::span<double> out) noexcept {
  const std::array<std::uint32_t, 2> k{static_cast<std::uint32_t>(key),
                                       static_cast<std::uint32_t>(key >> 32)};
  for (std::size_t j = 0; j < out.size(); j += 2) {
    const auto block = static_cast<std::uint64_t>(j / 2);
    const auto r = philox4x32({static_cast<std::uint32_t>(block), lane, domain,
                               static_cast<std::uint32_t>(block >> 32)},
                              k);
    const double u1 = to_open_unit((static_cast<std::uint64_t>(r[0]) << 32) | r[1]);
    const double u2 = to_open_unit((static_cast<std::uint64_t>(r[2]) << 32) | r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    out[j] = radius * std::cos(angle);
    if (j + 1 < out.size()) out[j + 1] = radius * std::sin(angle);
  }
}

std::string_view to_string(NoiseRole role) noexcept {
  switch (role) {
    case NoiseRole::Transition: return "transition";
    case NoiseRole::Draft: return "draft";
    case NoiseRole::Init: return "init";
  }
  return "unknown";
}

void NoiseAudit::record(int t, NoiseRole role) {
  std::lock_guard lock(mutex_);
  entries_.emplace_back(t, role);
}

std::vector<std::pair<int, NoiseRole>> NoiseAudit::entries() const {
  std::lock_guard lock(mutex_);
  return entries_;
}

void NoiseAudit::clear() {
  std::lock_guard lock(mutex_);
  entries_.clear();
}

StateVec RngStream::derive(int t, NoiseRole role, std::size_t dim) const {
  if (t < 0) fail(ErrorCode::TimestepOutOfRange, "noise key t=" + std::to_string(t));
  if (audit_) audit_->record(t, role);
  StateVec z(dim);
  fill_normals(seed_, static_cast<std::uint32_t>(t), static_cast<std::uint32_t>(role), z);
  return z;
}

}  // namespace skipdiff
