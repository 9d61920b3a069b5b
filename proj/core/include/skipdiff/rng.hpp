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

#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "skipdiff/vector.hpp"

namespace skipdiff {

// Philox4x32-10 block function: a pure map from (counter, key) to 128 bits.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) noexcept;

// Fills `out` with standard normals that are a pure function of
// (key, lane, domain) and the output index. Two normals per Philox block.
void fill_normals(std::uint64_t key, std::uint32_t lane, std::uint32_t domain,
                  std::span<double> out) noexcept;

// SplitMix64 finalizer; used to fold several words into one key.
std::uint64_t mix64(std::uint64_t x) noexcept;

enum class NoiseRole : std::uint32_t { Transition = 0, Draft = 1, Init = 2 };

std::string_view to_string(NoiseRole role) noexcept;

// Records every (t, role) key a stream hands out. Thread-safe.
class NoiseAudit {
 public:
  void record(int t, NoiseRole role);
  std::vector<std::pair<int, NoiseRole>> entries() const;
  void clear();

 private:
  mutable std::mutex mutex_;
  std::vector<std::pair<int, NoiseRole>> entries_;
};

// Counter-based noise source. derive(t, role, dim) depends only on
// (seed, t, role, dim), never on call order, which is what makes parallel
// execution reproducible regardless of scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const noexcept { return seed_; }

  StateVec derive(int t, NoiseRole role, std::size_t dim) const;

  // Returns a copy that logs every derive() call into `audit`.
  RngStream audited(std::shared_ptr<NoiseAudit> audit) const {
    RngStream copy(seed_);
    copy.audit_ = std::move(audit);
    return copy;
  }

 private:
  std::uint64_t seed_;
  std::shared_ptr<NoiseAudit> audit_;
};

inline StateVec derive_noise(const RngStream& stream, int t, NoiseRole role,
                             std::size_t dim) {
  return stream.derive(t, role, dim);
}

}  // namespace skipdiff
