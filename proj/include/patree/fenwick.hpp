// Copyright 2026 The patree Authors
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

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace patree {

// Binary indexed tree over 1-based slots holding non-negative weights, with
// inverse-prefix search. Capacity is always a power of two so the search can
// descend from the root without bounds checks.
class FenwickTree {
 public:
  explicit FenwickTree(std::int64_t capacity = 16) { reset(capacity); }

  void reset(std::int64_t capacity) {
    cap_ = 1;
    while (cap_ < capacity) cap_ <<= 1;
    tree_.assign(cap_ + 1, 0.0);
  }

  std::int64_t capacity() const { return cap_; }

  void add(std::int64_t i, double delta) {
    for (; i <= cap_; i += i & -i) tree_[i] += delta;
  }

  double prefix(std::int64_t i) const {
    double s = 0.0;
    for (; i > 0; i -= i & -i) s += tree_[i];
    return s;
  }

  double total() const { return tree_[cap_]; }

  // Smallest slot i with prefix(i) > u, for 0 <= u < total(). Round-off can
  // return cap_ + 1 when u lands on the upper edge; callers must check.
  std::int64_t find(double u) const {
    std::int64_t pos = 0;
    for (std::int64_t step = cap_; step > 0; step >>= 1) {
      const std::int64_t next = pos + step;
      if (next <= cap_ && tree_[next] <= u) {
        pos = next;
        u -= tree_[next];
      }
    }
    return pos + 1;
  }

  // Rebuilds from weights[1..], growing the capacity if needed. O(capacity).
  void rebuild(const std::vector<double>& weights) {
    const auto want = static_cast<std::int64_t>(weights.size()) - 1;
    if (want > cap_) reset(want);
    std::fill(tree_.begin(), tree_.end(), 0.0);
    for (std::int64_t i = 1; i <= want; ++i) tree_[i] = weights[i];
    for (std::int64_t i = 1; i <= cap_; ++i) {
      const std::int64_t parent = i + (i & -i);
      if (parent <= cap_) tree_[parent] += tree_[i];
    }
  }

 private:
  std::int64_t cap_ = 1;
  std::vector<double> tree_;
};

}  // namespace patree
