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

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "patree/fenwick.hpp"
#include "patree/pa_model.hpp"
#include "patree/rng.hpp"

namespace patree {

// Attachment degrees D_2..D_n of one tree; degrees[t - 2] = D_t.
struct GrowthHistory {
  std::int64_t n = 1;
  std::vector<std::int32_t> degrees;
};

// Final degree histogram. counts[k] = N_k(n) for k = 1..max_degree(); index 0
// is unused and the last entry is nonzero.
struct DegreeSnapshot {
  std::int64_t n = 0;
  std::vector<std::int64_t> counts;

  std::int64_t max_degree() const {
    return static_cast<std::int64_t>(counts.size()) - 1;
  }
  std::int64_t count(std::int64_t k) const {
    return k >= 1 && k <= max_degree() ? counts[k] : 0;
  }
  // tail[k] = N_{>k}(n) for k = 0..max_degree().
  std::vector<std::int64_t> tail_counts() const;
  // Checks mass and degree-sum identities; throws IntegrityError.
  void validate() const;
  bool operator==(const DegreeSnapshot&) const = default;
};

struct GrowOptions {
  bool record_history = true;
  // Keeps per-class node lists and the parent of every node.
  bool record_parents = false;
};

struct GrowthResult {
  GrowthHistory history;
  DegreeSnapshot snapshot;
  // parents[v] for v = 1..n-1 (node 0 is the root), when requested.
  std::vector<std::int64_t> parents;
};

// Degree-class sampler: holds N_k and the weights f(k) N_k in a Fenwick tree
// so that drawing the degree of the next attachment target costs
// O(log max degree).
class DegreeSampler {
 public:
  DegreeSampler(const PAFamily& family, const Eigen::VectorXd& theta);

  // One node of degree one.
  void reset();
  void load(const DegreeSnapshot& snapshot);

  // Degree class of the next attachment target; does not change the state.
  std::int64_t draw(Rng& rng);
  // A newcomer attaches to a node of degree k.
  void attach(std::int64_t k);
  std::int64_t step(Rng& rng) {
    const std::int64_t k = draw(rng);
    attach(k);
    return k;
  }

  std::int64_t nodes() const { return nodes_; }
  std::int64_t max_degree() const { return max_degree_; }
  std::int64_t count(std::int64_t k) const {
    return k < static_cast<std::int64_t>(counts_.size()) ? counts_[k] : 0;
  }
  double f(std::int64_t k) {
    if (k >= static_cast<std::int64_t>(fvals_.size())) grow_table(k);
    return fvals_[k];
  }
  DegreeSnapshot snapshot() const;

 private:
  void grow_table(std::int64_t k);
  void ensure_capacity(std::int64_t k);
  void rebuild();

  const PAFamily* family_;
  Eigen::VectorXd full_;
  std::vector<double> fvals_;
  std::vector<std::int64_t> counts_;
  FenwickTree tree_;
  std::int64_t nodes_ = 0;
  std::int64_t max_degree_ = 0;
  std::int64_t updates_since_rebuild_ = 0;
};

// Grows a tree of n nodes from a single root of degree one.
GrowthResult grow(const PAFamily& family, const Eigen::VectorXd& theta,
                  std::int64_t n, std::uint64_t seed,
                  const GrowOptions& options = {});
GrowthResult grow(const PAFamily& family, const Eigen::VectorXd& theta,
                  std::int64_t n, Rng& rng, const GrowOptions& options = {});

// S(t) for t = 1..n; result[t - 1] = S(t).
std::vector<double> total_preference_trace(const PAFamily& family,
                                           const Eigen::VectorXd& theta,
                                           const GrowthHistory& history);

// Replays the degree update rule from N_1(1) = 1. Throws IntegrityError when
// some D_t names an empty degree class.
DegreeSnapshot snapshot_of(const GrowthHistory& history);

// counts[k] = #{t : D_t = k}; equals N_{>k}(n) for a valid history.
std::vector<std::int64_t> attachment_counts(const GrowthHistory& history);

}  // namespace patree
