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


#include "patree/tree_sim.hpp"

#include <cmath>
#include <string>

#include "patree/error.hpp"

namespace patree {
namespace {

constexpr std::int64_t kRebuildInterval = 1 << 16;

}  // namespace

std::vector<std::int64_t> DegreeSnapshot::tail_counts() const {
  const std::int64_t K = max_degree();
  std::vector<std::int64_t> tail(std::max<std::int64_t>(K, 0) + 1, 0);
  std::int64_t above = 0;
  for (std::int64_t k = K; k >= 1; --k) {
    tail[k] = above;
    above += counts[k];
  }
  tail[0] = above;
  return tail;
}

void DegreeSnapshot::validate() const {
  if (n < 1) throw IntegrityError("snapshot has no nodes");
  if (counts.size() < 2 || counts.back() == 0) {
    throw IntegrityError("snapshot counts must end with a nonzero entry");
  }
  std::int64_t mass = 0, degree_sum = 0;
  for (std::int64_t k = 1; k <= max_degree(); ++k) {
    if (counts[k] < 0) throw IntegrityError("negative degree count");
    mass += counts[k];
    degree_sum += k * counts[k];
  }
  if (mass != n) {
    throw IntegrityError("degree counts sum to " + std::to_string(mass) +
                         ", expected n = " + std::to_string(n));
  }
  if (degree_sum != 2 * n - 1) {
    throw IntegrityError("degree sum " + std::to_string(degree_sum) +
                         " differs from 2n - 1");
  }
}

DegreeSampler::DegreeSampler(const PAFamily& family,
                             const Eigen::VectorXd& theta)
    : family_(&family), full_(family.expand(theta)) {
  family.check_theta(theta);
  fvals_.assign(1, 0.0);
  grow_table(64);
  reset();
}

void DegreeSampler::grow_table(std::int64_t k) {
  std::int64_t want = std::max<std::int64_t>(k + 1, 2 * fvals_.size());
  const std::int64_t old = static_cast<std::int64_t>(fvals_.size());
  fvals_.resize(want);
  for (std::int64_t j = old; j < want; ++j) {
    const double v = family_->value_at(full_, j);
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw DomainError("non-positive preference at degree " +
                        std::to_string(j));
    }
    fvals_[j] = v;
  }
}

void DegreeSampler::reset() {
  counts_.assign(3, 0);
  counts_[1] = 1;
  nodes_ = 1;
  max_degree_ = 1;
  tree_.reset(16);
  rebuild();
}

void DegreeSampler::load(const DegreeSnapshot& snapshot) {
  snapshot.validate();
  counts_ = snapshot.counts;
  counts_.resize(snapshot.counts.size() + 1, 0);
  nodes_ = snapshot.n;
  max_degree_ = snapshot.max_degree();
  tree_.reset(max_degree_ + 1);
  rebuild();
}

void DegreeSampler::rebuild() {
  const std::int64_t size = std::max(tree_.capacity(), max_degree_ + 1);
  std::vector<double> weights(size + 1, 0.0);
  for (std::int64_t k = 1; k <= max_degree_; ++k) {
    if (counts_[k] > 0) weights[k] = f(k) * static_cast<double>(counts_[k]);
  }
  tree_.rebuild(weights);
  updates_since_rebuild_ = 0;
}

void DegreeSampler::ensure_capacity(std::int64_t k) {
  if (k >= static_cast<std::int64_t>(counts_.size())) {
    counts_.resize(std::max<std::int64_t>(k + 1, 2 * counts_.size()), 0);
  }
  if (k > tree_.capacity()) {
    tree_.reset(2 * k);
    rebuild();
  }
}

std::int64_t DegreeSampler::draw(Rng& rng) {
  for (int attempt = 0;; ++attempt) {
    const double u = rng.uniform() * tree_.total();
    const std::int64_t k = tree_.find(u);
    if (k <= max_degree_ && counts_[k] > 0) return k;
    // Round-off left weight on an empty class or pushed u past the end.
    if (attempt > 4) throw IntegrityError("degree sampler lost consistency");
    rebuild();
  }
}

void DegreeSampler::attach(std::int64_t k) {
  if (k < 1 || k > max_degree_ || counts_[k] == 0) {
    throw IntegrityError("no node of degree " + std::to_string(k));
  }
  ensure_capacity(k + 1);
  --counts_[k];
  ++counts_[k + 1];
  ++counts_[1];
  ++nodes_;
  if (k + 1 > max_degree_) max_degree_ = k + 1;
  tree_.add(k, -f(k));
  tree_.add(k + 1, f(k + 1));
  tree_.add(1, f(1));
  if (++updates_since_rebuild_ >= kRebuildInterval) rebuild();
}

DegreeSnapshot DegreeSampler::snapshot() const {
  DegreeSnapshot snap;
  snap.n = nodes_;
  snap.counts.assign(counts_.begin(), counts_.begin() + max_degree_ + 1);
  while (snap.counts.size() > 1 && snap.counts.back() == 0) snap.counts.pop_back();
  return snap;
}

GrowthResult grow(const PAFamily& family, const Eigen::VectorXd& theta,
                  std::int64_t n, std::uint64_t seed,
                  const GrowOptions& options) {
  Rng rng(seed);
  return grow(family, theta, n, rng, options);
}

GrowthResult grow(const PAFamily& family, const Eigen::VectorXd& theta,
                  std::int64_t n, Rng& rng, const GrowOptions& options) {
  if (n < 1) throw DomainError("tree size must be at least 1");
  DegreeSampler sampler(family, theta);
  GrowthResult result;
  result.history.n = n;
  if (options.record_history) result.history.degrees.reserve(n - 1);

  // Class membership lists, only needed to name the parent node.
  std::vector<std::vector<std::int64_t>> members;
  if (options.record_parents) {
    members.resize(3);
    members[1].push_back(0);
    result.parents.assign(n, -1);
  }

  for (std::int64_t t = 2; t <= n; ++t) {
    const std::int64_t k = sampler.step(rng);
    if (options.record_history) {
      result.history.degrees.push_back(static_cast<std::int32_t>(k));
    }
    if (options.record_parents) {
      if (static_cast<std::int64_t>(members.size()) <= k + 1)
        members.resize(2 * (k + 1));
      auto& from = members[k];
      const std::size_t pick = rng.below(from.size());
      const std::int64_t v = from[pick];
      from[pick] = from.back();
      from.pop_back();
      members[k + 1].push_back(v);
      const std::int64_t child = t - 1;
      members[1].push_back(child);
      result.parents[child] = v;
    }
  }
  result.snapshot = sampler.snapshot();
  return result;
}

std::vector<double> total_preference_trace(const PAFamily& family,
                                           const Eigen::VectorXd& theta,
                                           const GrowthHistory& history) {
  family.check_theta(theta);
  const Eigen::VectorXd full = family.expand(theta);
  std::vector<double> fv(1, 0.0);
  auto f = [&](std::int64_t k) {
    while (k >= static_cast<std::int64_t>(fv.size())) {
      fv.push_back(family.value_at(full, static_cast<std::int64_t>(fv.size())));
    }
    return fv[k];
  };
  std::vector<double> s;
  s.reserve(history.n);
  s.push_back(f(1));
  for (std::int32_t d : history.degrees) {
    s.push_back(s.back() + f(d + 1) - f(d) + f(1));
  }
  return s;
}

DegreeSnapshot snapshot_of(const GrowthHistory& history) {
  if (history.n < 1 ||
      static_cast<std::int64_t>(history.degrees.size()) != history.n - 1) {
    throw IntegrityError("history length does not match its node count");
  }
  std::vector<std::int64_t> counts(3, 0);
  counts[1] = 1;
  std::int64_t t = 1;
  for (std::int32_t d : history.degrees) {
    ++t;
    if (d < 1 || d >= static_cast<std::int64_t>(counts.size()) ||
        counts[d] == 0) {
      throw IntegrityError("D_" + std::to_string(t) + " = " +
                           std::to_string(d) + " names an empty degree class");
    }
    if (d + 1 >= static_cast<std::int64_t>(counts.size()))
      counts.resize(2 * (d + 2), 0);
    --counts[d];
    ++counts[d + 1];
    ++counts[1];
  }
  DegreeSnapshot snap;
  snap.n = history.n;
  snap.counts = std::move(counts);
  while (snap.counts.size() > 1 && snap.counts.back() == 0) snap.counts.pop_back();
  return snap;
}

std::vector<std::int64_t> attachment_counts(const GrowthHistory& history) {
  std::vector<std::int64_t> counts(2, 0);
  for (std::int32_t d : history.degrees) {
    if (d < 1) throw IntegrityError("attachment degree must be positive");
    if (d >= static_cast<std::int64_t>(counts.size())) counts.resize(d + 1, 0);
    ++counts[d];
  }
  return counts;
}

}  // namespace patree
