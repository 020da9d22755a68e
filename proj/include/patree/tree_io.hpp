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
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "patree/pa_model.hpp"
#include "patree/tree_sim.hpp"

namespace patree {

// Metadata written into the header of a history file.
struct HistoryHeader {
  std::int64_t n = 1;
  std::string family_config;  // compact JSON, empty if unknown
  Eigen::VectorXd theta;
  std::uint64_t seed = 0;
};

void write_history(std::ostream& out, const GrowthHistory& history,
                   const HistoryHeader& header);
GrowthHistory read_history(std::istream& in, HistoryHeader* header = nullptr);
HistoryHeader read_history_header(std::istream& in);

void write_snapshot(std::ostream& out, const DegreeSnapshot& snapshot);
DegreeSnapshot read_snapshot(std::istream& in);

void save_history(const std::string& path, const GrowthHistory& history,
                  const HistoryHeader& header);
GrowthHistory load_history(const std::string& path,
                           HistoryHeader* header = nullptr);
void save_snapshot(const std::string& path, const DegreeSnapshot& snapshot);
DegreeSnapshot load_snapshot(const std::string& path);

// A history that can be traversed in order, block by block, any number of
// times. Likelihood code only sees this interface, so histories on disk are
// processed in one streaming pass with memory independent of n.
class HistorySource {
 public:
  using Visitor = std::function<void(std::span<const std::int32_t>)>;
  virtual ~HistorySource() = default;
  virtual std::int64_t n() const = 0;
  virtual void for_each_block(const Visitor& visit) const = 0;
};

class MemoryHistory final : public HistorySource {
 public:
  explicit MemoryHistory(const GrowthHistory& history,
                         std::size_t block = 4096)
      : history_(&history), block_(block) {}
  std::int64_t n() const override { return history_->n; }
  void for_each_block(const Visitor& visit) const override;

 private:
  const GrowthHistory* history_;
  std::size_t block_;
};

class FileHistory final : public HistorySource {
 public:
  explicit FileHistory(std::string path, std::size_t block = 1 << 16);
  std::int64_t n() const override { return header_.n; }
  const HistoryHeader& header() const { return header_; }
  void for_each_block(const Visitor& visit) const override;

 private:
  std::string path_;
  HistoryHeader header_;
  std::size_t block_;
};

// Snapshot reconstructed from the attachment counts of a history source.
DegreeSnapshot snapshot_of(const HistorySource& source);

}  // namespace patree
