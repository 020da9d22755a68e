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


#include "patree/tree_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <vector>

#include "json.hpp"
#include "patree/error.hpp"

namespace patree {
namespace {

constexpr const char* kHistoryMagic = "# patree-history v1";
constexpr const char* kSnapshotMagic = "# patree-snapshot v1";

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::int64_t parse_int(std::string_view text, const char* what) {
  std::int64_t value = 0;
  const auto [ptr, ec] =
      std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw IntegrityError(std::string("malformed ") + what + ": '" +
                         std::string(text) + "'");
  }
  return value;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.remove_suffix(1);
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  return s;
}

Eigen::VectorXd parse_vector(std::string_view text) {
  std::vector<double> values;
  std::stringstream ss{std::string(text)};
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item).empty()) continue;
    try {
      values.push_back(std::stod(std::string(trim(item))));
    } catch (const std::exception&) {
      throw IntegrityError("malformed parameter value '" + item + "'");
    }
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(),
                                     static_cast<Eigen::Index>(values.size()));
}

// Reads '#' header lines; leaves the stream at the first data line.
HistoryHeader parse_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kHistoryMagic) {
    throw IntegrityError("not a patree history file");
  }
  HistoryHeader header;
  bool have_n = false;
  while (in.peek() == '#') {
    std::getline(in, line);
    std::string_view body = trim(std::string_view(line).substr(1));
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) continue;
    const std::string_view key = trim(body.substr(0, eq));
    const std::string_view value = trim(body.substr(eq + 1));
    if (key == "n") {
      header.n = parse_int(value, "node count");
      have_n = true;
    } else if (key == "family") {
      header.family_config = std::string(value);
    } else if (key == "theta") {
      header.theta = parse_vector(value);
    } else if (key == "seed") {
      header.seed = static_cast<std::uint64_t>(parse_int(value, "seed"));
    }
  }
  if (!have_n || header.n < 1) throw IntegrityError("history header lacks n");
  return header;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IntegrityError("cannot open '" + path + "'");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IntegrityError("cannot write '" + path + "'");
  return out;
}

}  // namespace

void write_history(std::ostream& out, const GrowthHistory& history,
                   const HistoryHeader& header) {
  out << kHistoryMagic << '\n';
  out << "# n=" << history.n << '\n';
  if (!header.family_config.empty()) {
    out << "# family="
        << nlohmann::ordered_json::parse(header.family_config).dump() << '\n';
  }
  if (header.theta.size() > 0) {
    out << "# theta=";
    for (Eigen::Index i = 0; i < header.theta.size(); ++i) {
      out << (i ? "," : "") << format_double(header.theta[i]);
    }
    out << '\n';
  }
  out << "# seed=" << header.seed << '\n';
  std::string buffer;
  buffer.reserve(1 << 16);
  char num[16];
  for (std::int32_t d : history.degrees) {
    const auto [ptr, ec] = std::to_chars(num, num + sizeof num, d);
    buffer.append(num, ptr);
    buffer.push_back('\n');
    if (buffer.size() > (1 << 16) - 16) {
      out << buffer;
      buffer.clear();
    }
  }
  out << buffer;
}

HistoryHeader read_history_header(std::istream& in) { return parse_header(in); }

GrowthHistory read_history(std::istream& in, HistoryHeader* header) {
  HistoryHeader h = parse_header(in);
  GrowthHistory history;
  history.n = h.n;
  history.degrees.reserve(h.n - 1);
  std::string line;
  while (std::getline(in, line)) {
    const std::string_view v = trim(line);
    if (v.empty()) continue;
    history.degrees.push_back(
        static_cast<std::int32_t>(parse_int(v, "attachment degree")));
  }
  if (static_cast<std::int64_t>(history.degrees.size()) != h.n - 1) {
    throw IntegrityError("history has " +
                         std::to_string(history.degrees.size()) +
                         " attachment degrees, header says n = " +
                         std::to_string(h.n));
  }
  if (header) *header = std::move(h);
  return history;
}

void write_snapshot(std::ostream& out, const DegreeSnapshot& snapshot) {
  out << kSnapshotMagic << '\n';
  out << "# n=" << snapshot.n << '\n';
  out << "k,count\n";
  for (std::int64_t k = 1; k <= snapshot.max_degree(); ++k) {
    if (snapshot.counts[k] != 0) out << k << ',' << snapshot.counts[k] << '\n';
  }
}

DegreeSnapshot read_snapshot(std::istream& in) {
  std::string line;
  DegreeSnapshot snap;
  snap.counts.assign(1, 0);
  bool have_n = false;
  while (std::getline(in, line)) {
    std::string_view v = trim(line);
    if (v.empty()) continue;
    if (v.front() == '#') {
      v = trim(v.substr(1));
      if (v.rfind("n=", 0) == 0) {
        snap.n = parse_int(v.substr(2), "node count");
        have_n = true;
      }
      continue;
    }
    if (v == "k,count") continue;
    const auto comma = v.find(',');
    if (comma == std::string_view::npos) {
      throw IntegrityError("malformed snapshot row '" + std::string(v) + "'");
    }
    const std::int64_t k = parse_int(trim(v.substr(0, comma)), "degree");
    const std::int64_t c = parse_int(trim(v.substr(comma + 1)), "count");
    if (k < 1) throw IntegrityError("snapshot degree must be positive");
    if (k >= static_cast<std::int64_t>(snap.counts.size()))
      snap.counts.resize(k + 1, 0);
    snap.counts[k] += c;
  }
  if (!have_n) {
    snap.n = 0;
    for (std::int64_t c : snap.counts) snap.n += c;
  }
  while (snap.counts.size() > 1 && snap.counts.back() == 0) snap.counts.pop_back();
  snap.validate();
  return snap;
}

void save_history(const std::string& path, const GrowthHistory& history,
                  const HistoryHeader& header) {
  auto out = open_out(path);
  write_history(out, history, header);
}

GrowthHistory load_history(const std::string& path, HistoryHeader* header) {
  auto in = open_in(path);
  return read_history(in, header);
}

void save_snapshot(const std::string& path, const DegreeSnapshot& snapshot) {
  auto out = open_out(path);
  write_snapshot(out, snapshot);
}

DegreeSnapshot load_snapshot(const std::string& path) {
  auto in = open_in(path);
  return read_snapshot(in);
}

void MemoryHistory::for_each_block(const Visitor& visit) const {
  const auto& d = history_->degrees;
  for (std::size_t i = 0; i < d.size(); i += block_) {
    visit(std::span<const std::int32_t>(d.data() + i,
                                        std::min(block_, d.size() - i)));
  }
}

FileHistory::FileHistory(std::string path, std::size_t block)
    : path_(std::move(path)), block_(block) {
  auto in = open_in(path_);
  header_ = parse_header(in);
}

void FileHistory::for_each_block(const Visitor& visit) const {
  auto in = open_in(path_);
  parse_header(in);
  std::vector<std::int32_t> buffer;
  buffer.reserve(block_);
  std::int64_t seen = 0;
  std::string line;
  while (std::getline(in, line)) {
    const std::string_view v = trim(line);
    if (v.empty()) continue;
    buffer.push_back(static_cast<std::int32_t>(parse_int(v, "attachment degree")));
    ++seen;
    if (buffer.size() == block_) {
      visit(buffer);
      buffer.clear();
    }
  }
  if (!buffer.empty()) visit(buffer);
  if (seen != header_.n - 1) {
    throw IntegrityError("history file '" + path_ + "' is truncated");
  }
}

DegreeSnapshot snapshot_of(const HistorySource& source) {
  // N_{>k} = #{t : D_t = k}, so N_k = N_{>k-1} - N_{>k} with N_{>0} = n.
  std::vector<std::int64_t> above(2, 0);
  source.for_each_block([&](std::span<const std::int32_t> block) {
    for (std::int32_t d : block) {
      if (d < 1) throw IntegrityError("attachment degree must be positive");
      if (d >= static_cast<std::int64_t>(above.size())) above.resize(2 * d, 0);
      ++above[d];
    }
  });
  DegreeSnapshot snap;
  snap.n = source.n();
  snap.counts.assign(above.size() + 1, 0);
  std::int64_t prev = source.n();
  for (std::size_t k = 1; k < above.size(); ++k) {
    snap.counts[k] = prev - above[k];
    prev = above[k];
  }
  snap.counts[above.size()] = prev;
  while (snap.counts.size() > 1 && snap.counts.back() == 0) snap.counts.pop_back();
  snap.validate();
  return snap;
}

}  // namespace patree
