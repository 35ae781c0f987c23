// Copyright 2026 The PatchMix Authors.
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
#include <fstream>
#include <iterator>
#include <sstream>

#include "patchmix/error.h"
#include "patchmix/evolution.h"
#include "patchmix/training.h"

namespace patchmix {

namespace {

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::size_t parse_field(const std::string& token, const std::string& key) {
  if (token.rfind(key + "=", 0) != 0) {
    throw FormatError("expected " + key + "=<n>, got '" + token + "'");
  }
  const std::string digits = token.substr(key.size() + 1);
  if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos) {
    throw FormatError("bad value in '" + token + "'");
  }
  return std::stoul(digits);
}

// Parses one individual starting at lines[pos]; advances pos past it.
IndividualRecord parse_at(const std::vector<std::string>& lines, std::size_t& pos) {
  if (pos >= lines.size()) throw FormatError("individual checkpoint is empty");
  std::istringstream header(lines[pos++]);
  std::string tc, tp, tn, extra;
  if (!(header >> tc >> tp >> tn) || (header >> extra)) {
    throw FormatError("individual header must be 'C=<n> P=<n> N=<n>'");
  }
  IndividualRecord rec;
  rec.classes = parse_field(tc, "C");
  rec.grid_size = parse_field(tp, "P");
  rec.max_active = parse_field(tn, "N");
  if (rec.classes == 0 || rec.grid_size == 0) throw FormatError("C and P must be positive");
  const ClassPairIndex pairs(rec.classes);

  if (pos >= lines.size()) throw FormatError("individual checkpoint is missing the head line");
  const std::string& head = lines[pos++];
  if (head.size() != pairs.pair_count()) {
    throw FormatError("head has " + std::to_string(head.size()) + " flags, expected " +
                      std::to_string(pairs.pair_count()));
  }
  Individual& ind = rec.individual;
  for (char ch : head) {
    if (ch != '0' && ch != '1') throw FormatError("head contains '" + std::string(1, ch) + "'");
    ind.head.push_back(ch == '1' ? 1 : 0);
  }
  ind.masks.assign(pairs.pair_count(), PatchMask(rec.grid_size));
  for (std::size_t k : ind.active_slots()) {
    const auto [i, j] = pairs.pair_at(k);
    const std::string expect = "(" + std::to_string(i) + "," + std::to_string(j) + ")";
    if (pos >= lines.size() || lines[pos] != expect) {
      throw FormatError("expected pair line " + expect);
    }
    ++pos;
    if (pos + rec.grid_size > lines.size()) throw FormatError("mask for " + expect + " is truncated");
    std::vector<std::string> rows(lines.begin() + static_cast<std::ptrdiff_t>(pos),
                                  lines.begin() + static_cast<std::ptrdiff_t>(pos + rec.grid_size));
    ind.masks[k] = parse_mask_rows(rows);
    pos += rec.grid_size;
  }
  return rec;
}

}  // namespace

std::string serialize_individual(const Individual& ind, std::size_t classes,
                                 std::size_t grid_size, std::size_t max_active) {
  const ClassPairIndex pairs(classes);
  std::string out = "C=" + std::to_string(classes) + " P=" + std::to_string(grid_size) +
                    " N=" + std::to_string(max_active) + "\n";
  for (auto b : ind.head) out.push_back(b ? '1' : '0');
  out.push_back('\n');
  for (std::size_t k : ind.active_slots()) {
    const auto [i, j] = pairs.pair_at(k);
    out += "(" + std::to_string(i) + "," + std::to_string(j) + ")\n";
    out += serialize_mask_rows(ind.masks[k]);
    out.push_back('\n');
  }
  return out;
}

IndividualRecord parse_individual(const std::string& text) {
  const auto lines = split_lines(text);
  std::size_t pos = 0;
  IndividualRecord rec = parse_at(lines, pos);
  if (pos != lines.size()) throw FormatError("trailing lines after individual");
  return rec;
}

std::string serialize_population(std::span<const Individual> population, std::size_t classes,
                                 std::size_t grid_size, std::size_t max_active) {
  std::string out = "count=" + std::to_string(population.size()) + "\n";
  for (const Individual& ind : population) {
    out += serialize_individual(ind, classes, grid_size, max_active);
  }
  return out;
}

std::vector<IndividualRecord> parse_population(const std::string& text) {
  const auto lines = split_lines(text);
  if (lines.empty()) throw FormatError("population checkpoint is empty");
  const std::size_t count = parse_field(lines.front(), "count");
  std::size_t pos = 1;
  std::vector<IndividualRecord> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(parse_at(lines, pos));
  if (pos != lines.size()) throw FormatError("trailing lines after population");
  return out;
}

std::string format_history(std::span<const GenerationRecord> history, std::size_t classes) {
  const ClassPairIndex pairs(classes);
  std::string out = "generation,best,mean,active_pairs\n";
  for (const auto& rec : history) {
    out += std::to_string(rec.generation) + "," + format_double(rec.best) + "," +
           format_double(rec.mean) + ",";
    for (std::size_t n = 0; n < rec.best_active_pairs.size(); ++n) {
      const auto [i, j] = pairs.pair_at(rec.best_active_pairs[n]);
      if (n > 0) out.push_back(' ');
      out += std::to_string(i) + "-" + std::to_string(j);
    }
    out.push_back('\n');
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
  if (!out) throw ConfigError("write failed for " + path.string());
}

}  // namespace patchmix
