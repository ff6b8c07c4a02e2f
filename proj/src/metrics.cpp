/*
 * Copyright 2026 The FAAP Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "faap/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "faap/error.hpp"

namespace faap {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return static_cast<double>(num) / static_cast<double>(den);
}

std::string group_name(int z) { return z > 0 ? "z=+1" : "z=-1"; }

void require_nonempty_groups(const GroupConfusion& pos, const GroupConfusion& neg) {
  if (pos.total() == 0) throw Error(ErrorCode::kEmptyGroup, "no records with " + group_name(1));
  if (neg.total() == 0) throw Error(ErrorCode::kEmptyGroup, "no records with " + group_name(-1));
}

void require_both_classes(const GroupConfusion& g, int z) {
  if (g.positives() == 0) {
    throw Error(ErrorCode::kEmptyClassWithinGroup, "no y=+1 records in " + group_name(z));
  }
  if (g.negatives() == 0) {
    throw Error(ErrorCode::kEmptyClassWithinGroup, "no y=-1 records in " + group_name(z));
  }
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

}  // namespace

void validate(const PredictionRecord& r) {
  auto ok = [](int v) { return v == 1 || v == -1; };
  if (!ok(r.y_true) || !ok(r.z) || !ok(r.y_pred)) {
    throw Error(ErrorCode::kInvalidRecord, "labels must be -1 or +1 (y_true=" +
                                               std::to_string(r.y_true) + ", z=" +
                                               std::to_string(r.z) + ", y_pred=" +
                                               std::to_string(r.y_pred) + ")");
  }
}

std::optional<double> GroupConfusion::acceptance_rate() const {
  if (total() == 0) return std::nullopt;
  return ratio(true_positive + false_positive, total());
}

std::optional<double> GroupConfusion::false_positive_rate() const {
  if (negatives() == 0) return std::nullopt;
  return ratio(false_positive, negatives());
}

std::optional<double> GroupConfusion::false_negative_rate() const {
  if (positives() == 0) return std::nullopt;
  return ratio(false_negative, positives());
}

GroupConfusion group_confusion(std::span<const PredictionRecord> records, int z) {
  GroupConfusion g;
  for (const auto& r : records) {
    validate(r);
    if (r.z != z) continue;
    if (r.y_true > 0) {
      (r.y_pred > 0 ? g.true_positive : g.false_negative) += 1;
    } else {
      (r.y_pred > 0 ? g.false_positive : g.true_negative) += 1;
    }
  }
  return g;
}

double demographic_parity_gap(std::span<const PredictionRecord> records) {
  const GroupConfusion pos = group_confusion(records, 1);
  const GroupConfusion neg = group_confusion(records, -1);
  require_nonempty_groups(pos, neg);
  return std::abs(*neg.acceptance_rate() - *pos.acceptance_rate());
}

double equalized_odds_gap(std::span<const PredictionRecord> records) {
  const GroupConfusion pos = group_confusion(records, 1);
  const GroupConfusion neg = group_confusion(records, -1);
  require_nonempty_groups(pos, neg);
  require_both_classes(pos, 1);
  require_both_classes(neg, -1);
  return std::abs(*pos.false_positive_rate() - *neg.false_positive_rate()) +
         std::abs(*pos.false_negative_rate() - *neg.false_negative_rate());
}

double accuracy(std::span<const PredictionRecord> records) {
  if (records.empty()) throw Error(ErrorCode::kEmptyInput, "accuracy of zero records");
  std::size_t correct = 0;
  for (const auto& r : records) {
    validate(r);
    correct += r.y_pred == r.y_true ? 1 : 0;
  }
  return ratio(correct, records.size());
}

FairnessReport audit(std::span<const PredictionRecord> records) {
  FairnessReport report;
  report.accuracy = accuracy(records);
  report.dp_gap = demographic_parity_gap(records);
  report.deo_gap = equalized_odds_gap(records);
  report.privileged = group_confusion(records, 1);
  report.unprivileged = group_confusion(records, -1);
  report.n_records = records.size();
  return report;
}

std::string to_record(const FairnessReport& r, std::string_view condition) {
  std::ostringstream out;
  out << "condition=" << condition << " acc=" << format_fixed(r.accuracy, 6)
      << " dp=" << format_fixed(r.dp_gap, 6) << " deo=" << format_fixed(r.deo_gap, 6)
      << " n=" << r.n_records << " deo_convention=" << r.deo_convention;
  auto counts = [&](const char* prefix, const GroupConfusion& g) {
    out << ' ' << prefix << "_tp=" << g.true_positive << ' ' << prefix
        << "_fp=" << g.false_positive << ' ' << prefix << "_tn=" << g.true_negative << ' '
        << prefix << "_fn=" << g.false_negative;
  };
  counts("zpos", r.privileged);
  counts("zneg", r.unprivileged);
  return out.str();
}

FairnessReport parse_record(std::string_view line, std::string* condition) {
  std::map<std::string, std::string> kv;
  std::istringstream in{std::string(line)};
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::kInvalidRecord, "malformed report token '" + token + "'");
    }
    kv[token.substr(0, eq)] = token.substr(eq + 1);
  }
  auto get = [&](const std::string& key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw Error(ErrorCode::kInvalidRecord, "report missing '" + key + "'");
    return it->second;
  };
  auto count = [&](const std::string& key) -> std::size_t { return std::stoull(get(key)); };
  FairnessReport r;
  r.accuracy = std::stod(get("acc"));
  r.dp_gap = std::stod(get("dp"));
  r.deo_gap = std::stod(get("deo"));
  r.n_records = count("n");
  r.deo_convention = get("deo_convention");
  r.privileged = {count("zpos_tp"), count("zpos_fp"), count("zpos_tn"), count("zpos_fn")};
  r.unprivileged = {count("zneg_tp"), count("zneg_fp"), count("zneg_tn"), count("zneg_fn")};
  if (condition != nullptr) *condition = get("condition");
  return r;
}

std::string render_table(std::string_view title, std::span<const ReportRow> rows) {
  std::size_t width = title.size();
  for (const auto& row : rows) width = std::max(width, row.condition.size());
  auto pad = [&](std::string_view s) {
    std::string out(s);
    out.resize(width, ' ');
    return out;
  };
  std::ostringstream out;
  out << pad(title) << " | ACC (up) | DP (down) | DEO (down)\n";
  out << std::string(width, '-') << "-+----------+-----------+-----------\n";
  for (const auto& row : rows) {
    char cells[96];
    std::snprintf(cells, sizeof(cells), " | %7.2f%% | %9.4f | %9.4f\n", 100.0 * row.report.accuracy,
                  row.report.dp_gap, row.report.deo_gap);
    out << pad(row.condition) << cells;
  }
  return out.str();
}

}  // namespace faap
