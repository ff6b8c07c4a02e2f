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

// Group-fairness criteria and accuracy, computed by exact counting.
//
// Labels use the {-1,+1} encoding throughout: y = +1 is the favourable class
// and z = +1 the privileged group. Rates with an empty denominator are
// reported as errors, never as zero.

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace faap {

struct PredictionRecord {
  int y_true = 1;
  int z = 1;
  int y_pred = 1;
};

/// Throws InvalidRecord unless every field is -1 or +1.
void validate(const PredictionRecord& record);

struct GroupConfusion {
  std::size_t true_positive = 0;
  std::size_t false_positive = 0;
  std::size_t true_negative = 0;
  std::size_t false_negative = 0;

  std::size_t total() const {
    return true_positive + false_positive + true_negative + false_negative;
  }
  std::size_t positives() const { return true_positive + false_negative; }
  std::size_t negatives() const { return true_negative + false_positive; }

  /// P(y_pred = +1); nullopt when the group is empty.
  std::optional<double> acceptance_rate() const;
  /// P(y_pred = +1 | y = -1); nullopt without negatives.
  std::optional<double> false_positive_rate() const;
  /// P(y_pred = -1 | y = +1); nullopt without positives.
  std::optional<double> false_negative_rate() const;

  bool operator==(const GroupConfusion&) const = default;
};

/// Confusion counts restricted to records with the given z.
GroupConfusion group_confusion(std::span<const PredictionRecord> records, int z);

/// |P(y_pred=1 | z=-1) - P(y_pred=1 | z=+1)|. Throws EmptyGroup.
double demographic_parity_gap(std::span<const PredictionRecord> records);

/// |FPR(z=+1) - FPR(z=-1)| + |FNR(z=+1) - FNR(z=-1)|.
/// Throws EmptyGroup or EmptyClassWithinGroup.
double equalized_odds_gap(std::span<const PredictionRecord> records);

/// Fraction of records with y_pred == y_true. Throws EmptyInput.
double accuracy(std::span<const PredictionRecord> records);

inline constexpr std::string_view kDeoConvention = "sum";

struct FairnessReport {
  double accuracy = 0.0;
  double dp_gap = 0.0;
  double deo_gap = 0.0;
  GroupConfusion privileged;    // z = +1
  GroupConfusion unprivileged;  // z = -1
  std::size_t n_records = 0;
  std::string deo_convention{kDeoConvention};

  bool operator==(const FairnessReport&) const = default;
};

FairnessReport audit(std::span<const PredictionRecord> records);

/// One-line `key=value` record; `condition` may not contain whitespace.
std::string to_record(const FairnessReport& report, std::string_view condition);
/// Inverse of to_record. Returns the condition name through `condition`.
FairnessReport parse_record(std::string_view line, std::string* condition = nullptr);

struct ReportRow {
  std::string condition;
  FairnessReport report;
};

/// Plain-text table with ACC (percent), DP and DEO columns.
std::string render_table(std::string_view title, std::span<const ReportRow> rows);

}  // namespace faap
