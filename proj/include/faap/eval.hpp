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

// Before/after experiments, black-box endpoint evaluation and report files.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "faap/data.hpp"
#include "faap/faap.hpp"
#include "faap/metrics.hpp"
#include "faap/model_zoo.hpp"

namespace faap {

struct BeforeAfterRow {
  std::string condition;
  FairnessReport before;
  FairnessReport after;
  /// Some samples were dropped (endpoint failures); both reports cover the
  /// same surviving samples.
  bool partial = false;
};

/// Audits the model on the clean test split and on G's perturbation of it,
/// in the same sample order.
BeforeAfterRow evaluate_before_after(const DeployedModel<float>& model,
                                     const PerturbationGenerator<float>& generator,
                                     const DatasetSplit& test, const std::string& condition);

/// Records of a model's predictions on a split.
std::vector<PredictionRecord> prediction_records(const DatasetSplit& split,
                                                 std::span<const int> predicted);

// --- Black-box endpoint ----------------------------------------------------------

/// How an endpoint spells its labels. kSmile has three answers; "none" maps
/// to -1 and every other answer to +1.
enum class LabelScheme { kBinary, kSmile };

/// Maps a response token to {-1,+1}. Binary accepts 0/1 and -1/+1. Throws
/// EndpointFailure on anything else.
int map_label(const std::string& token, LabelScheme scheme);

/// Label-only submission interface: image file bytes in, label token out. No
/// scores, gradients or parameters are exposed. submit() throws
/// EndpointFailure on a transport-level failure.
class RemoteEndpoint {
 public:
  virtual ~RemoteEndpoint() = default;
  virtual std::string submit(const std::string& filename, std::span<const std::uint8_t> bytes) = 0;
  virtual LabelScheme scheme() const = 0;
};

struct MockFailures {
  double failure_rate = 0.0;  // probability that a single request fails
  bool unreachable = false;   // every request fails
  std::uint64_t seed = 0;
};

/// In-process stand-in for a commercial API, wrapping a held-out model.
class MockEndpoint final : public RemoteEndpoint {
 public:
  MockEndpoint(DeployedModel<float> model, LabelScheme scheme, MockFailures failures = {});
  std::string submit(const std::string& filename, std::span<const std::uint8_t> bytes) override;
  LabelScheme scheme() const override { return scheme_; }
  std::size_t requests() const { return requests_; }

 private:
  DeployedModel<float> model_;
  LabelScheme scheme_;
  MockFailures failures_;
  std::size_t requests_ = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
};

struct RemoteLogEntry {
  std::string filename;
  std::string label;  // raw token; empty when every attempt failed
  bool operator==(const RemoteLogEntry&) const = default;
};

struct RemoteResult {
  BeforeAfterRow row;
  std::vector<RemoteLogEntry> original_log;
  std::vector<RemoteLogEntry> perturbed_log;
  std::size_t dropped = 0;
};

/// Submits every original test image, then every perturbed one, and audits
/// the returned labels. A sample whose request still fails after the retry
/// budget is dropped from both passes and the row is flagged partial. Throws
/// EndpointFailure when no sample survives.
RemoteResult evaluate_remote(RemoteEndpoint& endpoint, const PerturbationGenerator<float>& generator,
                             const DatasetSplit& test, const std::string& condition,
                             const RetryPolicy& retry = {});

/// One `filename label` pair per line.
void write_remote_log(const std::filesystem::path& path, std::span<const RemoteLogEntry> log);
std::vector<RemoteLogEntry> read_remote_log(const std::filesystem::path& path);

// --- Latent probe ----------------------------------------------------------------

struct ProbeConfig {
  int epochs = 30;
  int batch_size = 64;
  double learning_rate = 2e-3;
  int hidden = 32;
  std::uint64_t seed = 0;
};

/// Trains a fresh pooled-feature perceptron on (train_features, train_labels)
/// and returns its accuracy on the test pair. Labels are {-1,+1}.
double probe_accuracy(const Tensor<float>& train_features, std::span<const int> train_labels,
                      const Tensor<float>& test_features, std::span<const int> test_labels,
                      const ProbeConfig& config = {});

/// g(x) for a whole split (optionally perturbed by G first), in chunks.
Tensor<float> split_features(const DeployedModel<float>& model, const DatasetSplit& split,
                             const PerturbationGenerator<float>* generator = nullptr,
                             int chunk = 256);

// --- Experiment grid -------------------------------------------------------------

struct ExperimentSpec {
  std::string dataset_id;
  std::string target_attribute = "Target";
  std::string protected_attribute = "Protected";
  std::vector<std::string> flavors;   // normal|fair|lf|rg
  std::vector<std::uint64_t> seeds;
  std::filesystem::path artifact_dir; // holds the checkpoints
  std::filesystem::path output_dir;
  std::string config_hash;

  void validate() const;
};

std::filesystem::path model_checkpoint_path(const std::filesystem::path& dir,
                                            const std::string& flavor, std::uint64_t seed);
std::filesystem::path generator_checkpoint_path(const std::filesystem::path& dir,
                                                const std::string& flavor, std::uint64_t seed);

struct ExperimentTable {
  std::vector<BeforeAfterRow> rows;     // one per (flavor, seed), flavor-major
  std::vector<BeforeAfterRow> medians;  // one per flavor
  bool partial = false;
};

/// Median of each headline metric across rows (confusion counts are left
/// empty, n_records is the median count).
BeforeAfterRow median_row(std::span<const BeforeAfterRow> rows, const std::string& condition);

using TestSplitProvider = std::function<DatasetSplit(std::uint64_t seed)>;

/// Evaluates every (flavor, seed) pair from checkpoints under
/// spec.artifact_dir. A missing checkpoint raises MissingArtifact naming the
/// path. Writes `<output_dir>/table1.records` and `table1.txt`.
ExperimentTable run_experiment(const ExperimentSpec& spec, const TestSplitProvider& test_split);

// --- Report files ----------------------------------------------------------------

struct ReportHeader {
  std::string title;
  std::string config_hash;
  std::vector<std::uint64_t> seeds;
};

/// Machine-readable records: a `#` provenance line, then two lines per row
/// (phase=before / phase=after) in the to_record format.
std::string serialize_rows(const ReportHeader& header, std::span<const BeforeAfterRow> rows);
std::vector<BeforeAfterRow> parse_rows(const std::string& text);

/// Table layout: each condition, then the same condition "+ FAAP".
std::string render_before_after(std::string_view title, std::span<const BeforeAfterRow> rows);

/// Writes `<stem>.records` and `<stem>.txt` next to each other.
void write_report(const std::filesystem::path& stem, const ReportHeader& header,
                  std::span<const BeforeAfterRow> rows);

/// Library version string recorded in every output.
std::string library_version();

}  // namespace faap
