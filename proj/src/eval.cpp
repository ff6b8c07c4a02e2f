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

#include "faap/eval.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "faap/image_io.hpp"
#include "faap/optimizer.hpp"

namespace faap {

namespace {

constexpr const char* kVersion = "faap-0.1.0";

std::vector<int> predicted_labels(const DeployedModel<float>& model, const DatasetSplit& split) {
  return predict_split(model, split).labels;
}

template <typename T>
T median_of(std::vector<T> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  if (n % 2 == 1) return v[n / 2];
  return (v[n / 2 - 1] + v[n / 2]) / T(2);
}

}  // namespace

std::string library_version() { return kVersion; }

std::vector<PredictionRecord> prediction_records(const DatasetSplit& split,
                                                 std::span<const int> predicted) {
  if (predicted.size() != split.size()) {
    throw Error(ErrorCode::kLengthMismatch, "prediction count differs from split size");
  }
  std::vector<PredictionRecord> out;
  out.reserve(split.size());
  for (std::size_t i = 0; i < split.size(); ++i) {
    out.push_back({split.samples[i].y, split.samples[i].z, predicted[i]});
  }
  return out;
}

BeforeAfterRow evaluate_before_after(const DeployedModel<float>& model,
                                     const PerturbationGenerator<float>& generator,
                                     const DatasetSplit& test, const std::string& condition) {
  const auto before = prediction_records(test, predicted_labels(model, test));
  const DatasetSplit perturbed = perturb_split(generator, test);
  const auto after = prediction_records(test, predicted_labels(model, perturbed));
  return {condition, audit(before), audit(after), false};
}

// --- Endpoint --------------------------------------------------------------------

int map_label(const std::string& token, LabelScheme scheme) {
  if (scheme == LabelScheme::kSmile) {
    if (token == "none") return -1;
    if (token == "smile" || token == "laugh") return 1;
  } else {
    if (token == "0" || token == "-1") return -1;
    if (token == "1" || token == "+1") return 1;
  }
  throw Error(ErrorCode::kEndpointFailure, "unrecognised label token '" + token + "'");
}

MockEndpoint::MockEndpoint(DeployedModel<float> model, LabelScheme scheme, MockFailures failures)
    : model_(std::move(model)), scheme_(scheme), failures_(failures) {}

std::string MockEndpoint::submit(const std::string& filename, std::span<const std::uint8_t> bytes) {
  const std::size_t request = requests_++;
  if (failures_.unreachable) throw Error(ErrorCode::kEndpointFailure, "endpoint unreachable");
  if (failures_.failure_rate > 0.0) {
    std::seed_seq seq{failures_.seed, static_cast<std::uint64_t>(request)};
    std::mt19937_64 rng(seq);
    if (std::uniform_real_distribution<double>(0.0, 1.0)(rng) < failures_.failure_rate) {
      throw Error(ErrorCode::kEndpointFailure, "request for " + filename + " timed out");
    }
  }
  Image image = decode_image(bytes);
  if (image.shape != model_.input_shape()) image = resize_image(image, model_.input_shape().height);
  const Image batch[] = {image};
  const Prediction<float> p = model_.predict(tensor_from_images(batch));
  const int label = p.labels.front();
  if (scheme_ == LabelScheme::kBinary) return label > 0 ? "1" : "0";
  if (label < 0) return "none";
  return p.scores(0, 1) - p.scores(0, 0) > 2.0f ? "laugh" : "smile";
}

RemoteResult evaluate_remote(RemoteEndpoint& endpoint, const PerturbationGenerator<float>& generator,
                             const DatasetSplit& test, const std::string& condition,
                             const RetryPolicy& retry) {
  if (test.empty()) throw Error(ErrorCode::kEmptySplit, "remote evaluation needs test samples");
  const int attempts = std::max(1, retry.max_attempts);
  auto query = [&](const std::string& name, const Image& image) -> std::string {
    const std::vector<std::uint8_t> bytes = encode_image(image, ImageEncoding::kPpm16);
    for (int a = 0; a < attempts; ++a) {
      try {
        return endpoint.submit(name, bytes);
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kEndpointFailure) throw;
      }
    }
    return {};
  };
  auto file_name = [&](std::size_t i) {
    const std::string& id = test.samples[i].id;
    return id.empty() ? "sample_" + std::to_string(i) : id;
  };

  RemoteResult result;
  for (std::size_t i = 0; i < test.size(); ++i) {
    result.original_log.push_back({file_name(i), query(file_name(i), test.samples[i].image)});
  }
  const DatasetSplit perturbed = perturb_split(generator, test);
  for (std::size_t i = 0; i < test.size(); ++i) {
    const std::string name = "perturbed/" + file_name(i);
    // A sample already lost in the first pass is dropped anyway; do not spend
    // requests on it.
    const bool lost = result.original_log[i].label.empty();
    result.perturbed_log.push_back({name, lost ? std::string() : query(name, perturbed.samples[i].image)});
  }

  std::vector<PredictionRecord> before;
  std::vector<PredictionRecord> after;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const std::string& a = result.original_log[i].label;
    const std::string& b = result.perturbed_log[i].label;
    if (a.empty() || b.empty()) {
      ++result.dropped;
      continue;
    }
    const auto& s = test.samples[i];
    before.push_back({s.y, s.z, map_label(a, endpoint.scheme())});
    after.push_back({s.y, s.z, map_label(b, endpoint.scheme())});
  }
  if (before.empty()) {
    throw Error(ErrorCode::kEndpointFailure, "every request failed after " +
                                                 std::to_string(attempts) + " attempts");
  }
  result.row = {condition, audit(before), audit(after), result.dropped > 0};
  return result;
}

void write_remote_log(const std::filesystem::path& path, std::span<const RemoteLogEntry> log) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  for (const auto& e : log) out << e.filename << ' ' << (e.label.empty() ? "-" : e.label) << '\n';
}

std::vector<RemoteLogEntry> read_remote_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kMissingArtifact, "remote log not found: " + path.string());
  std::vector<RemoteLogEntry> out;
  std::string name;
  std::string label;
  while (in >> name >> label) out.push_back({name, label == "-" ? "" : label});
  return out;
}

// --- Probe ---------------------------------------------------------------------

double probe_accuracy(const Tensor<float>& train_features, std::span<const int> train_labels,
                      const Tensor<float>& test_features, std::span<const int> test_labels,
                      const ProbeConfig& config) {
  if (static_cast<std::size_t>(train_features.batch) != train_labels.size() ||
      static_cast<std::size_t>(test_features.batch) != test_labels.size()) {
    throw Error(ErrorCode::kLengthMismatch, "probe features and labels disagree in length");
  }
  if (train_labels.empty() || test_labels.empty()) {
    throw Error(ErrorCode::kEmptyInput, "probe needs training and test samples");
  }
  std::mt19937_64 rng(config.seed);
  Network<float> probe = build_latent_head<float>(train_features.channels(), config.hidden, rng);
  Optimizer<float> opt(probe, config.learning_rate);
  const int plane = train_features.plane();
  std::vector<std::size_t> order(train_labels.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t count = std::min<std::size_t>(config.batch_size, order.size() - start);
      Tensor<float> x(static_cast<int>(count), train_features.shape());
      std::vector<int> y(count);
      for (std::size_t i = 0; i < count; ++i) {
        const std::size_t src = order[start + i];
        x.data.middleRows(static_cast<Eigen::Index>(i) * plane, plane) =
            train_features.data.middleRows(static_cast<Eigen::Index>(src) * plane, plane);
        y[i] = class_index(train_labels[src]);
      }
      NetworkCache<float> cache;
      const Tensor<float> logits = probe.forward(x, &cache);
      Tensor<float> grad;
      grad.batch = static_cast<int>(count);
      grad.height = 1;
      grad.width = 1;
      cross_entropy(logits.data, y, &grad.data);
      Gradients<float> grads = probe.zero_gradients();
      probe.backward(cache, grad, &grads, false);
      opt.step(probe, grads);
    }
  }
  const std::vector<int> predicted = argmax_labels(probe.forward(test_features).data);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) correct += predicted[i] == test_labels[i];
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

Tensor<float> split_features(const DeployedModel<float>& model, const DatasetSplit& split,
                             const PerturbationGenerator<float>* generator, int chunk) {
  const Shape feat = model.feature_shape();
  Tensor<float> out(static_cast<int>(split.size()), feat);
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < split.size(); start += chunk) {
    const std::size_t count = std::min<std::size_t>(chunk, split.size() - start);
    idx.resize(count);
    std::iota(idx.begin(), idx.end(), start);
    Tensor<float> x = split.images(idx);
    if (generator) x = generator->perturb(x);
    const Tensor<float> r = model.extract_features(x);
    out.data.middleRows(static_cast<Eigen::Index>(start) * feat.plane(), r.data.rows()) = r.data;
  }
  return out;
}

// --- Experiment grid -------------------------------------------------------------

void ExperimentSpec::validate() const {
  if (seeds.empty()) throw Error(ErrorCode::kInvalidConfig, "experiment needs at least one seed");
  if (flavors.empty()) throw Error(ErrorCode::kInvalidConfig, "experiment needs at least one flavor");
  for (const auto& f : flavors) parse_flavor(f);
}

std::filesystem::path model_checkpoint_path(const std::filesystem::path& dir,
                                            const std::string& flavor, std::uint64_t seed) {
  return dir / "models" / (to_string(parse_flavor(flavor)) + "_s" + std::to_string(seed) + ".ckpt");
}

std::filesystem::path generator_checkpoint_path(const std::filesystem::path& dir,
                                                const std::string& flavor, std::uint64_t seed) {
  return dir / "generators" /
         (to_string(parse_flavor(flavor)) + "_s" + std::to_string(seed) + ".ckpt");
}

BeforeAfterRow median_row(std::span<const BeforeAfterRow> rows, const std::string& condition) {
  if (rows.empty()) throw Error(ErrorCode::kEmptyInput, "median of no rows");
  auto median_report = [&](bool after) {
    std::vector<double> acc;
    std::vector<double> dp;
    std::vector<double> deo;
    std::vector<std::size_t> n;
    for (const auto& r : rows) {
      const FairnessReport& rep = after ? r.after : r.before;
      acc.push_back(rep.accuracy);
      dp.push_back(rep.dp_gap);
      deo.push_back(rep.deo_gap);
      n.push_back(rep.n_records);
    }
    FairnessReport out;
    out.accuracy = median_of(acc);
    out.dp_gap = median_of(dp);
    out.deo_gap = median_of(deo);
    out.n_records = median_of(n);
    return out;
  };
  bool partial = false;
  for (const auto& r : rows) partial = partial || r.partial;
  return {condition, median_report(false), median_report(true), partial};
}

ExperimentTable run_experiment(const ExperimentSpec& spec, const TestSplitProvider& test_split) {
  spec.validate();
  ExperimentTable table;
  for (const auto& flavor : spec.flavors) {
    std::vector<BeforeAfterRow> per_flavor;
    for (std::uint64_t seed : spec.seeds) {
      const auto model_path = model_checkpoint_path(spec.artifact_dir, flavor, seed);
      const auto gen_path = generator_checkpoint_path(spec.artifact_dir, flavor, seed);
      for (const auto& p : {model_path, gen_path}) {
        if (!std::filesystem::exists(p)) {
          throw Error(ErrorCode::kMissingArtifact, "checkpoint not found: " + p.string());
        }
      }
      const DeployedModel<float> model = load_model(model_path);
      const PerturbationGenerator<float> gen = load_generator(gen_path);
      per_flavor.push_back(evaluate_before_after(model, gen, test_split(seed),
                                                 flavor + "/s" + std::to_string(seed)));
    }
    table.medians.push_back(median_row(per_flavor, flavor + "/median"));
    for (auto& r : per_flavor) {
      table.partial = table.partial || r.partial;
      table.rows.push_back(std::move(r));
    }
  }
  if (!spec.output_dir.empty()) {
    std::vector<BeforeAfterRow> all = table.rows;
    all.insert(all.end(), table.medians.begin(), table.medians.end());
    write_report(spec.output_dir / "table1",
                 {"Before / after perturbation (" + spec.dataset_id + ")", spec.config_hash,
                  spec.seeds},
                 all);
  }
  return table;
}

// --- Reports -------------------------------------------------------------------

std::string serialize_rows(const ReportHeader& header, std::span<const BeforeAfterRow> rows) {
  std::ostringstream out;
  out << "# " << header.title << '\n';
  out << "# config_hash=" << header.config_hash << " seeds=";
  for (std::size_t i = 0; i < header.seeds.size(); ++i) {
    out << (i ? "," : "") << header.seeds[i];
  }
  out << " version=" << kVersion << '\n';
  for (const auto& r : rows) {
    const char* partial = r.partial ? "1" : "0";
    out << "phase=before partial=" << partial << ' ' << to_record(r.before, r.condition) << '\n';
    out << "phase=after partial=" << partial << ' ' << to_record(r.after, r.condition) << '\n';
  }
  return out.str();
}

std::vector<BeforeAfterRow> parse_rows(const std::string& text) {
  std::vector<BeforeAfterRow> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    std::string condition;
    const FairnessReport report = parse_record(line, &condition);
    const bool after = line.rfind("phase=after", 0) == 0;
    const bool partial = line.find("partial=1") != std::string::npos;
    if (!after) {
      rows.push_back({condition, report, {}, partial});
    } else {
      if (rows.empty() || rows.back().condition != condition) {
        throw Error(ErrorCode::kInvalidRecord, "after-record without a before-record: " + condition);
      }
      rows.back().after = report;
    }
  }
  return rows;
}

std::string render_before_after(std::string_view title, std::span<const BeforeAfterRow> rows) {
  std::vector<ReportRow> flat;
  for (const auto& r : rows) {
    const std::string mark = r.partial ? " (partial)" : "";
    flat.push_back({r.condition + mark, r.before});
    flat.push_back({r.condition + " + FAAP" + mark, r.after});
  }
  return render_table(title, flat);
}

void write_report(const std::filesystem::path& stem, const ReportHeader& header,
                  std::span<const BeforeAfterRow> rows) {
  if (stem.has_parent_path()) std::filesystem::create_directories(stem.parent_path());
  const std::filesystem::path records = stem.string() + ".records";
  const std::filesystem::path table = stem.string() + ".txt";
  {
    std::ofstream out(records, std::ios::binary);
    if (!out) throw Error(ErrorCode::kIoError, "cannot write " + records.string());
    out << serialize_rows(header, rows);
  }
  std::ofstream out(table, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + table.string());
  out << render_before_after(header.title, rows);
  out << "(config " << header.config_hash << ", " << kVersion << ")\n";
}

}  // namespace faap
