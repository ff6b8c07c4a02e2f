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

#include "faap/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace faap {

namespace {

[[noreturn]] void invalid(const std::string& key, const std::string& what) {
  throw Error(ErrorCode::kConfigInvalid, key + ": " + what);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size()) {
    invalid(key, "expected a number, got '" + raw + "'");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  invalid(key, "expected a boolean, got '" + raw + "'");
}

std::vector<std::string> parse_list(const std::string& raw) {
  std::vector<std::string> out;
  std::stringstream in(raw);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename Pick>
auto parse_choice(const std::string& key, const std::string& raw,
                  std::initializer_list<std::pair<const char*, Pick>> choices) {
  const std::string v = trim(raw);
  for (const auto& [name, value] : choices) {
    if (v == name) return value;
  }
  std::string allowed;
  for (const auto& c : choices) allowed += std::string(allowed.empty() ? "" : "|") + c.first;
  invalid(key, "expected one of " + allowed + ", got '" + raw + "'");
}

struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<nlohmann::json(const RunConfig&)> get;
};

template <typename T, typename Access>
Field number(Access access) {
  return {[access](RunConfig& c, const std::string& k, const std::string& v) {
            access(c) = parse_number<T>(k, v);
          },
          [access](const RunConfig& c) { return nlohmann::json(access(c)); }};
}

template <typename Access>
Field flag(Access access) {
  return {[access](RunConfig& c, const std::string& k, const std::string& v) {
            access(c) = parse_bool(k, v);
          },
          [access](const RunConfig& c) { return nlohmann::json(access(c)); }};
}

template <typename Access>
Field text(Access access) {
  return {[access](RunConfig& c, const std::string&, const std::string& v) { access(c) = trim(v); },
          [access](const RunConfig& c) {
            return nlohmann::json(std::string(access(c)));
          }};
}

#define FAAP_FIELD(expr) [](auto& c) -> auto& { return c.expr; }

const char* optimizer_name(OptimizerKind k) { return k == OptimizerKind::kSgd ? "sgd" : "adam"; }

OptimizerKind parse_optimizer(const std::string& key, const std::string& v) {
  return parse_choice<OptimizerKind>(key, v, {{"adam", OptimizerKind::kAdam}, {"sgd", OptimizerKind::kSgd}});
}

Field optimizer(OptimizerKind FaapConfig::*member) {
  return {[member](RunConfig& c, const std::string& k, const std::string& v) {
            c.faap.*member = parse_optimizer(k, v);
          },
          [member](const RunConfig& c) { return nlohmann::json(optimizer_name(c.faap.*member)); }};
}

const std::map<std::string, Field>& fields() {
  static const std::map<std::string, Field> table = [] {
    std::map<std::string, Field> t;
    t["run.seed"] = number<std::uint64_t>(FAAP_FIELD(seed));
    t["run.output_dir"] = {
        [](RunConfig& c, const std::string&, const std::string& v) { c.output_dir = trim(v); },
        [](const RunConfig& c) { return nlohmann::json(c.output_dir.string()); }};

    t["data.source"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                          c.data.source = parse_choice<const char*>(
                              k, v, {{"synthetic", "synthetic"}, {"corpus", "corpus"}});
                        },
                        [](const RunConfig& c) { return nlohmann::json(c.data.source); }};
    t["data.corpus"] = {
        [](RunConfig& c, const std::string&, const std::string& v) { c.data.corpus = trim(v); },
        [](const RunConfig& c) { return nlohmann::json(c.data.corpus.string()); }};
    t["data.image_size"] = number<int>(FAAP_FIELD(data.image_size));
    t["data.target_attribute"] = text(FAAP_FIELD(data.target_attribute));
    t["data.protected_attribute"] = text(FAAP_FIELD(data.protected_attribute));
    t["data.correlation"] = number<double>(FAAP_FIELD(data.bias.correlation));
    t["data.positive_rate"] = number<double>(FAAP_FIELD(data.bias.positive_rate));
    t["data.group_rate"] = number<double>(FAAP_FIELD(data.bias.group_rate));
    t["data.n"] = number<int>(FAAP_FIELD(data.bias.n));
    t["data.cue_strength"] = number<double>(FAAP_FIELD(data.bias.cue_strength));
    t["data.label_cue_contrast"] = number<double>(FAAP_FIELD(data.bias.label_cue_contrast));
    t["data.cue_free_fraction"] = number<double>(FAAP_FIELD(data.bias.cue_free_fraction));
    t["data.pixel_noise"] = number<double>(FAAP_FIELD(data.bias.pixel_noise));
    t["data.validation_fraction"] = number<double>(FAAP_FIELD(data.bias.validation_fraction));
    t["data.test_fraction"] = number<double>(FAAP_FIELD(data.bias.test_fraction));

    t["deployed.flavor"] = text(FAAP_FIELD(deployed.flavor));
    t["deployed.fair_weight"] = number<double>(FAAP_FIELD(deployed.fair_weight));
    t["deployed.reversal_weight"] = number<double>(FAAP_FIELD(deployed.reversal_weight));
    t["deployed.flip_rate"] = number<double>(FAAP_FIELD(deployed.flip_rate));
    t["deployed.epochs"] = number<int>(FAAP_FIELD(deployed.train.epochs));
    t["deployed.batch_size"] = number<int>(FAAP_FIELD(deployed.train.batch_size));
    t["deployed.learning_rate"] = number<double>(FAAP_FIELD(deployed.train.learning_rate));
    t["deployed.adversary_hidden"] = number<int>(FAAP_FIELD(deployed.train.adversary_hidden));
    t["deployed.adversary_learning_rate"] =
        number<double>(FAAP_FIELD(deployed.train.adversary_learning_rate));
    t["deployed.convergence_margin"] = number<double>(FAAP_FIELD(deployed.train.convergence_margin));
    t["deployed.base_width"] = number<int>(FAAP_FIELD(deployed.train.arch.base_width));
    t["deployed.stages"] = number<int>(FAAP_FIELD(deployed.train.arch.stages));
    t["deployed.blocks_per_stage"] = number<int>(FAAP_FIELD(deployed.train.arch.blocks_per_stage));
    t["deployed.residual"] = flag(FAAP_FIELD(deployed.train.arch.residual));
    t["deployed.heldout_base_width"] = number<int>(FAAP_FIELD(deployed.heldout.base_width));
    t["deployed.heldout_stages"] = number<int>(FAAP_FIELD(deployed.heldout.stages));
    t["deployed.heldout_blocks_per_stage"] =
        number<int>(FAAP_FIELD(deployed.heldout.blocks_per_stage));
    t["deployed.heldout_residual"] = flag(FAAP_FIELD(deployed.heldout.residual));

    t["faap.alpha"] = number<double>(FAAP_FIELD(faap.alpha));
    t["faap.beta"] = number<double>(FAAP_FIELD(faap.beta));
    t["faap.lr_discriminator"] = number<double>(FAAP_FIELD(faap.lr_discriminator));
    t["faap.lr_generator"] = number<double>(FAAP_FIELD(faap.lr_generator));
    t["faap.iterations"] = number<int>(FAAP_FIELD(faap.iterations));
    t["faap.batch_size"] = number<int>(FAAP_FIELD(faap.batch_size));
    t["faap.epsilon"] = number<double>(FAAP_FIELD(faap.epsilon));
    t["faap.generator_width"] = number<int>(FAAP_FIELD(faap.generator_width));
    t["faap.discriminator_hidden"] = number<int>(FAAP_FIELD(faap.discriminator_hidden));
    t["faap.optimizer_discriminator"] = optimizer(&FaapConfig::optimizer_discriminator);
    t["faap.optimizer_generator"] = optimizer(&FaapConfig::optimizer_generator);
    t["faap.ablation"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                            c.faap.ablation = parse_choice<Ablation>(
                                k, v, {{"none", Ablation::kNone}, {"target_only", Ablation::kTargetOnly}});
                          },
                          [](const RunConfig& c) {
                            return nlohmann::json(c.faap.ablation == Ablation::kTargetOnly ? "target_only"
                                                                                           : "none");
                          }};

    t["eval.seeds"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                         c.eval.seeds.clear();
                         for (const auto& s : parse_list(v)) {
                           c.eval.seeds.push_back(parse_number<std::uint64_t>(k, s));
                         }
                       },
                       [](const RunConfig& c) { return nlohmann::json(c.eval.seeds); }};
    t["eval.flavors"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                           c.eval.flavors = parse_list(v);
                         },
                         [](const RunConfig& c) { return nlohmann::json(c.eval.flavors); }};
    t["eval.surrogates"] = {[](RunConfig& c, const std::string&, const std::string& v) {
                              c.eval.surrogates = parse_list(v);
                            },
                            [](const RunConfig& c) { return nlohmann::json(c.eval.surrogates); }};
    t["eval.endpoint"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                            c.eval.endpoint = parse_choice<const char*>(k, v, {{"mock", "mock"}});
                          },
                          [](const RunConfig& c) { return nlohmann::json(c.eval.endpoint); }};
    t["eval.label_scheme"] = {[](RunConfig& c, const std::string& k, const std::string& v) {
                                c.eval.label_scheme = parse_choice<LabelScheme>(
                                    k, v, {{"binary", LabelScheme::kBinary}, {"smile", LabelScheme::kSmile}});
                              },
                              [](const RunConfig& c) {
                                return nlohmann::json(
                                    c.eval.label_scheme == LabelScheme::kSmile ? "smile" : "binary");
                              }};
    t["eval.failure_rate"] = number<double>(FAAP_FIELD(eval.failure_rate));
    t["eval.max_attempts"] = number<int>(FAAP_FIELD(eval.max_attempts));

    t["viz.grad_cam"] = flag(FAAP_FIELD(viz.grad_cam));
    t["viz.embedding"] = flag(FAAP_FIELD(viz.embedding));
    t["viz.grid_samples"] = number<int>(FAAP_FIELD(viz.grid_samples));
    t["viz.embed_points"] = number<int>(FAAP_FIELD(viz.embed_points));
    t["viz.perplexity"] = number<double>(FAAP_FIELD(viz.tsne.perplexity));
    t["viz.tsne_iterations"] = number<int>(FAAP_FIELD(viz.tsne.iterations));
    t["viz.tsne_learning_rate"] = number<double>(FAAP_FIELD(viz.tsne.learning_rate));
    return t;
  }();
  return table;
}

#undef FAAP_FIELD

}  // namespace

FlavorSpec DeployedSection::flavor_spec(const std::string& name) const {
  switch (parse_flavor(name)) {
    case TrainFlavor::kNormal: return FlavorSpec::normal();
    case TrainFlavor::kFairAdversarial: return FlavorSpec::fair(fair_weight);
    case TrainFlavor::kUnfairLabelFlip: return FlavorSpec::label_flip(flip_rate);
    case TrainFlavor::kUnfairReversedGradient: return FlavorSpec::reversed_gradient(reversal_weight);
  }
  return FlavorSpec::normal();
}

void apply_setting(RunConfig& config, const std::string& key, const std::string& value) {
  const auto it = fields().find(key);
  if (it == fields().end()) invalid(key, "unknown key");
  it->second.set(config, key, value);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, f] : fields()) keys.push_back(k);
  return keys;
}

void RunConfig::validate() const {
  auto check = [](const std::string& key, auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      invalid(key, e.what());
    }
  };
  check("data", [&] { data.bias.validate(); });
  if (data.image_size < 8 || data.image_size % 4 != 0) {
    invalid("data.image_size", "must be a multiple of 4 and at least 8");
  }
  if (data.source == "corpus" && data.corpus.empty()) invalid("data.corpus", "required for corpus source");
  check("deployed", [&] {
    TrainConfig t = deployed.train;
    t.arch.image_size = data.image_size;
    t.validate();
    t.arch = deployed.heldout;
    t.arch.image_size = data.image_size;
    t.validate();
    parse_flavor(deployed.flavor);
    deployed.flavor_spec("fair").validate();
    deployed.flavor_spec("lf").validate();
    deployed.flavor_spec("rg").validate();
  });
  check("faap", [&] { faap.validate(); });
  if (eval.seeds.empty()) invalid("eval.seeds", "at least one seed required");
  if (eval.flavors.empty()) invalid("eval.flavors", "at least one flavor required");
  check("eval.flavors", [&] {
    for (const auto& f : eval.flavors) parse_flavor(f);
  });
  check("eval.surrogates", [&] {
    for (const auto& f : eval.surrogates) parse_flavor(f);
  });
  if (eval.surrogates.size() < 2) invalid("eval.surrogates", "an ensemble needs at least two models");
  if (eval.failure_rate < 0.0 || eval.failure_rate > 1.0) invalid("eval.failure_rate", "must lie in [0,1]");
  if (eval.max_attempts < 1) invalid("eval.max_attempts", "must be at least 1");
  if (viz.grid_samples < 1) invalid("viz.grid_samples", "must be positive");
  if (viz.embed_points < 10) invalid("viz.embed_points", "must be at least 10");
  if (viz.tsne.perplexity <= 0.0 || viz.tsne.iterations < 1) invalid("viz", "t-SNE settings out of range");
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [key, field] : fields()) {
    const auto dot = key.find('.');
    const std::string section = key.substr(0, dot);
    if (section == "run" || key == "faap.ablation") continue;
    j[section][key.substr(dot + 1)] = field.get(*this);
  }
  return j;
}

std::string RunConfig::hash() const {
  const std::string s = to_json().dump();
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a(s.data(), s.size())));
  return buf;
}

RunConfig load_run_config(const std::filesystem::path& file, const ConfigOverrides& overrides) {
  RunConfig config;
  if (!file.empty()) {
    if (!std::filesystem::exists(file)) {
      throw Error(ErrorCode::kMissingArtifact, "config file not found: " + file.string());
    }
    boost::property_tree::ptree tree;
    try {
      boost::property_tree::read_ini(file.string(), tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw Error(ErrorCode::kConfigInvalid, file.string() + ": " + e.what());
    }
    for (const auto& [section, body] : tree) {
      if (body.empty()) invalid(section, "key outside a section");
      for (const auto& [key, value] : body) {
        apply_setting(config, section + "." + key, value.data());
      }
    }
  }
  for (const auto& [key, value] : overrides) apply_setting(config, key, value);
  config.validate();
  return config;
}

}  // namespace faap
