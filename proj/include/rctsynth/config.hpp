#pragma once

// Pipeline configuration: stage list, schema and metric settings, parsed
// from a JSON document (grammar in docs/config.md) and validated eagerly.

#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "rctsynth/bicop.hpp"
#include "rctsynth/dataset.hpp"
#include "rctsynth/error.hpp"
#include "rctsynth/metrics.hpp"
#include "rctsynth/random.hpp"
#include "rctsynth/regression.hpp"

namespace rctsynth {

enum class StageKind { baseline_vine, treatment_multinomial, regression_continuous, regression_binary };

inline std::string to_string(StageKind k) {
  switch (k) {
    case StageKind::baseline_vine: return "baseline_vine";
    case StageKind::treatment_multinomial: return "treatment_multinomial";
    case StageKind::regression_continuous: return "regression_continuous";
    case StageKind::regression_binary: return "regression_binary";
  }
  return "?";
}

inline StageKind stage_kind_from_string(const std::string& s) {
  if (s == "baseline_vine") return StageKind::baseline_vine;
  if (s == "treatment_multinomial") return StageKind::treatment_multinomial;
  if (s == "regression_continuous") return StageKind::regression_continuous;
  if (s == "regression_binary") return StageKind::regression_binary;
  throw ConfigError("unknown stage kind '" + s + "'");
}

struct StageSpec {
  StageKind kind = StageKind::baseline_vine;
  std::vector<std::string> targets;  // one entry except for the baseline stage
  std::vector<std::string> predictors;
  RandomnessStrategy strategy;        // regression_continuous only
  std::vector<double> probabilities;  // treatment only; empty means uniform

  const std::string& target() const { return targets.front(); }

  std::string label(std::size_t index) const {
    std::string s = "stage " + std::to_string(index) + " (" + to_string(kind);
    if (kind != StageKind::baseline_vine && !targets.empty()) s += " -> " + targets.front();
    return s + ")";
  }
};

struct PipelineConfig {
  Schema schema;
  std::vector<StageSpec> stages;
  std::optional<std::size_t> n_synth;  // default: number of real rows
  bool preprocess_log = false;
  std::size_t runs = 1;
  Seed base_seed = 0;
  std::size_t workers = 1;
  bool model_missingness = false;  // IPW-weighted fits for targets with missing values
  bool emit_missingness = false;   // mask synthetic values where the missingness model draws 0
  std::vector<CopulaFamily> families = all_copula_families();
  PairFitOptions pair_fit;
  MetricConfig metrics;
};

// Checks every invariant; messages name the offending stage.
inline void validate_config(const PipelineConfig& c) {
  try {
    validate_schema(c.schema);
  } catch (const SchemaError& e) {
    throw ConfigError(std::string("schema: ") + e.what());
  }
  if (c.stages.size() < 2) throw ConfigError("config needs at least a baseline and a treatment stage");
  auto column_of = [&](const std::string& name) -> const ColumnSchema* {
    for (const auto& cs : c.schema) {
      if (cs.name == name) return &cs;
    }
    return nullptr;
  };

  std::set<std::string> produced;
  for (std::size_t i = 0; i < c.stages.size(); ++i) {
    const StageSpec& s = c.stages[i];
    const std::string where = s.label(i);
    if ((s.kind == StageKind::baseline_vine) != (i == 0)) {
      throw ConfigError(where + ": the baseline stage must be first and appear exactly once");
    }
    if ((s.kind == StageKind::treatment_multinomial) != (i == 1)) {
      throw ConfigError(where + ": the treatment stage must be second and appear exactly once");
    }
    if (s.targets.empty()) throw ConfigError(where + ": no target");
    if (s.kind != StageKind::baseline_vine && s.targets.size() != 1) {
      throw ConfigError(where + ": exactly one target expected");
    }
    if (s.kind == StageKind::baseline_vine && s.targets.size() < 2) {
      throw ConfigError(where + ": the baseline vine needs at least two columns");
    }
    for (const auto& p : s.predictors) {
      if (!column_of(p)) throw ConfigError(where + ": unknown predictor '" + p + "'");
      if (!produced.count(p)) {
        throw ConfigError(where + ": predictor '" + p + "' is not produced by an earlier stage");
      }
    }
    if ((s.kind == StageKind::baseline_vine || s.kind == StageKind::treatment_multinomial) && !s.predictors.empty()) {
      throw ConfigError(where + ": this stage takes no predictors");
    }
    for (const auto& t : s.targets) {
      const ColumnSchema* cs = column_of(t);
      if (!cs) throw ConfigError(where + ": unknown target column '" + t + "'");
      if (produced.count(t)) throw ConfigError(where + ": column '" + t + "' is already produced by an earlier stage");
      produced.insert(t);
      switch (s.kind) {
        case StageKind::baseline_vine: break;
        case StageKind::treatment_multinomial:
          if (!cs->is_discrete()) throw ConfigError(where + ": treatment column must be discrete");
          if (!s.probabilities.empty()) {
            if (s.probabilities.size() != cs->categories.size()) {
              throw ConfigError(where + ": " + std::to_string(s.probabilities.size()) + " probabilities for " +
                                std::to_string(cs->categories.size()) + " arms");
            }
            double total = 0.0;
            for (double p : s.probabilities) {
              if (!(p >= 0.0) || !std::isfinite(p)) throw ConfigError(where + ": probabilities must be non-negative");
              total += p;
            }
            if (std::fabs(total - 1.0) > 1e-9) throw ConfigError(where + ": probabilities must sum to 1");
          }
          break;
        case StageKind::regression_continuous:
          if (cs->is_discrete()) throw ConfigError(where + ": target must be continuous");
          if (s.strategy.variant == RandomnessVariant::admissible_rejection && !s.strategy.bound) {
            throw ConfigError(where + ": strategy c needs a bound");
          }
          if (s.strategy.max_rejections == 0) throw ConfigError(where + ": max_rejections must be positive");
          break;
        case StageKind::regression_binary:
          if (!cs->is_discrete() || cs->categories.size() != 2) {
            throw ConfigError(where + ": target must be a binary discrete column");
          }
          break;
      }
    }
  }
  for (const auto& cs : c.schema) {
    if (!produced.count(cs.name)) throw ConfigError("column '" + cs.name + "' is not produced by any stage");
  }
  if (c.runs < 1) throw ConfigError("runs must be at least 1");
  if (c.workers < 1) throw ConfigError("workers must be at least 1");
  if (c.n_synth && *c.n_synth < 1) throw ConfigError("n_synth must be at least 1");
  if (c.families.empty()) throw ConfigError("at least one copula family is required");
  if (!c.metrics.label.empty()) {
    const ColumnSchema* cs = column_of(c.metrics.label);
    if (!cs || !cs->is_discrete() || cs->categories.size() != 2) {
      throw ConfigError("metrics.label must name a binary discrete column");
    }
  }
  if (c.metrics.efficacy.k < 1) throw ConfigError("metrics.k must be at least 1");
  if (!(c.metrics.efficacy.test_fraction > 0.0 && c.metrics.efficacy.test_fraction < 1.0)) {
    throw ConfigError("metrics.test_fraction must lie in (0,1)");
  }
}

// ---------------------------------------------------------------------------
// JSON

namespace config_detail {

using nlohmann::json;

inline void only_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(path + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || it.key() == a;
    if (!ok) throw ConfigError(path + ": unknown key '" + it.key() + "'");
  }
}

inline const json& required(const json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) throw ConfigError(path + ": missing key '" + key + "'");
  return j.at(key);
}

inline std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path + ": expected a string");
  return j.get<std::string>();
}

inline double get_number(const json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number");
  return j.get<double>();
}

inline bool get_bool(const json& j, const std::string& path) {
  if (!j.is_boolean()) throw ConfigError(path + ": expected true or false");
  return j.get<bool>();
}

inline std::uint64_t get_count(const json& j, const std::string& path) {
  if (j.is_number_unsigned()) return j.get<std::uint64_t>();
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0) {
    throw ConfigError(path + ": expected a non-negative integer");
  }
  return static_cast<std::uint64_t>(j.get<std::int64_t>());
}

inline std::vector<std::string> get_strings(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + ": expected an array of strings");
  std::vector<std::string> out;
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(get_string(j[i], path + "[" + std::to_string(i) + "]"));
  return out;
}

inline TemporalStage stage_from_string(const std::string& s, const std::string& path) {
  if (s == "baseline") return TemporalStage::baseline;
  if (s == "treatment") return TemporalStage::treatment;
  if (s == "post_randomization") return TemporalStage::post_randomization;
  if (s == "outcome") return TemporalStage::outcome;
  throw ConfigError(path + ": unknown temporal stage '" + s + "'");
}

inline ColumnSchema column_from_json(const json& j, const std::string& path) {
  only_keys(j, path, {"name", "kind", "categories", "lower_bound", "log_transform", "stage", "order"});
  ColumnSchema c;
  c.name = get_string(required(j, path, "name"), path + ".name");
  const std::string kind = get_string(required(j, path, "kind"), path + ".kind");
  if (kind == "continuous") c.kind = ColumnKind::continuous;
  else if (kind == "discrete") c.kind = ColumnKind::discrete;
  else throw ConfigError(path + ".kind: expected \"continuous\" or \"discrete\"");
  if (j.contains("categories")) c.categories = get_strings(j["categories"], path + ".categories");
  if (j.contains("lower_bound") && !j["lower_bound"].is_null()) {
    c.lower_bound = get_number(j["lower_bound"], path + ".lower_bound");
  }
  if (j.contains("log_transform")) c.log_transform = get_bool(j["log_transform"], path + ".log_transform");
  if (j.contains("stage")) c.stage = stage_from_string(get_string(j["stage"], path + ".stage"), path + ".stage");
  if (j.contains("order")) c.order = static_cast<int>(get_count(j["order"], path + ".order"));
  try {
    validate_column_schema(c);
  } catch (const SchemaError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return c;
}

inline RandomnessStrategy strategy_from_json(const json& j, const std::string& path) {
  only_keys(j, path, {"variant", "bound", "max_rejections"});
  RandomnessStrategy s;
  try {
    s.variant = randomness_variant_from_string(get_string(required(j, path, "variant"), path + ".variant"));
  } catch (const ArgumentError& e) {
    throw ConfigError(path + ".variant: " + e.what());
  }
  if (j.contains("bound") && !j["bound"].is_null()) s.bound = get_number(j["bound"], path + ".bound");
  if (j.contains("max_rejections")) s.max_rejections = get_count(j["max_rejections"], path + ".max_rejections");
  return s;
}

inline StageSpec stage_from_json(const json& j, const std::string& path) {
  only_keys(j, path, {"kind", "target", "targets", "predictors", "strategy", "probabilities"});
  StageSpec s;
  s.kind = [&] {
    try {
      return stage_kind_from_string(get_string(required(j, path, "kind"), path + ".kind"));
    } catch (const ConfigError& e) {
      throw ConfigError(path + ".kind: " + e.what());
    }
  }();
  if (s.kind == StageKind::baseline_vine) {
    if (j.contains("target")) throw ConfigError(path + ": the baseline stage uses 'targets', not 'target'");
    s.targets = get_strings(required(j, path, "targets"), path + ".targets");
  } else {
    if (j.contains("targets")) throw ConfigError(path + ": use 'target' for a single-column stage");
    s.targets = {get_string(required(j, path, "target"), path + ".target")};
  }
  if (j.contains("predictors")) s.predictors = get_strings(j["predictors"], path + ".predictors");
  if (j.contains("strategy")) {
    if (s.kind != StageKind::regression_continuous) {
      throw ConfigError(path + ": 'strategy' applies to regression_continuous stages only");
    }
    s.strategy = strategy_from_json(j["strategy"], path + ".strategy");
  }
  if (j.contains("probabilities")) {
    if (s.kind != StageKind::treatment_multinomial) {
      throw ConfigError(path + ": 'probabilities' applies to the treatment stage only");
    }
    const json& p = j["probabilities"];
    if (!p.is_array()) throw ConfigError(path + ".probabilities: expected an array");
    for (std::size_t i = 0; i < p.size(); ++i) {
      s.probabilities.push_back(get_number(p[i], path + ".probabilities[" + std::to_string(i) + "]"));
    }
  }
  return s;
}

inline MetricConfig metrics_from_json(const json& j, const std::string& path) {
  only_keys(j, path, {"label", "classifiers", "k", "test_fraction", "univariate", "bivariate"});
  MetricConfig m;
  if (j.contains("label") && !j["label"].is_null()) m.label = get_string(j["label"], path + ".label");
  if (j.contains("classifiers")) {
    m.efficacy.classifiers.clear();
    for (const auto& s : get_strings(j["classifiers"], path + ".classifiers")) {
      try {
        m.efficacy.classifiers.push_back(classifier_from_string(s));
      } catch (const ArgumentError& e) {
        throw ConfigError(path + ".classifiers: " + e.what());
      }
    }
  }
  if (j.contains("k")) m.efficacy.k = get_count(j["k"], path + ".k");
  if (j.contains("test_fraction")) m.efficacy.test_fraction = get_number(j["test_fraction"], path + ".test_fraction");
  if (j.contains("univariate")) m.univariate = get_bool(j["univariate"], path + ".univariate");
  if (j.contains("bivariate")) m.bivariate = get_bool(j["bivariate"], path + ".bivariate");
  return m;
}

}  // namespace config_detail

inline PipelineConfig config_from_json(const nlohmann::json& j, const std::string& source = "<config>") {
  using namespace config_detail;
  const std::string root = source;
  only_keys(j, root, {"schema", "stages", "n_synth", "preprocess_log", "runs", "base_seed", "workers", "missingness",
                      "copula", "metrics"});
  PipelineConfig c;
  const json& schema = required(j, root, "schema");
  if (!schema.is_array()) throw ConfigError(root + ".schema: expected an array");
  for (std::size_t i = 0; i < schema.size(); ++i) {
    c.schema.push_back(column_from_json(schema[i], root + ".schema[" + std::to_string(i) + "]"));
  }
  const json& stages = required(j, root, "stages");
  if (!stages.is_array()) throw ConfigError(root + ".stages: expected an array");
  for (std::size_t i = 0; i < stages.size(); ++i) {
    c.stages.push_back(stage_from_json(stages[i], root + ".stages[" + std::to_string(i) + "]"));
  }
  if (j.contains("n_synth") && !j["n_synth"].is_null()) c.n_synth = get_count(j["n_synth"], root + ".n_synth");
  if (j.contains("preprocess_log")) c.preprocess_log = get_bool(j["preprocess_log"], root + ".preprocess_log");
  if (j.contains("runs")) c.runs = get_count(j["runs"], root + ".runs");
  if (j.contains("base_seed")) c.base_seed = get_count(j["base_seed"], root + ".base_seed");
  if (j.contains("workers")) c.workers = get_count(j["workers"], root + ".workers");
  if (j.contains("missingness")) {
    const json& m = j["missingness"];
    only_keys(m, root + ".missingness", {"model", "emit"});
    if (m.contains("model")) c.model_missingness = get_bool(m["model"], root + ".missingness.model");
    if (m.contains("emit")) c.emit_missingness = get_bool(m["emit"], root + ".missingness.emit");
    if (c.emit_missingness && !c.model_missingness) {
      throw ConfigError(root + ".missingness: 'emit' requires 'model'");
    }
  }
  if (j.contains("copula")) {
    const json& cj = j["copula"];
    const std::string p = root + ".copula";
    only_keys(cj, p, {"families", "independence_critical", "max_abs_tau"});
    if (cj.contains("families")) {
      c.families.clear();
      for (const auto& f : get_strings(cj["families"], p + ".families")) {
        try {
          c.families.push_back(copula_family_from_string(f));
        } catch (const Error& e) {
          throw ConfigError(p + ".families: " + e.what());
        }
      }
    }
    if (cj.contains("independence_critical")) {
      c.pair_fit.independence_critical = get_number(cj["independence_critical"], p + ".independence_critical");
    }
    if (cj.contains("max_abs_tau")) c.pair_fit.max_abs_tau = get_number(cj["max_abs_tau"], p + ".max_abs_tau");
  }
  if (j.contains("metrics")) c.metrics = metrics_from_json(j["metrics"], root + ".metrics");
  // Strategy c without an explicit bound falls back to the column's floor.
  for (auto& s : c.stages) {
    if (s.kind != StageKind::regression_continuous || s.strategy.bound) continue;
    for (const auto& cs : c.schema) {
      if (cs.name == s.target()) s.strategy.bound = cs.lower_bound;
    }
  }
  validate_config(c);
  return c;
}

inline PipelineConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  return config_from_json(j, path);
}

inline nlohmann::json to_json(const ColumnSchema& c) {
  nlohmann::json j{{"name", c.name}, {"kind", to_string(c.kind)}};
  if (c.is_discrete()) j["categories"] = c.categories;
  if (c.lower_bound) j["lower_bound"] = *c.lower_bound;
  if (c.log_transform) j["log_transform"] = true;
  j["stage"] = to_string(c.stage);
  if (c.order != 0) j["order"] = c.order;
  return j;
}

inline nlohmann::json to_json(const PipelineConfig& c) {
  nlohmann::json j;
  j["schema"] = nlohmann::json::array();
  for (const auto& cs : c.schema) j["schema"].push_back(to_json(cs));
  j["stages"] = nlohmann::json::array();
  for (const auto& s : c.stages) {
    nlohmann::json sj{{"kind", to_string(s.kind)}};
    if (s.kind == StageKind::baseline_vine) sj["targets"] = s.targets;
    else sj["target"] = s.target();
    if (!s.predictors.empty()) sj["predictors"] = s.predictors;
    if (s.kind == StageKind::regression_continuous) {
      nlohmann::json st{{"variant", std::string(1, static_cast<char>('a' + static_cast<int>(s.strategy.variant)))},
                        {"max_rejections", s.strategy.max_rejections}};
      if (s.strategy.bound) st["bound"] = *s.strategy.bound;
      sj["strategy"] = st;
    }
    if (!s.probabilities.empty()) sj["probabilities"] = s.probabilities;
    j["stages"].push_back(sj);
  }
  j["n_synth"] = c.n_synth ? nlohmann::json(*c.n_synth) : nlohmann::json(nullptr);
  j["preprocess_log"] = c.preprocess_log;
  j["runs"] = c.runs;
  j["base_seed"] = c.base_seed;
  j["workers"] = c.workers;
  j["missingness"] = {{"model", c.model_missingness}, {"emit", c.emit_missingness}};
  std::vector<std::string> fams;
  for (auto f : c.families) fams.push_back(to_string(f));
  j["copula"] = {{"families", fams},
                 {"independence_critical", c.pair_fit.independence_critical},
                 {"max_abs_tau", c.pair_fit.max_abs_tau}};
  std::vector<std::string> cls;
  for (auto k : c.metrics.efficacy.classifiers) cls.push_back(to_string(k));
  j["metrics"] = {{"label", c.metrics.label.empty() ? nlohmann::json(nullptr) : nlohmann::json(c.metrics.label)},
                  {"classifiers", cls},
                  {"k", c.metrics.efficacy.k},
                  {"test_fraction", c.metrics.efficacy.test_fraction},
                  {"univariate", c.metrics.univariate},
                  {"bivariate", c.metrics.bivariate}};
  return j;
}

}  // namespace rctsynth
