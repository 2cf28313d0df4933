#include "allwas/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "allwas/error.hpp"
#include "allwas/random.hpp"
#include "json.hpp"

namespace allwas {
namespace {

using nlohmann::json;

void expect_keys(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + " must be a JSON object");
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (auto a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + std::string(where));
  }
}

template <typename T>
void read(const json& obj, const char* key, T& out) {
  if (!obj.contains(key) || obj[key].is_null()) return;
  try {
    out = obj[key].get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("config key '") + key + "' has the wrong type");
  }
}

template <typename T>
void read_optional(const json& obj, const char* key, std::optional<T>& out) {
  if (!obj.contains(key) || obj[key].is_null()) return;
  T value{};
  read(obj, key, value);
  out = value;
}

SyntheticSpec synthetic_from_json(const json& j) {
  expect_keys(j, "corpus.synthetic",
              {"priors", "clusters_per_class", "n", "d", "noise", "center_scale", "min_tokens",
               "max_tokens", "seed"});
  SyntheticSpec s;
  read(j, "priors", s.priors);
  read(j, "clusters_per_class", s.clusters_per_class);
  read(j, "n", s.n);
  read(j, "d", s.d);
  read(j, "noise", s.noise);
  read(j, "center_scale", s.center_scale);
  read(j, "min_tokens", s.min_tokens);
  read(j, "max_tokens", s.max_tokens);
  read(j, "seed", s.seed);
  return s;
}

json synthetic_to_json(const SyntheticSpec& s) {
  return json{{"priors", s.priors},         {"clusters_per_class", s.clusters_per_class},
              {"n", s.n},                   {"d", s.d},
              {"noise", s.noise},           {"center_scale", s.center_scale},
              {"min_tokens", s.min_tokens}, {"max_tokens", s.max_tokens},
              {"seed", s.seed}};
}

json to_json_value(const ExperimentConfig& cfg, bool include_output) {
  json corpus = json::object();
  if (cfg.corpus.synthetic) corpus["synthetic"] = synthetic_to_json(*cfg.corpus.synthetic);
  if (cfg.corpus.jsonl) {
    corpus["jsonl"] = cfg.corpus.jsonl->generic_string();
    if (cfg.corpus.featurizer) {
      corpus["featurize"] = json{{"dim", cfg.corpus.featurizer->dim}, {"seed", cfg.corpus.featurizer->seed}};
    }
    corpus["classes"] = cfg.corpus.class_names;
    if (cfg.corpus.target_class) corpus["target_class"] = *cfg.corpus.target_class;
    corpus["split_seed"] = cfg.corpus.split_seed;
  }
  const auto& a = cfg.augment;
  json aug{{"mode", std::string(to_string(cfg.augmentation))},
           {"factor", a.factor},
           {"group_size", a.group_size},
           {"lambda", a.lambda_scheme == LambdaScheme::kUniformSimplex ? "uniform" : "dirichlet"},
           {"alpha", a.dirichlet_alpha},
           {"pairing", a.pairing == Pairing::kAnyPair ? "any-pair" : "within-class"}};
  const auto& m = cfg.model;
  json model{{"hidden", m.hidden},         {"dropout", m.dropout},
             {"epochs", m.epochs},         {"batch_size", m.batch_size},
             {"learning_rate", m.learning_rate}};
  const auto& o = cfg.strategy_options.allwas;
  json ot{{"p", o.ot.p},
          {"eps_scale", o.ot.eps_scale},
          {"epsilon", o.ot.epsilon ? json(*o.ot.epsilon) : json(nullptr)},
          {"max_iter", o.ot.max_iter},
          {"tol", o.ot.tol},
          {"subsample", o.subsample ? json(*o.subsample) : json(nullptr)},
          {"s0_cost", o.s0_cost ? json(*o.s0_cost) : json(nullptr)}};
  json seed{{"setting", std::string(to_string(cfg.seed.setting))},
            {"size", cfg.seed.size},
            {"minority_fraction", cfg.seed.minority_fraction},
            {"radius_percentile", cfg.seed.radius_percentile}};
  json out{{"dataset", cfg.dataset},
           {"corpus", corpus},
           {"seed", seed},
           {"strategy", cfg.strategy},
           {"budget", cfg.budget},
           {"k", cfg.k},
           {"repeats", cfg.repeats},
           {"augmentation", aug},
           {"model", model},
           {"ot", ot},
           {"dropout_passes", cfg.strategy_options.dropout_passes},
           {"validation_fraction", cfg.validation_fraction},
           {"metric", cfg.metric},
           {"master_seed", cfg.master_seed}};
  if (include_output) {
    out["output_dir"] = cfg.output_dir.generic_string();
    out["record_wall_time"] = cfg.record_wall_time;
    out["dump_distances"] = cfg.dump_distances ? json(cfg.dump_distances->generic_string()) : json(nullptr);
  }
  return out;
}

std::string safe_name(std::string s) {
  for (char& c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
                    c == '-' || c == '+' || c == '.';
    if (!ok) c = '-';
  }
  return s;
}

}  // namespace

std::string_view to_string(AugmentationMode mode) {
  switch (mode) {
    case AugmentationMode::kOff:
      return "off";
    case AugmentationMode::kWasserstein:
      return "wasserstein";
    case AugmentationMode::kL2Kde:
      return "l2-kde";
  }
  return "off";
}

void ExperimentConfig::validate() const {
  if (!corpus.synthetic && !corpus.jsonl) throw ConfigError("config needs corpus.synthetic or corpus.jsonl");
  if (corpus.synthetic && corpus.jsonl) throw ConfigError("config must name exactly one corpus source");
  if (!is_known_strategy(strategy)) throw ConfigError("unknown strategy '" + strategy + "'");
  if (k == 0) throw ConfigError("k must be >= 1");
  if (k > budget) throw ConfigError("k must not exceed the budget");
  if (repeats == 0) throw ConfigError("repeats must be >= 1");
  if (seed.size == 0) throw ConfigError("seed size must be >= 1");
  if (budget < seed.size) throw ConfigError("budget must be at least the seed size");
  if (!(seed.minority_fraction >= 0.0 && seed.minority_fraction <= 1.0)) {
    throw ConfigError("seed.minority_fraction must lie in [0, 1]");
  }
  if (metric != "target" && metric != "macro") throw ConfigError("metric must be 'target' or 'macro'");
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction must lie in (0, 1)");
  }
  if (augmentation != AugmentationMode::kOff) augment.validate();
  if (!(model.dropout >= 0.0 && model.dropout < 1.0)) throw ConfigError("model.dropout must lie in [0, 1)");
  if (model.batch_size == 0 || model.hidden == 0) throw ConfigError("model batch_size and hidden must be >= 1");
  if (!(model.learning_rate > 0.0)) throw ConfigError("model.learning_rate must be positive");
  const auto& ot = strategy_options.allwas.ot;
  if (!(ot.p >= 1.0)) throw ConfigError("ot.p must be >= 1");
  if (ot.epsilon && !(*ot.epsilon > 0.0)) throw ConfigError("ot.epsilon must be positive");
  if (!(ot.eps_scale > 0.0)) throw ConfigError("ot.eps_scale must be positive");
  if (strategy_options.dropout_passes == 0) throw ConfigError("dropout_passes must be >= 1");
}

std::string ExperimentConfig::method_label() const {
  std::string label = strategy;
  if (augmentation == AugmentationMode::kWasserstein) {
    label += "+wasserstein-f" + std::to_string(augment.factor) + "-g" + std::to_string(augment.group_size);
  } else if (augmentation == AugmentationMode::kL2Kde) {
    label += "+kde-f" + std::to_string(augment.factor);
  }
  return label;
}

std::string ExperimentConfig::cell_name() const {
  return safe_name(dataset + "_" + std::string(to_string(seed.setting)) + "_" + method_label());
}

ExperimentConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  expect_keys(j, "config",
              {"dataset", "corpus", "seed", "strategy", "budget", "k", "repeats", "augmentation",
               "model", "ot", "dropout_passes", "validation_fraction", "metric", "output_dir",
               "master_seed", "record_wall_time", "dump_distances"});
  ExperimentConfig cfg;
  read(j, "dataset", cfg.dataset);
  read(j, "strategy", cfg.strategy);
  read(j, "budget", cfg.budget);
  read(j, "k", cfg.k);
  read(j, "repeats", cfg.repeats);
  read(j, "dropout_passes", cfg.strategy_options.dropout_passes);
  read(j, "validation_fraction", cfg.validation_fraction);
  read(j, "metric", cfg.metric);
  read(j, "master_seed", cfg.master_seed);
  read(j, "record_wall_time", cfg.record_wall_time);
  std::string output_dir;
  read(j, "output_dir", output_dir);
  if (!output_dir.empty()) {
    cfg.output_dir = std::filesystem::path(output_dir).is_absolute() || base_dir.empty()
                         ? std::filesystem::path(output_dir)
                         : base_dir / output_dir;
  }
  std::optional<std::string> dump;
  read_optional(j, "dump_distances", dump);
  if (dump) cfg.dump_distances = *dump;

  if (j.contains("corpus")) {
    const json& c = j["corpus"];
    expect_keys(c, "corpus", {"synthetic", "jsonl", "featurize", "classes", "target_class", "split_seed"});
    if (c.contains("synthetic")) cfg.corpus.synthetic = synthetic_from_json(c["synthetic"]);
    if (c.contains("jsonl")) {
      std::filesystem::path p = c["jsonl"].get<std::string>();
      cfg.corpus.jsonl = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    }
    if (c.contains("featurize")) {
      expect_keys(c["featurize"], "corpus.featurize", {"dim", "seed"});
      FeaturizerConfig f;
      read(c["featurize"], "dim", f.dim);
      read(c["featurize"], "seed", f.seed);
      cfg.corpus.featurizer = f;
    }
    read(c, "classes", cfg.corpus.class_names);
    read_optional(c, "target_class", cfg.corpus.target_class);
    read(c, "split_seed", cfg.corpus.split_seed);
  }
  if (j.contains("seed")) {
    const json& s = j["seed"];
    expect_keys(s, "seed", {"setting", "size", "minority_fraction", "radius_percentile"});
    std::string setting = std::string(to_string(cfg.seed.setting));
    read(s, "setting", setting);
    cfg.seed.setting = parse_seed_setting(setting);
    read(s, "size", cfg.seed.size);
    read(s, "minority_fraction", cfg.seed.minority_fraction);
    read(s, "radius_percentile", cfg.seed.radius_percentile);
  }
  if (j.contains("augmentation")) {
    const json& a = j["augmentation"];
    expect_keys(a, "augmentation", {"mode", "factor", "group_size", "lambda", "alpha", "pairing"});
    std::string mode = "off";
    read(a, "mode", mode);
    if (mode == "off") {
      cfg.augmentation = AugmentationMode::kOff;
    } else if (mode == "wasserstein") {
      cfg.augmentation = AugmentationMode::kWasserstein;
    } else if (mode == "l2-kde") {
      cfg.augmentation = AugmentationMode::kL2Kde;
    } else {
      throw ConfigError("unknown augmentation mode '" + mode + "'");
    }
    read(a, "factor", cfg.augment.factor);
    read(a, "group_size", cfg.augment.group_size);
    std::string lambda = "uniform";
    read(a, "lambda", lambda);
    if (lambda == "uniform") {
      cfg.augment.lambda_scheme = LambdaScheme::kUniformSimplex;
    } else if (lambda == "dirichlet") {
      cfg.augment.lambda_scheme = LambdaScheme::kDirichlet;
    } else {
      throw ConfigError("unknown lambda scheme '" + lambda + "'");
    }
    read(a, "alpha", cfg.augment.dirichlet_alpha);
    std::string pairing = "within-class";
    read(a, "pairing", pairing);
    if (pairing == "within-class") {
      cfg.augment.pairing = Pairing::kWithinClassMinorityWeighted;
    } else if (pairing == "any-pair") {
      cfg.augment.pairing = Pairing::kAnyPair;
    } else {
      throw ConfigError("unknown pairing '" + pairing + "'");
    }
  }
  if (j.contains("model")) {
    const json& m = j["model"];
    expect_keys(m, "model", {"preset", "hidden", "dropout", "epochs", "batch_size", "learning_rate"});
    std::string preset = "desk";
    read(m, "preset", preset);
    if (preset == "bert-finetune") {
      cfg.model = ModelConfig::bert_finetune_preset();
    } else if (preset != "desk") {
      throw ConfigError("unknown model preset '" + preset + "'");
    }
    read(m, "hidden", cfg.model.hidden);
    read(m, "dropout", cfg.model.dropout);
    read(m, "epochs", cfg.model.epochs);
    read(m, "batch_size", cfg.model.batch_size);
    read(m, "learning_rate", cfg.model.learning_rate);
  }
  if (j.contains("ot")) {
    const json& o = j["ot"];
    expect_keys(o, "ot", {"p", "eps_scale", "epsilon", "max_iter", "tol", "subsample", "s0_cost"});
    auto& al = cfg.strategy_options.allwas;
    read(o, "p", al.ot.p);
    read(o, "eps_scale", al.ot.eps_scale);
    read_optional(o, "epsilon", al.ot.epsilon);
    read(o, "max_iter", al.ot.max_iter);
    read(o, "tol", al.ot.tol);
    if (o.contains("subsample")) {
      al.subsample.reset();
      read_optional(o, "subsample", al.subsample);
    }
    read_optional(o, "s0_cost", al.s0_cost);
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path());
}

std::string config_to_json(const ExperimentConfig& cfg) { return to_json_value(cfg, true).dump(2); }

std::string config_hash(const ExperimentConfig& cfg) {
  const std::uint64_t h = fnv1a64(to_json_value(cfg, false).dump());
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

SyntheticSpec parse_synthetic_spec(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("synthetic spec is not valid JSON: ") + e.what());
  }
  return synthetic_from_json(j);
}

}  // namespace allwas
