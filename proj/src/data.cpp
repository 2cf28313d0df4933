#include "allwas/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

#include "allwas/error.hpp"
#include "allwas/log.hpp"
#include "allwas/random.hpp"
#include "json.hpp"

namespace allwas {
namespace {

using nlohmann::json;

struct ParsedLine {
  std::string id;
  std::optional<std::string> text;
  std::optional<Eigen::MatrixXd> embedding;
  std::string label;
};

Eigen::MatrixXd parse_embedding(const json& value) {
  if (!value.is_array() || value.empty()) throw std::runtime_error("embedding must be a non-empty array");
  if (value.front().is_array()) {
    const std::size_t d = value.front().size();
    Eigen::MatrixXd m(static_cast<Eigen::Index>(value.size()), static_cast<Eigen::Index>(d));
    for (std::size_t r = 0; r < value.size(); ++r) {
      const auto& row = value[r];
      if (!row.is_array() || row.size() != d) throw std::runtime_error("embedding rows differ in length");
      for (std::size_t c = 0; c < d; ++c) {
        if (!row[c].is_number()) throw std::runtime_error("embedding entries must be numbers");
        m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = row[c].get<double>();
      }
    }
    return m;
  }
  Eigen::MatrixXd m(1, static_cast<Eigen::Index>(value.size()));
  for (std::size_t c = 0; c < value.size(); ++c) {
    if (!value[c].is_number()) throw std::runtime_error("embedding entries must be numbers");
    m(0, static_cast<Eigen::Index>(c)) = value[c].get<double>();
  }
  return m;
}

std::string scalar_to_name(const json& v, const char* field) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_number_integer()) return std::to_string(v.get<long long>());
  throw std::runtime_error(std::string(field) + " must be a string or integer");
}

ParsedLine parse_line(const std::string& line) {
  const json obj = json::parse(line);
  if (!obj.is_object()) throw std::runtime_error("line is not a JSON object");
  ParsedLine out;
  if (!obj.contains("id")) throw std::runtime_error("missing field 'id'");
  out.id = scalar_to_name(obj["id"], "id");
  if (!obj.contains("label")) throw std::runtime_error("missing field 'label'");
  out.label = scalar_to_name(obj["label"], "label");
  if (obj.contains("text") && !obj["text"].is_null()) {
    if (!obj["text"].is_string()) throw std::runtime_error("text must be a string");
    out.text = obj["text"].get<std::string>();
  }
  if (obj.contains("embedding") && !obj["embedding"].is_null()) {
    out.embedding = parse_embedding(obj["embedding"]);
  }
  if (!out.text && !out.embedding) throw std::runtime_error("line has neither text nor embedding");
  return out;
}

std::vector<double> pooled_distances(const Corpus& corpus, std::span<const std::size_t> ids) {
  std::vector<double> out;
  out.reserve(ids.size() * (ids.size() - 1) / 2);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    for (std::size_t j = i + 1; j < ids.size(); ++j) {
      out.push_back((corpus.examples[ids[i]].embedding.pooled - corpus.examples[ids[j]].embedding.pooled).norm());
    }
  }
  return out;
}

double percentile(std::vector<double> values, double pct) {
  if (values.empty()) return 0.0;
  const double pos = std::clamp(pct, 0.0, 100.0) / 100.0 * static_cast<double>(values.size() - 1);
  const auto idx = static_cast<std::size_t>(std::floor(pos));
  std::nth_element(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(idx), values.end());
  return values[idx];
}

}  // namespace

std::vector<std::size_t> Corpus::class_counts() const {
  std::vector<std::size_t> counts(class_names.size(), 0);
  for (const auto& ex : examples) ++counts[ex.label];
  return counts;
}

std::vector<double> Corpus::class_priors() const {
  const auto counts = class_counts();
  std::vector<double> priors(counts.size(), 0.0);
  if (examples.empty()) return priors;
  for (std::size_t c = 0; c < counts.size(); ++c) {
    priors[c] = static_cast<double>(counts[c]) / static_cast<double>(examples.size());
  }
  return priors;
}

Corpus ingest_jsonl(const std::filesystem::path& path, const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus file: " + path.string());

  std::vector<ParsedLine> parsed;
  std::vector<std::string> problems;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char ch) { return std::isspace(ch); })) continue;
    try {
      parsed.push_back(parse_line(line));
    } catch (const std::exception& e) {
      problems.push_back("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!problems.empty()) {
    std::ostringstream msg;
    msg << problems.size() << " malformed line(s) in " << path.string() << ":";
    for (const auto& p : problems) msg << "\n  " << p;
    throw DataError(msg.str());
  }
  if (parsed.empty()) throw DataError("no examples in " + path.string());

  Corpus corpus;
  corpus.split_seed = options.split_seed;
  if (!options.class_names.empty()) {
    corpus.class_names = options.class_names;
  } else {
    std::set<std::string> names;
    for (const auto& p : parsed) names.insert(p.label);
    corpus.class_names.assign(names.begin(), names.end());
  }
  std::map<std::string, std::size_t> class_index;
  for (std::size_t c = 0; c < corpus.class_names.size(); ++c) class_index[corpus.class_names[c]] = c;

  std::unordered_set<std::string> seen;
  std::optional<std::size_t> dim;
  for (const auto& p : parsed) {
    if (!seen.insert(p.id).second) throw DataError("duplicate example id '" + p.id + "'");
    const auto cls = class_index.find(p.label);
    if (cls == class_index.end()) {
      throw DataError("example '" + p.id + "' has unknown label '" + p.label + "'");
    }
    CorpusExample ex;
    ex.id = p.id;
    ex.text = p.text;
    ex.label = cls->second;
    if (p.embedding) {
      if (p.text) warn("example '" + p.id + "' has both text and embedding; using the embedding");
      ex.embedding = ExampleEmbedding::from_tokens(*p.embedding);
    } else {
      if (!options.featurizer) {
        throw ConfigError("example '" + p.id + "' has only text; a featurizer config is required");
      }
      ex.embedding = featurize_text(*p.text, options.featurizer->dim, options.featurizer->seed);
    }
    if (!dim) dim = ex.embedding.dim();
    if (ex.embedding.dim() != *dim) {
      std::ostringstream msg;
      msg << "example '" << p.id << "' has embedding dimension " << ex.embedding.dim()
          << ", expected " << *dim;
      throw DataError(msg.str());
    }
    corpus.examples.push_back(std::move(ex));
  }

  if (corpus.class_names.size() < 2) throw DataError("corpus needs at least two classes");
  if (options.target_class) {
    const auto it = class_index.find(*options.target_class);
    if (it == class_index.end()) throw ConfigError("unknown target class '" + *options.target_class + "'");
    corpus.target_class = it->second;
  } else {
    const auto counts = corpus.class_counts();
    corpus.target_class = static_cast<std::size_t>(
        std::min_element(counts.begin(), counts.end()) - counts.begin());
  }
  return corpus;
}

void export_jsonl(const Corpus& corpus, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw RuntimeFailure("cannot write corpus file: " + path.string());
  for (const auto& ex : corpus.examples) {
    json obj;
    obj["id"] = ex.id;
    if (ex.text) obj["text"] = *ex.text;
    json rows = json::array();
    for (Eigen::Index r = 0; r < ex.embedding.tokens.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < ex.embedding.tokens.cols(); ++c) row.push_back(ex.embedding.tokens(r, c));
      rows.push_back(std::move(row));
    }
    obj["embedding"] = std::move(rows);
    obj["label"] = corpus.class_names[ex.label];
    out << obj.dump() << '\n';
  }
}

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (unsigned char ch : text) {
    if (std::isalnum(ch) && ch < 128) {
      current.push_back(static_cast<char>(std::tolower(ch)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

ExampleEmbedding featurize_text(std::string_view text, std::size_t d, std::uint64_t seed) {
  if (d == 0) throw ConfigError("featurizer dimension must be positive");
  const auto tokens = tokenize(text);
  if (tokens.empty()) {
    warn("empty text featurized as a single zero token");
    return ExampleEmbedding::from_tokens(Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(d)));
  }
  Eigen::MatrixXd rows(static_cast<Eigen::Index>(tokens.size()), static_cast<Eigen::Index>(d));
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    Rng rng(fnv1a64(tokens[t]) ^ seed);
    for (Eigen::Index c = 0; c < rows.cols(); ++c) rows(static_cast<Eigen::Index>(t), c) = rng.normal();
  }
  return ExampleEmbedding::from_tokens(std::move(rows));
}

Corpus make_synthetic(const SyntheticSpec& spec) {
  if (spec.priors.size() < 2) throw ConfigError("synthetic corpus needs at least two class priors");
  if (spec.n == 0 || spec.d == 0 || spec.clusters_per_class == 0) {
    throw ConfigError("synthetic corpus needs n, d and clusters_per_class >= 1");
  }
  if (spec.min_tokens == 0 || spec.max_tokens < spec.min_tokens) {
    throw ConfigError("synthetic token range is invalid");
  }
  if (!(spec.noise >= 0.0)) throw ConfigError("synthetic noise must be nonnegative");
  for (double p : spec.priors) {
    if (!(p >= 0.0)) throw ConfigError("class priors must be nonnegative");
  }

  const std::size_t c = spec.priors.size();
  const auto d = static_cast<Eigen::Index>(spec.d);
  Rng rng(derive_seed(spec.seed, {0xc0de}));
  std::vector<std::vector<Eigen::VectorXd>> centers(c);
  for (auto& per_class : centers) {
    for (std::size_t k = 0; k < spec.clusters_per_class; ++k) {
      Eigen::VectorXd mu(d);
      for (Eigen::Index j = 0; j < d; ++j) mu(j) = spec.center_scale * rng.normal();
      per_class.push_back(std::move(mu));
    }
  }

  Corpus corpus;
  corpus.split_seed = spec.seed;
  for (std::size_t k = 0; k < c; ++k) corpus.class_names.push_back("class" + std::to_string(k));
  corpus.target_class = static_cast<std::size_t>(
      std::min_element(spec.priors.begin(), spec.priors.end()) - spec.priors.begin());

  for (std::size_t i = 0; i < spec.n; ++i) {
    const std::size_t cls = rng.categorical(spec.priors);
    const auto& mu = centers[cls][rng.below(spec.clusters_per_class)];
    Eigen::VectorXd latent = mu;
    for (Eigen::Index j = 0; j < d; ++j) latent(j) += spec.noise * rng.normal();
    const std::size_t count = spec.min_tokens + rng.below(spec.max_tokens - spec.min_tokens + 1);
    Eigen::MatrixXd tokens(static_cast<Eigen::Index>(count), d);
    for (Eigen::Index t = 0; t < tokens.rows(); ++t) {
      for (Eigen::Index j = 0; j < d; ++j) tokens(t, j) = latent(j) + spec.noise * rng.normal();
    }
    CorpusExample ex;
    ex.id = "s" + std::to_string(i);
    ex.label = cls;
    ex.embedding = ExampleEmbedding::from_tokens(std::move(tokens));
    corpus.examples.push_back(std::move(ex));
  }
  return corpus;
}

std::string_view to_string(SeedSetting s) {
  switch (s) {
    case SeedSetting::kBalanced:
      return "balanced";
    case SeedSetting::kImbalanced:
      return "imbalanced";
    case SeedSetting::kImbalancedPractical:
      return "imbalanced-practical";
  }
  return "balanced";
}

SeedSetting parse_seed_setting(std::string_view name) {
  if (name == "balanced") return SeedSetting::kBalanced;
  if (name == "imbalanced") return SeedSetting::kImbalanced;
  if (name == "imbalanced-practical") return SeedSetting::kImbalancedPractical;
  throw ConfigError("unknown seed setting '" + std::string(name) + "'");
}

SeedSplit build_seed(const Corpus& corpus, const SeedSpec& spec,
                     std::span<const std::size_t> candidates) {
  std::vector<std::size_t> pool;
  if (candidates.empty()) {
    pool.resize(corpus.size());
    std::iota(pool.begin(), pool.end(), std::size_t{0});
  } else {
    pool.assign(candidates.begin(), candidates.end());
  }
  if (spec.size == 0 || spec.size > pool.size()) {
    std::ostringstream msg;
    msg << "corpus too small for a seed of " << spec.size << " (have " << pool.size() << ")";
    throw DataError(msg.str());
  }
  if (spec.setting != SeedSetting::kBalanced && spec.size < corpus.num_classes()) {
    throw ConfigError("seed size must be at least the number of classes in imbalanced modes");
  }

  Rng rng(derive_seed(spec.seed, {0x5eed}));
  std::vector<std::size_t> labeled;

  if (spec.setting == SeedSetting::kBalanced) {
    for (auto pos : rng.sample_without_replacement(pool.size(), spec.size)) labeled.push_back(pool[pos]);
  } else {
    std::vector<std::size_t> minority, majority;
    for (auto id : pool) {
      (corpus.examples[id].label == corpus.target_class ? minority : majority).push_back(id);
    }
    const auto want_min = std::min<std::size_t>(
        minority.size(), static_cast<std::size_t>(std::llround(spec.minority_fraction * static_cast<double>(spec.size))));
    const std::size_t want_maj = spec.size - want_min;
    if (want_maj > majority.size()) throw DataError("not enough majority examples for the seed");

    if (spec.setting == SeedSetting::kImbalanced) {
      for (auto pos : rng.sample_without_replacement(minority.size(), want_min)) {
        labeled.push_back(minority[pos]);
      }
    } else if (want_min > 0) {
      // Biased retrieval: only minority points near one anchor are found.
      std::vector<std::size_t> probe = pool;
      if (probe.size() > 2000) {
        std::vector<std::size_t> sub;
        for (auto pos : rng.sample_without_replacement(probe.size(), 2000)) sub.push_back(probe[pos]);
        probe = std::move(sub);
      }
      const double radius = percentile(pooled_distances(corpus, probe), spec.radius_percentile);
      const std::size_t anchor = minority[rng.below(minority.size())];
      const auto& centre = corpus.examples[anchor].embedding.pooled;
      std::vector<std::pair<double, std::size_t>> by_distance;
      for (auto id : minority) {
        by_distance.emplace_back((corpus.examples[id].embedding.pooled - centre).norm(), id);
      }
      std::sort(by_distance.begin(), by_distance.end());
      std::vector<std::size_t> ball;
      for (const auto& [dist, id] : by_distance) {
        if (dist <= radius) ball.push_back(id);
      }
      if (ball.size() >= want_min) {
        for (auto pos : rng.sample_without_replacement(ball.size(), want_min)) labeled.push_back(ball[pos]);
      } else {
        // The ball is too sparse: fall back to the anchor's nearest minority points.
        for (std::size_t i = 0; i < want_min; ++i) labeled.push_back(by_distance[i].second);
      }
    }
    for (auto pos : rng.sample_without_replacement(majority.size(), want_maj)) {
      labeled.push_back(majority[pos]);
    }
  }

  std::sort(labeled.begin(), labeled.end());
  SeedSplit split;
  split.labeled = labeled;
  std::sort(pool.begin(), pool.end());
  std::set_difference(pool.begin(), pool.end(), labeled.begin(), labeled.end(),
                      std::back_inserter(split.unlabeled));
  return split;
}

TrainValidationSplit split_train_validation(const Corpus& corpus, double validation_fraction,
                                            std::uint64_t seed) {
  if (!(validation_fraction >= 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation fraction must lie in [0, 1)");
  }
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(derive_seed(seed, {0x5b17}));
  rng.shuffle(order);
  const auto n_val = static_cast<std::size_t>(
      std::llround(validation_fraction * static_cast<double>(corpus.size())));
  TrainValidationSplit out;
  out.validation.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  out.train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.train.begin(), out.train.end());
  return out;
}

}  // namespace allwas
