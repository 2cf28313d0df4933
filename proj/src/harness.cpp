#include "allwas/harness.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include "allwas/barysample.hpp"
#include "allwas/error.hpp"
#include "allwas/log.hpp"
#include "allwas/parallel.hpp"
#include "allwas/random.hpp"
#include "allwas/stats.hpp"
#include "allwas/strategies.hpp"
#include "json.hpp"

namespace allwas {
namespace {

namespace fs = std::filesystem;

// Stage tags for derive_seed.
constexpr std::uint64_t kStageSeed = 1;
constexpr std::uint64_t kStageAugment = 2;
constexpr std::uint64_t kStageTrain = 3;
constexpr std::uint64_t kStageAcquire = 4;

struct LogEntry {
  std::size_t iteration = 0;
  std::size_t labeled = 0;
  double f1 = 0.0;
  double seconds = 0.0;
  /// Labeled corpus indices entering the next iteration.
  std::vector<std::size_t> next_labeled;
};

std::string format_double(double v, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
  return buf;
}

std::string format_fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string log_line(const LogEntry& e) {
  std::string s = std::to_string(e.iteration) + " " + std::to_string(e.labeled) + " " +
                  format_double(e.f1, 17) + " " + format_double(e.seconds, 17) + " |";
  for (auto id : e.next_labeled) s += " " + std::to_string(id);
  return s + "\n";
}

std::optional<LogEntry> parse_log_line(const std::string& line) {
  const auto bar = line.find('|');
  if (bar == std::string::npos) return std::nullopt;
  std::istringstream head(line.substr(0, bar));
  LogEntry e;
  if (!(head >> e.iteration >> e.labeled >> e.f1 >> e.seconds)) return std::nullopt;
  std::istringstream tail(line.substr(bar + 1));
  std::size_t id = 0;
  while (tail >> id) e.next_labeled.push_back(id);
  return e;
}

// Complete lines only; a torn trailing line from a crash is dropped.
std::vector<LogEntry> read_log(const fs::path& path) {
  std::vector<LogEntry> out;
  std::ifstream in(path, std::ios::binary);
  if (!in) return out;
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::size_t start = 0;
  while (true) {
    const auto nl = content.find('\n', start);
    if (nl == std::string::npos) break;
    auto entry = parse_log_line(content.substr(start, nl - start));
    if (!entry || entry->iteration != out.size()) break;
    out.push_back(std::move(*entry));
    start = nl + 1;
  }
  return out;
}

void rewrite_log(const fs::path& path, const std::vector<LogEntry>& entries) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  for (const auto& e : entries) out << log_line(e);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read " + path.string());
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_text(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RuntimeFailure("cannot write " + path.string());
    out << text;
  }
  fs::rename(tmp, path);
}

[[noreturn]] void rethrow_with_context(const Error& e, std::size_t repeat, std::size_t iteration) {
  const std::string msg =
      "repeat " + std::to_string(repeat) + ", iteration " + std::to_string(iteration) + ": " + e.what();
  throw Error(e.kind(), msg);
}

// Everything about a cell that is shared across its repeats.
struct CellContext {
  const ExperimentConfig& cfg;
  const Corpus& corpus;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> validation_truth;
  std::string cell;
};

std::size_t iteration_count(const ExperimentConfig& cfg) {
  return (cfg.budget - cfg.seed.size) / cfg.k + 1;
}

double evaluate(const CellContext& ctx, const ClassifierHead& head) {
  std::vector<std::size_t> preds(ctx.validation.size());
  parallel_for(ctx.validation.size(), [&](std::size_t i) {
    preds[i] = head.predict_proba(ctx.corpus.examples[ctx.validation[i]].embedding).argmax();
  });
  if (ctx.cfg.metric == "macro") {
    return f1_macro(preds, ctx.validation_truth, ctx.corpus.num_classes());
  }
  return f1_target(preds, ctx.validation_truth, ctx.corpus.target_class);
}

std::vector<TrainingExample> training_set(const CellContext& ctx, const std::vector<std::size_t>& labeled,
                                          std::uint64_t augment_seed) {
  const std::size_t c = ctx.corpus.num_classes();
  std::vector<TrainingExample> data;
  data.reserve(labeled.size());
  for (auto id : labeled) {
    const auto& ex = ctx.corpus.examples[id];
    data.push_back({ex.embedding, SoftLabel::one_hot(ex.label, c)});
  }
  const auto& cfg = ctx.cfg;
  if (cfg.augmentation == AugmentationMode::kOff || cfg.augment.factor == 0) return data;
  AugmentationConfig aug = cfg.augment;
  aug.seed = augment_seed;
  const auto synthetic = cfg.augmentation == AugmentationMode::kWasserstein
                             ? augment_wasserstein(data, aug)
                             : augment_l2_kde(data, aug);
  data.reserve(data.size() + synthetic.size());
  for (const auto& s : synthetic) data.push_back({s.x, s.y});
  return data;
}

std::vector<LogEntry> run_repeat(const CellContext& ctx, std::size_t repeat, std::vector<LogEntry> done,
                                 const fs::path* log_path) {
  const auto& cfg = ctx.cfg;
  const std::size_t iterations = iteration_count(cfg);
  const std::uint64_t base = derive_seed(cfg.master_seed, {repeat});

  std::vector<std::size_t> labeled;
  if (done.empty()) {
    SeedSpec spec = cfg.seed;
    spec.seed = derive_seed(base, {kStageSeed, cfg.seed.seed});
    try {
      labeled = build_seed(ctx.corpus, spec, ctx.train).labeled;
    } catch (const Error& e) {
      rethrow_with_context(e, repeat, 0);
    }
  } else {
    labeled = done.back().next_labeled;
  }

  for (std::size_t it = done.size(); it < iterations; ++it) {
    const auto t0 = std::chrono::steady_clock::now();
    LogEntry entry;
    entry.iteration = it;
    entry.labeled = labeled.size();
    try {
      if (labeled.size() != cfg.seed.size + it * cfg.k) {
        throw RuntimeFailure("labeled set has " + std::to_string(labeled.size()) + " examples, expected " +
                             std::to_string(cfg.seed.size + it * cfg.k));
      }
      const auto data = training_set(ctx, labeled, derive_seed(base, {kStageAugment, it}));
      ModelConfig mc = cfg.model;
      mc.seed = derive_seed(base, {kStageTrain, it});
      const ClassifierHead head = train(mc, data);
      entry.f1 = evaluate(ctx, head);

      entry.next_labeled = labeled;
      if (it + 1 < iterations) {
        std::vector<std::size_t> pool_ids;
        std::set_difference(ctx.train.begin(), ctx.train.end(), labeled.begin(), labeled.end(),
                            std::back_inserter(pool_ids));
        std::vector<ExampleEmbedding> pool_emb;
        pool_emb.reserve(pool_ids.size());
        for (auto id : pool_ids) pool_emb.push_back(ctx.corpus.examples[id].embedding);
        std::vector<ExampleEmbedding> lab_emb;
        lab_emb.reserve(labeled.size());
        for (auto id : labeled) lab_emb.push_back(ctx.corpus.examples[id].embedding);

        StrategyOptions so = cfg.strategy_options;
        if (cfg.dump_distances && cfg.strategy == "allwas") {
          fs::create_directories(*cfg.dump_distances);
          so.allwas.dump_distances = *cfg.dump_distances / (ctx.cell + ".r" + std::to_string(repeat) + ".i" +
                                                             std::to_string(it) + ".csv");
        }
        const auto picked = acquire(cfg.strategy, head, PoolView{pool_emb, pool_ids},
                                    PoolView{lab_emb, labeled}, cfg.k, so,
                                    derive_seed(base, {kStageAcquire, it}));
        // The corpus labels of `picked` are the oracle answers; training
        // reads them through the corpus on the next iteration.
        entry.next_labeled.insert(entry.next_labeled.end(), picked.begin(), picked.end());
        std::sort(entry.next_labeled.begin(), entry.next_labeled.end());
        if (std::adjacent_find(entry.next_labeled.begin(), entry.next_labeled.end()) !=
            entry.next_labeled.end()) {
          throw RuntimeFailure("strategy returned an already labeled id");
        }
      }
    } catch (const Error& e) {
      rethrow_with_context(e, repeat, it);
    } catch (const std::exception& e) {
      rethrow_with_context(RuntimeFailure(e.what()), repeat, it);
    }
    entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (log_path) {
      std::ofstream out(*log_path, std::ios::binary | std::ios::app);
      out << log_line(entry);
      out.flush();
      if (!out) throw RuntimeFailure("cannot append to " + log_path->string());
    }
    labeled = entry.next_labeled;
    done.push_back(std::move(entry));
  }
  return done;
}

nlohmann::json meta_json(const ExperimentConfig& cfg, const std::string& hash) {
  return nlohmann::json{{"schema_version", kRunSchemaVersion},
                        {"config_hash", hash},
                        {"cell", cfg.cell_name()},
                        {"dataset", cfg.dataset},
                        {"setting", std::string(to_string(cfg.seed.setting))},
                        {"method", cfg.method_label()},
                        {"validation_fraction", cfg.validation_fraction},
                        {"config", nlohmann::json::parse(config_to_json(cfg))}};
}

RunRecord run_cell(const ExperimentConfig& cfg, const Corpus& corpus, const RunOptions& options) {
  cfg.validate();
  CellContext ctx{cfg, corpus, {}, {}, {}, cfg.cell_name()};
  const auto split = split_train_validation(corpus, cfg.validation_fraction, corpus.split_seed);
  ctx.train = split.train;
  ctx.validation = split.validation;
  for (auto id : ctx.validation) ctx.validation_truth.push_back(corpus.examples[id].label);
  if (cfg.budget > ctx.train.size()) {
    throw ConfigError("budget " + std::to_string(cfg.budget) + " exceeds the " +
                      std::to_string(ctx.train.size()) + " examples available for labeling");
  }

  RunRecord record;
  record.cell = ctx.cell;
  record.dataset = cfg.dataset;
  record.method = cfg.method_label();
  record.config_hash = config_hash(cfg);

  const fs::path dir = cfg.output_dir;
  const fs::path meta_path = dir / (ctx.cell + ".meta.json");
  auto log_path = [&](std::size_t r) { return dir / (ctx.cell + ".r" + std::to_string(r) + ".log"); };

  std::vector<std::vector<LogEntry>> previous(cfg.repeats);
  if (options.write_files) {
    fs::create_directories(dir);
    bool reuse = false;
    if (options.resume && fs::exists(meta_path)) {
      nlohmann::json meta;
      try {
        meta = nlohmann::json::parse(read_text(meta_path));
      } catch (const nlohmann::json::exception&) {
        throw DataError("corrupt run metadata: " + meta_path.string());
      }
      if (meta.value("config_hash", std::string()) != record.config_hash) {
        throw ConfigError("output directory already holds cell " + ctx.cell +
                          " from a different config; choose another output_dir or pass --fresh");
      }
      reuse = true;
    }
    if (reuse) {
      for (std::size_t r = 0; r < cfg.repeats; ++r) {
        previous[r] = read_log(log_path(r));
        rewrite_log(log_path(r), previous[r]);
      }
    } else {
      for (std::size_t r = 0; r < cfg.repeats; ++r) fs::remove(log_path(r));
      fs::remove(dir / (ctx.cell + ".csv"));
      fs::remove(dir / (ctx.cell + ".timing.csv"));
    }
    write_text(meta_path, meta_json(cfg, record.config_hash).dump(2) + "\n");
  }

  std::vector<std::vector<LogEntry>> results(cfg.repeats);
  parallel_for(cfg.repeats, [&](std::size_t r) {
    const fs::path p = log_path(r);
    results[r] = run_repeat(ctx, r, std::move(previous[r]), options.write_files ? &p : nullptr);
  });

  const std::string setting(to_string(cfg.seed.setting));
  std::string timing = "seed,iteration,seconds\n";
  for (std::size_t r = 0; r < cfg.repeats; ++r) {
    for (const auto& e : results[r]) {
      IterationRow row{setting, record.method, r, e.iteration, e.labeled, e.f1,
                       cfg.record_wall_time ? e.seconds : 0.0};
      record.rows.push_back(row);
      record.wall_seconds.push_back(e.seconds);
      timing += std::to_string(r) + "," + std::to_string(e.iteration) + "," + format_fixed(e.seconds, 3) + "\n";
    }
  }
  if (options.write_files) {
    write_text(dir / (ctx.cell + ".csv"), rows_to_csv(record.rows));
    write_text(dir / (ctx.cell + ".timing.csv"), timing);
  }
  return record;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

template <typename T>
T parse_number(const std::string& s, std::size_t line_no) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw DataError("bad number '" + s + "' on CSV line " + std::to_string(line_no));
  }
  return v;
}

}  // namespace

Corpus load_corpus(const ExperimentConfig& cfg) {
  if (cfg.corpus.synthetic) {
    Corpus c = make_synthetic(*cfg.corpus.synthetic);
    if (cfg.corpus.split_seed != 0) c.split_seed = cfg.corpus.split_seed;
    return c;
  }
  if (!cfg.corpus.jsonl) throw ConfigError("config has no corpus source");
  IngestOptions opts;
  opts.featurizer = cfg.corpus.featurizer;
  opts.class_names = cfg.corpus.class_names;
  opts.target_class = cfg.corpus.target_class;
  opts.split_seed = cfg.corpus.split_seed;
  return ingest_jsonl(*cfg.corpus.jsonl, opts);
}

RunRecord run_experiment(const ExperimentConfig& cfg, const RunOptions& options) {
  cfg.validate();
  const Corpus corpus = load_corpus(cfg);
  return run_cell(cfg, corpus, options);
}

SweepAxis parse_sweep_axis(std::string_view name) {
  if (name == "augmentation-factor") return SweepAxis::kAugmentationFactor;
  if (name == "barycenter-group-size") return SweepAxis::kBarycenterGroupSize;
  if (name == "strategy") return SweepAxis::kStrategy;
  throw ConfigError("unknown sweep axis '" + std::string(name) +
                    "' (expected augmentation-factor, barycenter-group-size or strategy)");
}

std::string_view to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kAugmentationFactor:
      return "augmentation-factor";
    case SweepAxis::kBarycenterGroupSize:
      return "barycenter-group-size";
    case SweepAxis::kStrategy:
      return "strategy";
  }
  return "strategy";
}

std::vector<ExperimentConfig> sweep_configs(const ExperimentConfig& base, SweepAxis axis,
                                            std::span<const std::string> values) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  std::vector<ExperimentConfig> out;
  for (const auto& v : values) {
    ExperimentConfig cfg = base;
    if (axis == SweepAxis::kStrategy) {
      cfg.strategy = v;
    } else {
      std::size_t n = 0;
      const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
      if (ec != std::errc() || ptr != v.data() + v.size()) {
        throw ConfigError("sweep value '" + v + "' is not a nonnegative integer");
      }
      if (cfg.augmentation == AugmentationMode::kOff) cfg.augmentation = AugmentationMode::kWasserstein;
      if (axis == SweepAxis::kAugmentationFactor) {
        cfg.augment.factor = n;
      } else {
        cfg.augment.group_size = n;
      }
    }
    cfg.validate();
    out.push_back(std::move(cfg));
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      if (out[i].cell_name() == out[j].cell_name()) throw ConfigError("duplicate sweep value '" + values[i] + "'");
    }
  }
  return out;
}

std::vector<RunRecord> run_sweep(const ExperimentConfig& base, SweepAxis axis,
                                 std::span<const std::string> values, const RunOptions& options) {
  const auto configs = sweep_configs(base, axis, values);
  const Corpus corpus = load_corpus(base);
  std::vector<RunRecord> records(configs.size());
  parallel_for(configs.size(), [&](std::size_t i) { records[i] = run_cell(configs[i], corpus, options); });
  return records;
}

std::string rows_to_csv(std::span<const IterationRow> rows) {
  std::string out = "setting,strategy,seed,iteration,labeled,f1,seconds\n";
  for (const auto& r : rows) {
    out += csv_field(r.setting) + "," + csv_field(r.strategy) + "," + std::to_string(r.seed) + "," +
           std::to_string(r.iteration) + "," + std::to_string(r.labeled) + "," + format_fixed(r.f1, 6) +
           "," + format_fixed(r.seconds, 3) + "\n";
  }
  return out;
}

std::vector<IterationRow> parse_rows_csv(std::string_view text) {
  std::vector<IterationRow> rows;
  std::size_t start = 0;
  std::size_t line_no = 0;
  while (start < text.size()) {
    auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    start = nl + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != "setting,strategy,seed,iteration,labeled,f1,seconds") {
        throw DataError("unexpected CSV header: " + std::string(line));
      }
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7) throw DataError("CSV line " + std::to_string(line_no) + " has " +
                                       std::to_string(f.size()) + " fields, expected 7");
    IterationRow r;
    r.setting = f[0];
    r.strategy = f[1];
    r.seed = parse_number<std::size_t>(f[2], line_no);
    r.iteration = parse_number<std::size_t>(f[3], line_no);
    r.labeled = parse_number<std::size_t>(f[4], line_no);
    r.f1 = parse_number<double>(f[5], line_no);
    r.seconds = parse_number<double>(f[6], line_no);
    rows.push_back(std::move(r));
  }
  if (line_no == 0) throw DataError("empty CSV");
  return rows;
}

}  // namespace allwas
