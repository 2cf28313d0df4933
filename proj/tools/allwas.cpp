// allwas command-line driver.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "allwas/config.hpp"
#include "allwas/data.hpp"
#include "allwas/error.hpp"
#include "allwas/harness.hpp"
#include "allwas/report.hpp"
#include "allwas/stats.hpp"

namespace fs = std::filesystem;
using namespace allwas;

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) {
    if (!cur.empty()) out.push_back(cur);
  }
  return out;
}

// "d=64,seed=7"
FeaturizerConfig parse_featurize(const std::string& spec) {
  FeaturizerConfig f;
  for (const auto& part : split(spec, ',')) {
    const auto eq = part.find('=');
    if (eq == std::string::npos) throw ConfigError("--featurize expects key=value pairs, got '" + part + "'");
    const std::string key = part.substr(0, eq);
    const std::string value = part.substr(eq + 1);
    try {
      if (key == "d" || key == "dim") {
        f.dim = std::stoul(value);
      } else if (key == "seed") {
        f.seed = std::stoull(value);
      } else {
        throw ConfigError("unknown --featurize key '" + key + "'");
      }
    } catch (const std::logic_error&) {
      throw ConfigError("bad --featurize value '" + value + "'");
    }
  }
  if (f.dim == 0) throw ConfigError("--featurize d must be >= 1");
  return f;
}

void print_corpus(const Corpus& c) {
  std::printf("examples %zu\ndim %zu\nclasses %zu\n", c.size(), c.dim(), c.num_classes());
  const auto counts = c.class_counts();
  const auto priors = c.class_priors();
  for (std::size_t k = 0; k < c.num_classes(); ++k) {
    std::printf("  %-20s %6zu  %.4f%s\n", c.class_names[k].c_str(), counts[k], priors[k],
                k == c.target_class ? "  (target)" : "");
  }
}

void print_record(const RunRecord& r) {
  std::map<std::size_t, std::pair<double, std::size_t>> by_labeled;
  for (const auto& row : r.rows) {
    auto& acc = by_labeled[row.labeled];
    acc.first += row.f1;
    ++acc.second;
  }
  std::printf("%s  (config %s)\n", r.cell.c_str(), r.config_hash.c_str());
  for (const auto& [labeled, acc] : by_labeled) {
    std::printf("  labeled %5zu  mean f1 %.4f  over %zu repeats\n", labeled, acc.first / acc.second, acc.second);
  }
}

std::string read_all(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw ConfigError("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Active learning with Wasserstein coresets and barycentric augmentation"};
  app.require_subcommand(1);

  auto* ingest = app.add_subcommand("ingest", "Validate a JSONL corpus and print its statistics");
  std::string ingest_path, featurize, export_path, target;
  std::vector<std::string> classes;
  ingest->add_option("jsonl", ingest_path, "Corpus file")->required();
  ingest->add_option("--featurize", featurize, "Hash text into embeddings: d=64,seed=0");
  ingest->add_option("--classes", classes, "Allowed class names")->delimiter(',');
  ingest->add_option("--target", target, "Target (minority) class name");
  ingest->add_option("--export", export_path, "Write the ingested corpus (with embeddings) as JSONL");

  auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus from a JSON spec");
  std::string synth_spec, synth_out;
  synth->add_option("spec", synth_spec, "Synthetic spec JSON")->required();
  synth->add_option("--out", synth_out, "Write the corpus as JSONL");

  auto* run = app.add_subcommand("run", "Run an experiment config");
  std::string run_config, run_output, run_dump;
  bool run_fresh = false;
  run->add_option("config", run_config, "Experiment config JSON")->required();
  run->add_option("--output-dir", run_output, "Override output_dir");
  run->add_flag("--fresh", run_fresh, "Discard previous logs of this cell instead of resuming");
  run->add_option("--dump-distances", run_dump, "Write each allwas distance matrix as CSV under this directory");

  auto* sweep = app.add_subcommand("sweep", "Run a config over one axis of values");
  std::string sweep_config, sweep_axis, sweep_output, sweep_dump;
  std::vector<std::string> sweep_values;
  bool sweep_fresh = false;
  sweep->add_option("config", sweep_config, "Base experiment config JSON")->required();
  sweep->add_option("--axis", sweep_axis, "augmentation-factor | barycenter-group-size | strategy")->required();
  sweep->add_option("--values", sweep_values, "Comma-separated values")->delimiter(',')->required();
  sweep->add_option("--output-dir", sweep_output, "Override output_dir");
  sweep->add_flag("--fresh", sweep_fresh, "Discard previous logs instead of resuming");
  sweep->add_option("--dump-distances", sweep_dump, "Write each allwas distance matrix as CSV under this directory");

  auto* report = app.add_subcommand("report", "Write significance.csv and learning-curve SVGs");
  std::string report_dir;
  report->add_option("dir", report_dir, "Run directory")->required();

  auto* stats = app.add_subcommand("stats", "Paired Wilcoxon tests between methods");
  std::string stats_dir, stats_group, stats_mode = "auto";
  std::vector<std::string> stats_pairs;
  long stats_labeled = -1;
  stats->add_option("dir", stats_dir, "Run directory")->required();
  stats->add_option("--pairs", stats_pairs, "method_a:method_b[,...]")->delimiter(',')->required();
  stats->add_option("--group", stats_group, "dataset/setting (default: the only group)");
  stats->add_option("--labeled", stats_labeled, "Compare only at this labeled count");
  stats->add_option("--mode", stats_mode, "auto | exact | normal")
      ->check(CLI::IsMember({"auto", "exact", "normal"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*ingest) {
      IngestOptions opts;
      if (!featurize.empty()) opts.featurizer = parse_featurize(featurize);
      opts.class_names = classes;
      if (!target.empty()) opts.target_class = target;
      const Corpus corpus = ingest_jsonl(ingest_path, opts);
      print_corpus(corpus);
      if (!export_path.empty()) export_jsonl(corpus, export_path);
    } else if (*synth) {
      const SyntheticSpec spec = parse_synthetic_spec(read_all(synth_spec));
      const Corpus corpus = make_synthetic(spec);
      print_corpus(corpus);
      if (!synth_out.empty()) export_jsonl(corpus, synth_out);
    } else if (*run) {
      ExperimentConfig cfg = load_config(run_config);
      if (!run_output.empty()) cfg.output_dir = run_output;
      if (!run_dump.empty()) cfg.dump_distances = run_dump;
      RunOptions opts;
      opts.resume = !run_fresh;
      print_record(run_experiment(cfg, opts));
    } else if (*sweep) {
      ExperimentConfig cfg = load_config(sweep_config);
      if (!sweep_output.empty()) cfg.output_dir = sweep_output;
      if (!sweep_dump.empty()) cfg.dump_distances = sweep_dump;
      RunOptions opts;
      opts.resume = !sweep_fresh;
      for (const auto& r : run_sweep(cfg, parse_sweep_axis(sweep_axis), sweep_values, opts)) print_record(r);
    } else if (*report) {
      for (const auto& p : write_report(report_dir)) std::printf("wrote %s\n", p.string().c_str());
    } else if (*stats) {
      const auto cells = load_cells(stats_dir);
      std::string group = stats_group;
      if (group.empty()) {
        group = cells.front().group();
        for (const auto& c : cells) {
          if (c.group() != group) throw ConfigError("run directory holds several groups; pass --group");
        }
      }
      const WilcoxonMode mode = stats_mode == "exact"    ? WilcoxonMode::kExact
                                : stats_mode == "normal" ? WilcoxonMode::kNormalApprox
                                                         : WilcoxonMode::kAuto;
      std::printf("method_a,method_b,labeled,n,mean_a,mean_b,statistic,p,p_bonferroni\n");
      for (const auto& pair : stats_pairs) {
        const auto colon = pair.find(':');
        if (colon == std::string::npos) throw ConfigError("--pairs entries look like a:b, got '" + pair + "'");
        const std::string a = pair.substr(0, colon), b = pair.substr(colon + 1);
        std::optional<std::size_t> labeled;
        if (stats_labeled >= 0) labeled = static_cast<std::size_t>(stats_labeled);
        Comparison cmp = compare_methods(cells, group, a, b, labeled);
        if (cmp.test && mode != WilcoxonMode::kAuto) {
          // Re-run with the requested mode on the same pairing.
          std::vector<double> xa, xb;
          std::map<std::pair<std::size_t, std::size_t>, double> index;
          for (const auto& c : cells) {
            if (c.group() != group || c.method != b) continue;
            for (const auto& r : c.rows) {
              if (!labeled || r.labeled == *labeled) index[{r.seed, r.iteration}] = r.f1;
            }
          }
          for (const auto& c : cells) {
            if (c.group() != group || c.method != a) continue;
            for (const auto& r : c.rows) {
              if (labeled && r.labeled != *labeled) continue;
              auto it = index.find({r.seed, r.iteration});
              if (it == index.end()) continue;
              xa.push_back(r.f1);
              xb.push_back(it->second);
            }
          }
          cmp.test = wilcoxon_signed_rank(xa, xb, mode);
        }
        const std::string lab = labeled ? std::to_string(*labeled) : "all";
        if (cmp.test) {
          std::printf("%s,%s,%s,%zu,%.6f,%.6f,%g,%g,%g\n", a.c_str(), b.c_str(), lab.c_str(), cmp.n_pairs,
                      cmp.mean_a, cmp.mean_b, cmp.test->statistic, cmp.test->p,
                      bonferroni(cmp.test->p, stats_pairs.size()));
        } else {
          std::printf("%s,%s,%s,%zu,%.6f,%.6f,NA,NA,NA\n", a.c_str(), b.c_str(), lab.c_str(), cmp.n_pairs,
                      cmp.mean_a, cmp.mean_b);
        }
      }
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.exit_code();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
  return 0;
}
