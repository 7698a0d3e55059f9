#include "condsub/cli.hpp"

#include "condsub/dependence.hpp"
#include "condsub/effects.hpp"
#include "condsub/fidelity.hpp"
#include "condsub/importance.hpp"
#include "condsub/parallel.hpp"
#include "condsub/rng.hpp"
#include "condsub/simulation.hpp"
#include "condsub/version.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

namespace condsub::cli {

namespace {

namespace fs = std::filesystem;

constexpr std::uint64_t kDataStream = 0xda7a;
constexpr std::uint64_t kSplitStream = 0x5711;
constexpr std::uint64_t kModelStream = 0x30de1;
constexpr std::uint64_t kImportanceStream = 0x1f;
constexpr std::uint64_t kSweepStream = 0xd5;

struct Run {
  std::string command;
  Settings s;
  fs::path out;
};

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

std::string provenance(const Run& run) {
  return "# condsub " + std::string(kVersion) + " command=" + run.command + " config=" + hex64(run.s.config_hash) +
         " seed=" + std::to_string(run.s.seed) + "\n";
}

nlohmann::json provenance_json(const Run& run) {
  return {{"tool", "condsub"},
          {"version", kVersion},
          {"command", run.command},
          {"config", hex64(run.s.config_hash)},
          {"seed", run.s.seed}};
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) {
    if (c == '"') q += '"';
    q += c;
  }
  return q + "\"";
}

std::string file_stem(const std::string& name) {
  std::string out;
  for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out.empty() ? "feature" : out;
}

void write_file(const Run& run, const std::string& name, const std::string& content) {
  fs::create_directories(run.out);
  const fs::path path = run.out / name;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot write " + path.string());
  f << content;
  if (!f) throw Error("failed writing " + path.string());
  std::cout << path.string() << "\n";
}

Loss loss_of(const Settings& s) { return parse_loss(s.loss); }

Dataset generated(const Settings& s) {
  const auto seed = derive_seed(s.seed, {kDataStream});
  if (*s.data.generate == "dependent") {
    if (s.data.columns < 8) throw ConfigError("data.columns must be at least 8 for dependent data");
    return generate_dependent(s.data.rows, s.data.columns, seed);
  }
  if (s.data.columns < 10) throw ConfigError("data.columns must be at least 10 for scenario data");
  ScenarioSpec spec;
  spec.kind = parse_scenario(*s.data.generate);
  spec.n = s.data.rows;
  spec.p_total = s.data.columns;
  spec.seed = seed;
  return generate(spec);
}

/// The full dataset, before any train/test split.
Dataset load_all(const Settings& s) {
  if (s.data.generate) return generated(s);
  if (!s.data.path) throw ConfigError("data.path (or data.generate) is required for this command");
  CsvOptions opts;
  if (s.data.schema) opts.schema = Schema::load(*s.data.schema);
  opts.target = s.data.target;
  return load_csv(*s.data.path, opts);
}

struct Split {
  Dataset train;
  Dataset test;
};

Split load_split(const Settings& s) {
  Dataset all = load_all(s);
  if (!all.has_target()) throw ConfigError("this command needs data.target (or a generated scenario)");
  if (s.data.test_path) {
    CsvOptions opts;
    if (s.data.schema) opts.schema = Schema::load(*s.data.schema);
    opts.target = s.data.target;
    Dataset test = load_csv(*s.data.test_path, opts);
    if (test.columns() != all.columns()) throw DataError("test data columns do not match the training data");
    return {std::move(all), std::move(test)};
  }
  auto parts = split(all, SplitSpec{{s.data.train_fraction, 1.0 - s.data.train_fraction},
                                    derive_seed(s.seed, {kSplitStream})});
  if (parts[0].n_rows() == 0 || parts[1].n_rows() == 0) throw DataError("train/test split leaves an empty part");
  return {std::move(parts[0]), std::move(parts[1])};
}

ModelPtr build_model(const Settings& s, const Dataset& train) {
  const auto& m = s.model;
  const auto seed = derive_seed(s.seed, {kModelStream});
  ForestOptions opts;
  opts.n_trees = m.trees;
  if (m.type == "forest") {
    if (loss_of(s) == Loss::misclassification) {
      const auto& y = train.target();
      Index n_classes = 0;
      for (Index i = 0; i < y.size(); ++i) {
        if (!(y(i) >= 0) || y(i) != std::floor(y(i)))
          throw DataError("misclassification loss needs class codes 0, 1, ... as target");
        n_classes = std::max(n_classes, static_cast<Index>(y(i)) + 1);
      }
      return fit_forest_classifier(train.drop_target(), y, n_classes, seed, opts);
    }
    return fit_forest(train, seed, opts);
  }
  if (m.type == "ols") return fit_ols(train);
  if (m.type == "knn") return fit_knn(train, m.k);
  if (m.type == "truth") {
    ScenarioSpec spec;
    spec.kind = parse_scenario(*s.data.generate);
    spec.p_total = s.data.columns;
    return true_model(spec);
  }
  return external_model(m.command, train.columns(),
                        std::chrono::milliseconds(static_cast<long long>(std::llround(m.timeout * 1000.0))));
}

std::vector<Index> feature_indices(const Settings& s, const Dataset& d) {
  std::vector<Index> out;
  if (s.features.empty()) {
    for (Index j = 0; j < d.n_features(); ++j)
      if (d.column(j).is_numeric()) out.push_back(j);
  } else {
    for (const auto& name : s.features) {
      const auto j = d.find(name);
      if (!j) throw ConfigError("analysis.features: no column named '" + name + "'");
      if (!d.column(*j).is_numeric()) throw ConfigError("analysis.features: '" + name + "' is not numeric");
      out.push_back(*j);
    }
  }
  if (out.empty()) throw DataError("no numeric features to analyse");
  return out;
}

SubgroupPartition partition_for(const Settings& s, const Dataset& train, Index j) {
  const Dataset x = train.drop_target();
  if (s.max_depth == 0) return single_group_partition(x, j);
  return fit_partition(x, j, PartitionParams{s.max_depth, s.min_node_size});
}

void cmd_importance(const Run& run) {
  const auto& s = run.s;
  const auto [train, test] = load_split(s);
  const ModelPtr model = build_model(s, train);
  const Loss loss = loss_of(s);

  nlohmann::json features = nlohmann::json::array();
  std::string csv = provenance(run) + "feature,group_id,rule,n_k,cs_pfi,marginal_pfi,aggregate_cs_pfi\n";
  for (Index j : feature_indices(s, train)) {
    const auto part = partition_for(s, train, j);
    const auto res = cs_pfi(*model, part, test, j, loss, s.repetitions,
                            derive_seed(s.seed, {kImportanceStream, static_cast<std::uint64_t>(j)}));
    features.push_back(res.to_json());
    for (const auto& g : res.groups) {
      csv += csv_field(res.name) + "," + std::to_string(g.group_id) + "," + csv_field(g.rule) + "," +
             std::to_string(g.n_k) + "," + (g.cs_pfi ? format_double(*g.cs_pfi) : std::string("NA")) + "," +
             format_double(res.marginal.value) + "," + format_double(res.aggregate) + "\n";
    }
  }
  nlohmann::json doc{{"provenance", provenance_json(run)},
                     {"model", model->name()},
                     {"loss", std::string(to_string(loss))},
                     {"n_train", train.n_rows()},
                     {"n_test", test.n_rows()},
                     {"features", std::move(features)}};
  write_file(run, "importance.json", doc.dump(2) + "\n");
  write_file(run, "importance.csv", csv);
}

void cmd_effects(const Run& run) {
  const auto& s = run.s;
  const auto [train, test] = load_split(s);
  const ModelPtr model = build_model(s, train);
  GridSpec grid;
  grid.size = s.grid_size;

  for (Index j : feature_indices(s, train)) {
    const auto& name = train.column(j).name;
    const auto part = partition_for(s, train, j);
    std::vector<EffectCurve> all{pdp(*model, test, j, grid), ale(*model, train, test, j, s.intervals)};
    const auto cs = cs_pdp(*model, part, test, j, grid);
    all.insert(all.end(), cs.curves.begin(), cs.curves.end());

    nlohmann::json groups = nlohmann::json::array();
    for (const auto& c : cs.curves) {
      nlohmann::json g{{"group_id", c.group->group_id},
                       {"rule", c.group->rule},
                       {"n_k", c.group->n_k},
                       {"support_min", c.support_min},
                       {"support_max", c.support_max}};
      if (c.box) {
        g["q25"] = c.box->q25;
        g["q75"] = c.box->q75;
        g["whisker_lo"] = c.box->whisker_lo;
        g["whisker_hi"] = c.box->whisker_hi;
        g["outliers"] = c.box->outliers;
      }
      groups.push_back(std::move(g));
    }
    nlohmann::json meta{{"provenance", provenance_json(run)},
                        {"feature", name},
                        {"feature_index", j},
                        {"n_groups", part.n_groups()},
                        {"groups", std::move(groups)},
                        {"empty_groups", cs.empty_groups}};

    const std::string stem = "effects_" + file_stem(name);
    write_file(run, stem + ".csv", provenance(run) + curves_to_csv(all));
    write_file(run, stem + ".svg", "<!-- " + provenance(run).substr(2, provenance(run).size() - 3) + " -->\n" +
                                       curves_to_svg(cs.curves, "cs-PDP of " + name));
    write_file(run, stem + ".json", meta.dump(2) + "\n");
  }
}

std::string dataset_label(const Settings& s) {
  if (s.data.generate) return *s.data.generate;
  return s.data.path->stem().string();
}

void cmd_fidelity(const Run& run) {
  const auto& s = run.s;
  const Dataset d = load_all(s);
  FidelityConfig cfg;
  cfg.dataset = dataset_label(s);
  for (const auto& name : s.fidelity_samplers) {
    auto spec = SamplerSpec::parse(name);
    spec.min_node_size = s.min_node_size;
    spec.impute_trees = s.fidelity_impute_trees;
    spec.ale_intervals = s.intervals;
    cfg.samplers.push_back(spec);
  }
  cfg.n_features = s.fidelity_features;
  cfg.n_reps = s.fidelity_reps;
  cfg.max_rows = s.fidelity_max_rows;
  cfg.seed = s.seed;
  const auto results = data_fidelity_experiment(d, cfg);

  std::string csv = provenance(run) + "dataset,feature,sampler,rep,mmd,data_fidelity,sigma,clamped\n";
  for (const auto& r : results)
    csv += csv_field(r.dataset) + "," + csv_field(r.feature) + "," + r.sampler + "," + std::to_string(r.rep) + "," +
           format_double(r.mmd) + "," + format_double(r.data_fidelity) + "," + format_double(r.sigma) + "," +
           (r.clamped ? "1" : "0") + "\n";
  write_file(run, "fidelity.csv", csv);

  const auto summary = summarize_fidelity(results);
  std::string sum_csv = provenance(run) + "sampler,mean_fidelity,sd_fidelity,mean_rank,count\n";
  std::ostringstream text;
  text << provenance(run);
  char line[160];
  std::snprintf(line, sizeof line, "%-10s %14s %12s %10s %7s\n", "sampler", "mean_fidelity", "sd", "mean_rank",
                "count");
  text << line;
  for (const auto& f : summary) {
    sum_csv += f.sampler + "," + format_double(f.mean_fidelity) + "," + format_double(f.sd_fidelity) + "," +
               format_double(f.mean_rank) + "," + std::to_string(f.count) + "\n";
    std::snprintf(line, sizeof line, "%-10s %14.4f %12.4f %10.3f %7lld\n", f.sampler.c_str(), f.mean_fidelity,
                  f.sd_fidelity, f.mean_rank, static_cast<long long>(f.count));
    text << line;
  }
  write_file(run, "fidelity_summary.csv", sum_csv);
  write_file(run, "fidelity_summary.txt", text.str());
}

Table2Config table2_config(const Settings& s) {
  Table2Config cfg;
  cfg.scenarios.clear();
  for (const auto& n : s.sim_scenarios) cfg.scenarios.push_back(parse_scenario(n));
  cfg.sizes.assign(s.sim_sizes.begin(), s.sim_sizes.end());
  cfg.p_totals.assign(s.sim_p_total.begin(), s.sim_p_total.end());
  cfg.methods.clear();
  for (const auto& n : s.sim_methods) cfg.methods.push_back(parse_table2_method(n));
  cfg.replicates = s.sim_replicates;
  cfg.setting = s.sim_setting;
  cfg.depth = s.max_depth;
  cfg.min_node_size = s.min_node_size;
  cfg.M = s.sim_repetitions;
  cfg.gt_n_eval = s.sim_gt_n_eval;
  cfg.forest_trees = s.sim_forest_trees;
  cfg.impute_trees = s.sim_impute_trees;
  cfg.noise_sd = s.sim_noise_sd;
  cfg.seed = s.seed;
  return cfg;
}

void cmd_simulate(const Run& run) {
  const auto result = run_table2(table2_config(run.s));
  write_file(run, "table2.csv", provenance(run) + result.to_csv());
  write_file(run, "table2.txt", provenance(run) + result.to_text());
}

void cmd_depth_sweep(const Run& run) {
  const auto& s = run.s;
  const auto [train, test] = load_split(s);
  const ModelPtr model = build_model(s, train);
  const Loss loss = loss_of(s);
  std::string csv = provenance(run) + "feature,depth,n_groups,aggregate_cs_pfi,marginal_pfi\n";
  for (Index j : feature_indices(s, train)) {
    const auto entries = depth_sweep(*model, train.drop_target(), test, j, loss, s.sweep_depths, s.repetitions,
                                     derive_seed(s.seed, {kSweepStream, static_cast<std::uint64_t>(j)}),
                                     s.min_node_size);
    for (const auto& e : entries)
      csv += csv_field(train.column(j).name) + "," + std::to_string(e.depth) + "," + std::to_string(e.n_groups) +
             "," + format_double(e.aggregate) + "," + format_double(e.marginal) + "\n";
  }
  write_file(run, "depth_sweep.csv", csv);
}

void cmd_dependence(const Run& run) {
  const auto& s = run.s;
  const Dataset d = load_all(s);
  const auto report = dependence_report(d.has_target() ? d.drop_target() : d, s.seed, s.dependence_trees);
  write_file(run, "dependence.csv", provenance(run) + report.to_csv());
  write_file(run, "dependence.txt", provenance(run) + report.to_text());
}

void print_plan(const Run& run) {
  const auto& s = run.s;
  std::cout << "command: " << run.command << "\n";
  std::cout << "seed: " << s.seed << "\n";
  std::cout << "config: " << hex64(s.config_hash) << "\n";
  if (run.command == "simulate") {
    const auto cfg = table2_config(s);
    std::cout << "replicates: " << cfg.replicates << " setting: " << cfg.setting << " cells: "
              << cfg.scenarios.size() * cfg.sizes.size() * cfg.p_totals.size() * cfg.methods.size() << "\n";
  } else {
    if (s.data.generate)
      std::cout << "data: generated " << *s.data.generate << " (" << s.data.rows << " x " << s.data.columns << ")\n";
    else if (s.data.path)
      std::cout << "data: " << s.data.path->string() << (fs::exists(*s.data.path) ? "" : " (missing)") << "\n";
    else
      std::cout << "data: <none>\n";
    if (run.command == "importance" || run.command == "effects" || run.command == "depth-sweep") {
      std::cout << "model: " << s.model.type << "\n";
      std::cout << "partition: max_depth=" << s.max_depth << " min_node_size=" << s.min_node_size << "\n";
      std::cout << "features: ";
      if (s.features.empty()) std::cout << "all numeric";
      for (std::size_t i = 0; i < s.features.size(); ++i) std::cout << (i ? "," : "") << s.features[i];
      std::cout << "\n";
    }
    if (run.command == "fidelity") {
      std::cout << "samplers: ";
      for (std::size_t i = 0; i < s.fidelity_samplers.size(); ++i)
        std::cout << (i ? "," : "") << s.fidelity_samplers[i];
      std::cout << "\nrepetitions: " << s.fidelity_reps << "\n";
    }
  }
  std::cout << "output: " << run.out.string() << "\n";
}

const std::map<std::string, std::function<void(const Run&)>, std::less<>>& commands() {
  static const std::map<std::string, std::function<void(const Run&)>, std::less<>> table{
      {"importance", cmd_importance}, {"effects", cmd_effects},         {"fidelity", cmd_fidelity},
      {"simulate", cmd_simulate},     {"depth-sweep", cmd_depth_sweep}, {"dependence", cmd_dependence},
  };
  return table;
}

const char* description(std::string_view cmd) {
  if (cmd == "importance") return "marginal and conditional-subgroup permutation feature importance";
  if (cmd == "effects") return "PDP, cs-PDP and ALE curves with SVG plots";
  if (cmd == "fidelity") return "data fidelity experiment (MMD between reference and intervened data)";
  if (cmd == "simulate") return "conditional PFI estimation benchmark on simulated scenarios";
  if (cmd == "depth-sweep") return "cs-PFI across partition depths";
  return "how well each feature is predicted by the others";
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"conditional subgroup feature importance and effects", "condsub"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1, 1);

  std::string config_path;
  std::uint64_t seed = 0;
  unsigned n_jobs = 1;
  std::string out = "condsub-out";
  bool dry_run = false;
  auto* seed_opt = app.add_option("--seed", seed, "root seed (overrides run.seed)");
  app.add_option("--config", config_path, "configuration file");
  app.add_option("--jobs", n_jobs, "worker threads")->check(CLI::Range(1u, 1024u));
  app.add_option("--out", out, "output directory");
  app.add_flag("--dry-run", dry_run, "validate the configuration and print the plan");

  std::string chosen;
  for (const auto& [name, fn] : commands()) {
    auto* sub = app.add_subcommand(name, description(name));
    sub->fallthrough();
    sub->callback([&chosen, n = name] { chosen = n; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    Run run;
    run.command = chosen;
    if (!config_path.empty()) {
      run.s = settings_from(Config::load(config_path));
    } else if (chosen == "simulate") {
      run.s = settings_from(Config::parse(""));
    } else {
      throw ConfigError("--config is required for " + chosen);
    }
    if (seed_opt->count() > 0) run.s.seed = seed;
    run.out = out;
    set_jobs(n_jobs);
    if (dry_run) {
      print_plan(run);
      return 0;
    }
    commands().find(chosen)->second(run);
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "condsub: " << e.what() << "\n";
    return 2;
  } catch (const BridgeError& e) {
    std::cerr << "condsub: model bridge: " << e.what() << "\n";
    return 4;
  } catch (const DataError& e) {
    std::cerr << "condsub: data: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "condsub: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace condsub::cli
