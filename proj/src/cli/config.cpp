#include "condsub/cli.hpp"

#include "condsub/samplers.hpp"
#include "condsub/simulation.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

namespace condsub::cli {

namespace {

const std::map<std::string, std::set<std::string>, std::less<>>& known_keys() {
  static const std::map<std::string, std::set<std::string>, std::less<>> keys{
      {"run", {"seed"}},
      {"data", {"path", "test_path", "schema", "target", "train_fraction", "generate", "rows", "columns"}},
      {"model", {"type", "trees", "k", "command", "timeout"}},
      {"partition", {"max_depth", "min_node_size"}},
      {"analysis", {"features", "repetitions", "loss"}},
      {"effects", {"grid_size", "intervals"}},
      {"fidelity", {"samplers", "n_features", "repetitions", "max_rows", "impute_trees"}},
      {"simulate",
       {"scenarios", "sizes", "p_total", "replicates", "methods", "setting", "repetitions", "gt_n_eval",
        "forest_trees", "impute_trees", "noise_sd"}},
      {"depth_sweep", {"depths"}},
      {"dependence", {"trees"}},
  };
  return keys;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  while (true) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    if (!item.empty()) out.emplace_back(item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

template <typename T>
T parse_number(std::string_view text, std::size_t line, std::string_view what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty())
    throw ConfigError(std::string(what) + ": '" + std::string(text) + "' is not a valid number", line);
  return value;
}

class Reader {
 public:
  explicit Reader(const Config& c) : c_(c) {}

  template <typename T>
  void integer(std::string_view section, std::string_view key, T& out, long long lo, long long hi) {
    if (const auto* e = c_.find(section, key)) {
      const auto v = parse_number<long long>(trim(e->value), e->line, name(section, key));
      if (v < lo || v > hi)
        throw ConfigError(name(section, key) + " must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]",
                          e->line);
      out = static_cast<T>(v);
    }
  }

  void real(std::string_view section, std::string_view key, double& out, double lo, double hi, bool open_lo = false) {
    if (const auto* e = c_.find(section, key)) {
      const auto v = parse_number<double>(trim(e->value), e->line, name(section, key));
      if (!(open_lo ? v > lo : v >= lo) || !(v <= hi))
        throw ConfigError(name(section, key) + " is out of range", e->line);
      out = v;
    }
  }

  void text(std::string_view section, std::string_view key, std::string& out) {
    if (const auto* e = c_.find(section, key)) out = e->value;
  }

  void text(std::string_view section, std::string_view key, std::optional<std::string>& out) {
    if (const auto* e = c_.find(section, key)) out = e->value;
  }

  void path(std::string_view section, std::string_view key, std::optional<std::filesystem::path>& out) {
    if (const auto* e = c_.find(section, key)) {
      if (e->value.empty()) throw ConfigError(name(section, key) + " is empty", e->line);
      std::filesystem::path p(e->value);
      out = p.is_absolute() ? p : c_.base_dir() / p;
    }
  }

  void list(std::string_view section, std::string_view key, std::vector<std::string>& out) {
    if (const auto* e = c_.find(section, key)) {
      out = split_list(e->value);
      if (out.empty()) throw ConfigError(name(section, key) + " is an empty list", e->line);
    }
  }

  template <typename T>
  void int_list(std::string_view section, std::string_view key, std::vector<T>& out, long long lo, long long hi) {
    if (const auto* e = c_.find(section, key)) {
      out.clear();
      for (const auto& item : split_list(e->value)) {
        const auto v = parse_number<long long>(item, e->line, name(section, key));
        if (v < lo || v > hi) throw ConfigError(name(section, key) + " entry " + item + " is out of range", e->line);
        out.push_back(static_cast<T>(v));
      }
      if (out.empty()) throw ConfigError(name(section, key) + " is an empty list", e->line);
    }
  }

  std::size_t line(std::string_view section, std::string_view key) const {
    const auto* e = c_.find(section, key);
    return e ? e->line : 0;
  }

 private:
  static std::string name(std::string_view section, std::string_view key) {
    return std::string(section) + "." + std::string(key);
  }

  const Config& c_;
};

template <typename Parse>
void check_names(const Reader& r, std::string_view section, std::string_view key, const std::vector<std::string>& names,
                 Parse parse) {
  for (const auto& n : names) {
    try {
      parse(n);
    } catch (const Error& e) {
      throw ConfigError(std::string(section) + "." + std::string(key) + ": " + e.what(), r.line(section, key));
    }
  }
}

}  // namespace

std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Config Config::parse(std::string_view text, std::filesystem::path base_dir) {
  Config c;
  c.base_dir_ = std::move(base_dir);
  c.hash_ = fnv1a(text);
  std::string section;
  std::size_t line_no = 0;
  std::string_view rest = text;
  while (!rest.empty()) {
    ++line_no;
    const auto nl = rest.find('\n');
    const auto line = trim(rest.substr(0, nl));
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;

    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("unterminated section header", line_no);
      section = std::string(trim(line.substr(1, line.size() - 2)));
      if (!known_keys().contains(section)) throw ConfigError("unknown section [" + section + "]", line_no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError("expected key = value", line_no);
    const std::string key(trim(line.substr(0, eq)));
    const std::string value(trim(line.substr(eq + 1)));
    if (section.empty()) throw ConfigError("key '" + key + "' outside of any section", line_no);
    const auto& allowed = known_keys().find(section)->second;
    if (!allowed.contains(key)) throw ConfigError("unknown key '" + key + "' in [" + section + "]", line_no);
    auto& entries = c.sections_[section];
    if (entries.contains(key)) throw ConfigError("duplicate key '" + key + "' in [" + section + "]", line_no);
    entries.emplace(key, Entry{value, line_no});
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse(ss.str(), path.parent_path());
}

const Config::Entry* Config::find(std::string_view section, std::string_view key) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return nullptr;
  const auto k = s->second.find(key);
  return k == s->second.end() ? nullptr : &k->second;
}

Settings settings_from(const Config& config) {
  constexpr long long kBig = 1LL << 40;
  Settings s;
  s.config_hash = config.hash();
  Reader r(config);

  if (const auto* e = config.find("run", "seed")) s.seed = parse_number<std::uint64_t>(trim(e->value), e->line, "run.seed");

  r.path("data", "path", s.data.path);
  r.path("data", "test_path", s.data.test_path);
  r.path("data", "schema", s.data.schema);
  r.text("data", "target", s.data.target);
  r.real("data", "train_fraction", s.data.train_fraction, 0.0, 1.0, true);
  if (s.data.train_fraction >= 1.0 && !s.data.test_path)
    throw ConfigError("data.train_fraction must be below 1 without data.test_path", r.line("data", "train_fraction"));
  r.text("data", "generate", s.data.generate);
  if (s.data.generate) {
    static const std::set<std::string, std::less<>> generators{"dependent", "independent", "linear", "nonlinear",
                                                              "multi_linear"};
    if (!generators.contains(*s.data.generate))
      throw ConfigError("data.generate must be one of dependent, independent, linear, nonlinear, multi_linear",
                        r.line("data", "generate"));
    if (s.data.path) throw ConfigError("data.generate and data.path are exclusive", r.line("data", "generate"));
  }
  r.integer("data", "rows", s.data.rows, 2, kBig);
  r.integer("data", "columns", s.data.columns, 2, 100000);

  r.text("model", "type", s.model.type);
  if (s.model.type != "forest" && s.model.type != "ols" && s.model.type != "knn" && s.model.type != "external" &&
      s.model.type != "truth")
    throw ConfigError("model.type must be forest, ols, knn, external or truth", r.line("model", "type"));
  r.integer("model", "trees", s.model.trees, 1, 100000);
  r.integer("model", "k", s.model.k, 1, kBig);
  r.text("model", "command", s.model.command);
  r.real("model", "timeout", s.model.timeout, 0.0, 1e6, true);
  if (s.model.type == "external" && s.model.command.empty())
    throw ConfigError("model.type = external needs model.command", r.line("model", "type"));
  if (s.model.type == "truth" && (!s.data.generate || *s.data.generate == "dependent"))
    throw ConfigError("model.type = truth needs data.generate set to a scenario", r.line("model", "type"));

  r.integer("partition", "max_depth", s.max_depth, 0, 1000);
  r.integer("partition", "min_node_size", s.min_node_size, 1, kBig);

  r.list("analysis", "features", s.features);
  r.integer("analysis", "repetitions", s.repetitions, 1, 100000);
  r.text("analysis", "loss", s.loss);
  if (s.loss != "mse" && s.loss != "squared_error" && s.loss != "mmce" && s.loss != "misclassification")
    throw ConfigError("analysis.loss must be mse or mmce", r.line("analysis", "loss"));

  r.integer("effects", "grid_size", s.grid_size, 2, 100000);
  r.integer("effects", "intervals", s.intervals, 1, 100000);

  r.list("fidelity", "samplers", s.fidelity_samplers);
  r.integer("fidelity", "n_features", s.fidelity_features, 1, 100000);
  r.integer("fidelity", "repetitions", s.fidelity_reps, 1, 100000);
  r.integer("fidelity", "max_rows", s.fidelity_max_rows, 10, kBig);
  r.integer("fidelity", "impute_trees", s.fidelity_impute_trees, 1, 100000);
  check_names(r, "fidelity", "samplers", s.fidelity_samplers, [](const std::string& v) { SamplerSpec::parse(v); });

  r.list("simulate", "scenarios", s.sim_scenarios);
  r.int_list("simulate", "sizes", s.sim_sizes, 10, kBig);
  r.int_list("simulate", "p_total", s.sim_p_total, 10, 100000);
  r.list("simulate", "methods", s.sim_methods);
  check_names(r, "simulate", "scenarios", s.sim_scenarios, [](const std::string& v) { parse_scenario(v); });
  check_names(r, "simulate", "methods", s.sim_methods, [](const std::string& v) { parse_table2_method(v); });
  r.integer("simulate", "replicates", s.sim_replicates, 1, 1000000);
  r.integer("simulate", "setting", s.sim_setting, 1, 2);
  r.integer("simulate", "repetitions", s.sim_repetitions, 1, 100000);
  r.integer("simulate", "gt_n_eval", s.sim_gt_n_eval, 1, kBig);
  r.integer("simulate", "forest_trees", s.sim_forest_trees, 1, 100000);
  r.integer("simulate", "impute_trees", s.sim_impute_trees, 1, 100000);
  r.real("simulate", "noise_sd", s.sim_noise_sd, 0.0, 1e12);

  r.int_list("depth_sweep", "depths", s.sweep_depths, 0, 1000);

  r.integer("dependence", "trees", s.dependence_trees, 1, 100000);
  return s;
}

}  // namespace condsub::cli
