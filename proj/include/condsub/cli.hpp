#pragma once

#include "condsub/error.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace condsub::cli {

/// Invalid configuration. `line` is 1-based, 0 when not tied to a line.
class ConfigError : public Error {
 public:
  ConfigError(const std::string& message, std::size_t line = 0)
      : Error(line ? "config line " + std::to_string(line) + ": " + message : "config: " + message), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Flat `key = value` file with `[section]` headers. Blank lines and lines
/// starting with '#' or ';' are ignored. Only known section/key pairs are
/// accepted.
class Config {
 public:
  struct Entry {
    std::string value;
    std::size_t line = 0;
  };

  static Config parse(std::string_view text, std::filesystem::path base_dir = {});
  static Config load(const std::filesystem::path& path);

  const Entry* find(std::string_view section, std::string_view key) const;
  /// 64-bit FNV-1a of the raw text.
  std::uint64_t hash() const { return hash_; }
  const std::filesystem::path& base_dir() const { return base_dir_; }

 private:
  std::map<std::string, std::map<std::string, Entry, std::less<>>, std::less<>> sections_;
  std::filesystem::path base_dir_;
  std::uint64_t hash_ = 0;
};

std::uint64_t fnv1a(std::string_view text);

struct DataSettings {
  std::optional<std::filesystem::path> path;
  std::optional<std::filesystem::path> test_path;
  std::optional<std::filesystem::path> schema;
  std::optional<std::string> target;
  double train_fraction = 0.7;
  /// "dependent" or a scenario name; used when no path is given.
  std::optional<std::string> generate;
  std::int64_t rows = 2000;
  std::int64_t columns = 10;
};

struct ModelSettings {
  std::string type = "forest";
  std::int64_t trees = 100;
  std::int64_t k = 10;
  std::string command;
  double timeout = 60.0;
};

/// Every value of a config file, parsed and range checked.
struct Settings {
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;
  DataSettings data;
  ModelSettings model;
  int max_depth = 30;
  std::int64_t min_node_size = 30;
  std::vector<std::string> features;
  std::int64_t repetitions = 5;
  std::string loss = "mse";
  std::int64_t grid_size = 20;
  std::int64_t intervals = 20;

  std::vector<std::string> fidelity_samplers{"none", "perm", "cs1", "cs30", "impute", "ale"};
  std::int64_t fidelity_features = 10;
  std::int64_t fidelity_reps = 10;
  std::int64_t fidelity_max_rows = 10000;
  std::int64_t fidelity_impute_trees = 100;

  std::vector<std::string> sim_scenarios{"independent", "linear", "nonlinear", "multi_linear"};
  std::vector<std::int64_t> sim_sizes{3000};
  std::vector<std::int64_t> sim_p_total{10};
  std::vector<std::string> sim_methods{"cs_pfi_cart", "impute_rf", "marginal_pfi"};
  std::int64_t sim_replicates = 50;
  int sim_setting = 1;
  std::int64_t sim_repetitions = 5;
  std::int64_t sim_gt_n_eval = 1000000;
  std::int64_t sim_forest_trees = 100;
  std::int64_t sim_impute_trees = 100;
  double sim_noise_sd = 1.0;

  std::vector<int> sweep_depths{0, 1, 2, 3, 4, 5, 30};
  std::int64_t dependence_trees = 100;
};

Settings settings_from(const Config& config);

/// Entry point of the `condsub` executable. Returns the process exit code:
/// 0 success, 1 other failure, 2 configuration, 3 data, 4 model bridge.
int run(int argc, const char* const* argv);

}  // namespace condsub::cli
