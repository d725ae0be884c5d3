#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "dualmc/calibration.hpp"
#include "dualmc/orchestrator.hpp"
#include "dualmc/policy.hpp"
#include "dualmc/synthetic.hpp"

namespace dualmc {

struct BackendSettings {
  std::string kind = "reference";  // reference | remote
  std::string endpoint = "http://127.0.0.1:8765/score";
  std::size_t timeout_ms = 5000;
  std::size_t max_in_flight = 4;
  double smoothing = 0.01;
};

struct RunSettings {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::size_t test_records = 300;  // synthetic test split size
};

// Every tunable of a run. Defaults match the dxy preset; gmd and cmd switch
// to their own values.
struct Config {
  CalibrationConfig calibration{};
  std::size_t adapter_rank = 16;
  PolicyConfig network{};
  TrainingConfig training{};
  ConsultationConfig consultation{};
  BackendSettings backend{};
  RunSettings run{};
  WorldParams world{};

  // Preset by dataset name: dxy, gmd, cmd, synthetic. Throws UsageError.
  static Config preset(const std::string& dataset);

  // Flattened "section.key" -> value pairs in a fixed order.
  std::vector<std::pair<std::string, std::string>> entries() const;
  // Applies one "section.key" assignment. Throws InvalidConfig for unknown
  // keys or values that do not parse.
  void set(const std::string& key, const std::string& value);
  // FNV-1a over entries(), as 16 hex digits.
  std::string hash() const;
  std::string to_ini() const;
};

// Reads an INI file on top of `base`. Throws IoError / ParseError / InvalidConfig.
Config load_config(const std::filesystem::path& path, Config base = {});
void save_config(const std::filesystem::path& path, const Config& config);

// "section.key=value" override.
void apply_override(Config& config, const std::string& assignment);

}  // namespace dualmc
