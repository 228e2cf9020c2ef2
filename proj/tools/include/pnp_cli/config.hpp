#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "pnp/cnn.hpp"
#include "pnp/engine.hpp"
#include "pnp/rng.hpp"

namespace pnp::cli {

using nlohmann::json;

// Bad or inconsistent config. line/column are 1-based, 0 when unknown.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& msg, std::size_t line, std::size_t column, std::string pointer);
  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }
  const std::string& pointer() const { return pointer_; }

 private:
  std::size_t line_, column_;
  std::string pointer_;
};

// Raw text kept so semantic errors can point at a line.
struct ConfigSource {
  std::string text;
  std::filesystem::path dir;  // relative paths resolve against this
  json root;
};

ConfigSource parse_config_text(std::string text, std::filesystem::path dir);
ConfigSource load_config(const std::filesystem::path& path);

struct FidelitySpec {
  std::string model = "quadratic";  // quadratic | poisson | qis | mri
  std::optional<std::filesystem::path> truth, observation, mask;
  std::size_t size = 32;  // synthetic truth extent
  double peak = 1.0;
  double noise_sigma = 0.1;  // quadratic and mri
  double gain = 8.0;         // qis
  std::uint32_t oversample = 8;
  double mask_rate = 0.3;
};

struct DenoiserSpec {
  std::string kind = "orthogonal";  // identity | orthogonal | blur | cnn
  double eps = 0.5;
  double lambda = 0.7;
  std::optional<std::filesystem::path> model;
  double sigma = 0.0;
  bool nonnegative = false;
};

struct RunSpec {
  PnPConfig pnp;
  std::string init = "observation";  // observation | zero
  std::optional<double> theory_eps;  // overrides the denoiser's own bound
};

struct TrainSpec {
  CnnShape shape;
  NormMode norm_mode = NormMode::real_sn;
  double lipschitz = 1.0;
  std::size_t patches = 2000;
  std::size_t patch_size = 16;
  std::size_t guard = 16;  // grid for the dense certificate
  TrainConfig train;
};

struct SweepSpec {
  std::vector<double> alphas;
  std::size_t threads = 4;
};

struct HistSpec {
  std::string pairs = "random";  // random | trace
  std::size_t count = 1000;
  std::size_t bins = 40;
  std::optional<double> range;
  std::size_t size = 16, channels = 1;  // random pairs only
  double lo = 0.0, hi = 1.0, spread = 0.1;
};

struct SncheckSpec {
  std::filesystem::path model;
  std::size_t guard = 16;
  std::size_t power_steps = 500;
  double tolerance = 1e-3;
};

struct OracleSpec {
  std::size_t poisson_cases = 1000;
  std::size_t qis_cases = 100;
  std::size_t mri_masks = 10;
  std::size_t kernels = 50;
  std::size_t power_steps = 500;
};

struct ExperimentConfig {
  std::string task;
  RngSeed seed{1};
  json echo;  // parsed document, written back verbatim
  std::optional<FidelitySpec> fidelity;
  std::optional<DenoiserSpec> denoiser;
  std::optional<RunSpec> run;
  std::optional<TrainSpec> train;
  std::optional<SweepSpec> sweep;
  std::optional<HistSpec> hist;
  std::optional<SncheckSpec> sncheck;
  OracleSpec oracle;
};

inline const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"train", "run", "sweep", "hist", "sncheck", "oracle"};
  return c;
}

// Checks the blocks `command` needs; unknown keys are errors.
ExperimentConfig parse_experiment(const ConfigSource& src, const std::string& command);

}  // namespace pnp::cli
