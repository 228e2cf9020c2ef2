#include "pnp_cli/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace pnp::cli {

ConfigError::ConfigError(const std::string& msg, std::size_t line, std::size_t column, std::string pointer)
    : std::runtime_error(msg), line_(line), column_(column), pointer_(std::move(pointer)) {}

namespace {

std::pair<std::size_t, std::size_t> line_col(const std::string& text, std::size_t offset) {
  offset = std::min(offset, text.size());
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset; ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

// Best-effort source position of a JSON pointer: follows each "key": in
// order through the text. Array indices are not resolved.
std::pair<std::size_t, std::size_t> locate(const std::string& text, const std::string& pointer) {
  std::size_t pos = 0;
  bool found = false;
  std::stringstream ss(pointer);
  std::string token;
  while (std::getline(ss, token, '/')) {
    if (token.empty() || std::all_of(token.begin(), token.end(), [](unsigned char c) { return std::isdigit(c); }))
      continue;
    const std::string quoted = "\"" + token + "\"";
    for (std::size_t at = text.find(quoted, pos); at != std::string::npos; at = text.find(quoted, at + 1)) {
      std::size_t k = at + quoted.size();
      while (k < text.size() && std::isspace(static_cast<unsigned char>(text[k]))) ++k;
      if (k < text.size() && text[k] == ':') {
        pos = at;
        found = true;
        break;
      }
    }
  }
  if (!found) return {0, 0};
  return line_col(text, pos);
}

class Block {
 public:
  Block(const ConfigSource& src, const json& j, std::string ptr) : src_(src), j_(j), ptr_(std::move(ptr)) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    const std::string where = key.empty() ? (ptr_.empty() ? "/" : ptr_) : ptr_ + "/" + key;
    const auto [line, col] = locate(src_.text, where);
    throw ConfigError(where + ": " + msg, line, col, where);
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <class T>
  std::optional<T> opt(const char* key) {
    used_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return convert<T>(key, j_.at(key));
  }

  template <class T>
  T get(const char* key, T fallback) {
    auto v = opt<T>(key);
    return v ? *v : fallback;
  }

  template <class T>
  T req(const char* key) {
    auto v = opt<T>(key);
    if (!v) fail(key, "required");
    return *v;
  }

  double positive(const char* key, double fallback) {
    const double v = get<double>(key, fallback);
    if (!(v > 0.0)) fail(key, "must be positive");
    return v;
  }

  double nonnegative(const char* key, double fallback) {
    const double v = get<double>(key, fallback);
    if (!(v >= 0.0)) fail(key, "must be nonnegative");
    return v;
  }

  std::size_t count(const char* key, std::size_t fallback, std::size_t min = 1) {
    const std::size_t v = get<std::size_t>(key, fallback);
    if (v < min) fail(key, "must be at least " + std::to_string(min));
    return v;
  }

  std::string choice(const char* key, std::string fallback, std::initializer_list<const char*> allowed) {
    const std::string v = get<std::string>(key, fallback);
    for (const char* a : allowed)
      if (v == a) return v;
    std::string list;
    for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
    fail(key, "'" + v + "' is not one of " + list);
  }

  // Relative to the config file; must exist.
  std::optional<std::filesystem::path> existing_path(const char* key) {
    auto s = opt<std::string>(key);
    if (!s) return std::nullopt;
    std::filesystem::path p(*s);
    if (p.is_relative()) p = src_.dir / p;
    if (!std::filesystem::exists(p)) fail(key, "file not found: " + p.string());
    return p;
  }

  std::optional<Block> child(const char* key) {
    used_.insert(key);
    if (!j_.contains(key)) return std::nullopt;
    return Block(src_, j_.at(key), ptr_ + "/" + key);
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!used_.count(k)) fail(k, "unknown key");
  }

 private:
  template <class T>
  T convert(const char* key, const json& v) const {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) fail(key, "expected true or false");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) fail(key, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) fail(key, "expected a number");
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, std::size_t> || std::is_same_v<T, std::uint64_t> ||
                         std::is_same_v<T, std::uint32_t>) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        fail(key, "expected a nonnegative integer");
      const auto u = v.get<std::uint64_t>();
      if (u > std::numeric_limits<T>::max()) fail(key, "out of range");
      return static_cast<T>(u);
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (!v.is_array()) fail(key, "expected an array of numbers");
      std::vector<double> out;
      for (const auto& e : v) {
        if (!e.is_number()) fail(key, "expected an array of numbers");
        out.push_back(e.get<double>());
      }
      return out;
    } else {
      static_assert(sizeof(T) == 0, "unsupported config type");
    }
  }

  const ConfigSource& src_;
  const json& j_;
  std::string ptr_;
  std::set<std::string> used_;
};

FidelitySpec parse_fidelity(Block b) {
  FidelitySpec s;
  s.model = b.choice("model", s.model, {"quadratic", "poisson", "qis", "mri"});
  s.truth = b.existing_path("truth");
  s.observation = b.existing_path("observation");
  s.mask = b.existing_path("mask");
  s.size = b.count("size", s.size);
  s.peak = b.positive("peak", s.peak);
  s.noise_sigma = b.nonnegative("noise_sigma", s.noise_sigma);
  s.gain = b.positive("gain", s.gain);
  s.oversample = b.get<std::uint32_t>("oversample", s.oversample);
  if (s.oversample == 0) b.fail("oversample", "must be at least 1");
  s.mask_rate = b.get<double>("mask_rate", s.mask_rate);
  if (!(s.mask_rate > 0.0 && s.mask_rate <= 1.0)) b.fail("mask_rate", "must lie in (0, 1]");
  if (s.mask && s.model != "mri") b.fail("mask", "only used by the mri model");
  if (s.observation && s.model == "mri") b.fail("observation", "mri observations are simulated from the truth");
  b.finish();
  return s;
}

DenoiserSpec parse_denoiser(Block b) {
  DenoiserSpec s;
  s.kind = b.choice("kind", s.kind, {"identity", "orthogonal", "blur", "cnn"});
  s.eps = b.nonnegative("eps", s.eps);
  s.lambda = b.get<double>("lambda", s.lambda);
  if (!(s.lambda >= 0.0 && s.lambda <= 1.0)) b.fail("lambda", "must lie in [0, 1]");
  s.model = b.existing_path("model");
  s.sigma = b.nonnegative("sigma", s.sigma);
  s.nonnegative = b.get<bool>("nonnegative", s.nonnegative);
  if (s.kind == "cnn" && !s.model) b.fail("model", "required for kind 'cnn'");
  if (s.kind != "cnn" && s.model) b.fail("model", "only used by kind 'cnn'");
  b.finish();
  return s;
}

RunSpec parse_run(Block b) {
  RunSpec s;
  try {
    s.pnp.method = method_from_string(b.get<std::string>("method", "admm"));
  } catch (const std::domain_error&) {
    b.fail("method", "expected fbs, admm or drs");
  }
  s.pnp.alpha = b.positive("alpha", s.pnp.alpha);
  s.pnp.max_iter = b.count("max_iter", s.pnp.max_iter);
  s.pnp.tol = b.nonnegative("tol", s.pnp.tol);
  s.pnp.record_every = b.count("record_every", s.pnp.record_every);
  s.init = b.choice("init", s.init, {"observation", "zero"});
  s.theory_eps = b.opt<double>("theory_eps");
  if (s.theory_eps && !(*s.theory_eps >= 0.0)) b.fail("theory_eps", "must be nonnegative");
  b.finish();
  return s;
}

TrainSpec parse_train(Block b) {
  TrainSpec s;
  s.norm_mode = [&] {
    const std::string v = b.choice("norm_mode", "real_sn", {"none", "real_sn", "reshape_sn"});
    return norm_mode_from_string(v);
  }();
  s.shape.image_channels = b.count("channels", s.shape.image_channels);
  s.shape.depth = b.count("depth", s.shape.depth);
  s.shape.hidden = b.count("hidden", s.shape.hidden);
  s.shape.kernel = b.count("kernel", s.shape.kernel);
  if (s.shape.kernel % 2 == 0) b.fail("kernel", "must be odd");
  s.lipschitz = b.positive("lipschitz", s.lipschitz);
  s.patches = b.count("patches", s.patches);
  s.patch_size = b.count("patch_size", s.patch_size);
  s.guard = b.count("guard", s.patch_size);
  s.train.epochs = b.count("epochs", s.train.epochs, 0);
  s.train.batch_size = b.count("batch_size", s.train.batch_size);
  s.train.lr = b.positive("lr", s.train.lr);
  s.train.lr_late = b.positive("lr_late", s.train.lr_late);
  s.train.noise_sigma = b.nonnegative("noise_sigma", s.train.noise_sigma);
  s.train.project = b.get<bool>("project", s.train.project);
  s.train.final_power_steps = b.count("final_power_steps", s.train.final_power_steps, 0);
  b.finish();
  return s;
}

SweepSpec parse_sweep(Block b) {
  SweepSpec s;
  if (b.has("alphas") && b.has("grid")) b.fail("grid", "give either alphas or grid, not both");
  if (auto a = b.opt<std::vector<double>>("alphas")) {
    s.alphas = *a;
  } else if (auto g = b.child("grid")) {
    const double from = g->positive("from", 0.0), to = g->positive("to", 0.0);
    const std::size_t n = g->count("count", 0);
    if (!(to >= from)) g->fail("to", "must not be below 'from'");
    if (n == 1 && to != from) g->fail("count", "a single point needs from == to");
    g->finish();
    for (std::size_t i = 0; i < n; ++i) s.alphas.push_back(n == 1 ? from : from + (to - from) * i / double(n - 1));
  }
  if (s.alphas.empty()) b.fail("alphas", "grid is empty");
  for (double a : s.alphas)
    if (!(a > 0.0)) b.fail("alphas", "step sizes must be positive");
  s.threads = b.count("threads", s.threads);
  b.finish();
  return s;
}

HistSpec parse_hist(Block b) {
  HistSpec s;
  s.pairs = b.choice("pairs", s.pairs, {"random", "trace"});
  s.count = b.count("count", s.count);
  s.bins = b.count("bins", s.bins);
  s.range = b.opt<double>("range");
  if (s.range && !(*s.range > 0.0)) b.fail("range", "must be positive");
  s.size = b.count("size", s.size);
  s.channels = b.count("channels", s.channels);
  s.lo = b.get<double>("lo", s.lo);
  s.hi = b.get<double>("hi", s.hi);
  if (!(s.hi > s.lo)) b.fail("hi", "must exceed 'lo'");
  s.spread = b.nonnegative("spread", s.spread);
  b.finish();
  return s;
}

SncheckSpec parse_sncheck(Block b) {
  SncheckSpec s;
  auto p = b.existing_path("model");
  if (!p) b.fail("model", "required");
  s.model = *p;
  s.guard = b.count("guard", s.guard);
  s.power_steps = b.count("power_steps", s.power_steps);
  s.tolerance = b.nonnegative("tolerance", s.tolerance);
  b.finish();
  return s;
}

OracleSpec parse_oracle(Block b) {
  OracleSpec s;
  s.poisson_cases = b.count("poisson_cases", s.poisson_cases);
  s.qis_cases = b.count("qis_cases", s.qis_cases);
  s.mri_masks = b.count("mri_masks", s.mri_masks);
  s.kernels = b.count("kernels", s.kernels);
  s.power_steps = b.count("power_steps", s.power_steps);
  b.finish();
  return s;
}

}  // namespace

ConfigSource parse_config_text(std::string text, std::filesystem::path dir) {
  ConfigSource src;
  src.text = std::move(text);
  src.dir = std::move(dir);
  try {
    src.root = json::parse(src.text);
  } catch (const json::parse_error& e) {
    // e.byte is 1-based and points just past the offending character.
    const auto [line, col] = line_col(src.text, e.byte > 0 ? e.byte - 1 : 0);
    std::string what = e.what();
    if (auto at = what.find("syntax error"); at != std::string::npos) what = what.substr(at);
    throw ConfigError("invalid JSON: " + what, line, col, "");
  }
  if (!src.root.is_object()) throw ConfigError("top level must be a JSON object", 1, 1, "");
  return src;
}

ConfigSource load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string(), 0, 0, "");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), path.has_parent_path() ? path.parent_path() : std::filesystem::path("."));
}

ExperimentConfig parse_experiment(const ConfigSource& src, const std::string& command) {
  if (std::find(commands().begin(), commands().end(), command) == commands().end())
    throw ConfigError("unknown command '" + command + "'", 0, 0, "");
  ExperimentConfig cfg;
  cfg.echo = src.root;
  Block root(src, src.root, "");
  cfg.task = root.get<std::string>("task", command);
  if (cfg.task != command) root.fail("task", "config is for '" + cfg.task + "', not '" + command + "'");
  cfg.seed = RngSeed{root.get<std::uint64_t>("seed", 1)};

  const bool needs_problem = command == "run" || command == "sweep";
  auto need = [&](const char* key, bool required) -> std::optional<Block> {
    auto b = root.child(key);
    if (!b && required) root.fail(key, std::string("block required by '") + command + "'");
    return b;
  };
  if (auto b = need("fidelity", needs_problem)) cfg.fidelity = parse_fidelity(std::move(*b));
  if (auto b = need("denoiser", needs_problem || command == "hist")) cfg.denoiser = parse_denoiser(std::move(*b));
  if (auto b = need("pnp", needs_problem)) cfg.run = parse_run(std::move(*b));
  if (auto b = need("train", command == "train")) cfg.train = parse_train(std::move(*b));
  if (auto b = need("sweep", command == "sweep")) cfg.sweep = parse_sweep(std::move(*b));
  if (auto b = need("hist", false)) cfg.hist = parse_hist(std::move(*b));
  if (auto b = need("sncheck", command == "sncheck")) cfg.sncheck = parse_sncheck(std::move(*b));
  if (auto b = need("oracle", false)) cfg.oracle = parse_oracle(std::move(*b));
  root.finish();

  if (command == "hist") {
    if (!cfg.hist) cfg.hist = HistSpec{};
    if (cfg.hist->pairs == "trace" && (!cfg.fidelity || !cfg.run))
      throw ConfigError("/hist/pairs: 'trace' needs fidelity and pnp blocks", locate(src.text, "/hist/pairs").first,
                        locate(src.text, "/hist/pairs").second, "/hist/pairs");
  }
  return cfg;
}

}  // namespace pnp::cli
