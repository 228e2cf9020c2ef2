#include "pnp_cli/commands.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <thread>

#include "CLI11.hpp"

#include "pnp/cnn.hpp"
#include "pnp/conv.hpp"
#include "pnp/errors.hpp"
#include "pnp/oracle.hpp"
#include "pnp/theory.hpp"
#include "pnp_cli/config.hpp"
#include "pnp_cli/problem.hpp"

namespace pnp::cli {

namespace fs = std::filesystem;

namespace {

// Thrown once outputs are written, to turn a failed check into exit 4.
struct CertificateFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

json jnum(const std::optional<double>& v) {
  if (!v || !std::isfinite(*v)) return nullptr;
  return *v;
}

std::ofstream open_out(const fs::path& p) {
  std::ofstream f(p, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + p.string());
  return f;
}

json formats() {
  return {{"PNPF", 1}, {"PNPK", 1}, {"PNPM", 1}, {"csv", 1}, {"summary", 1}};
}

struct Context {
  const Invocation& inv;
  ExperimentConfig cfg;
  fs::path out;
  json result = json::object();
};

void write_summary(const Context& ctx, const std::string& status, double seconds) {
  json s;
  s["command"] = ctx.inv.command;
  s["status"] = status;
  s["seed"] = ctx.cfg.seed.value;
  s["config"] = ctx.cfg.echo;
  s["formats"] = formats();
  s["result"] = ctx.result;
  s["runtime_seconds"] = seconds;
  open_out(ctx.out / "summary.json") << s.dump(2) << '\n';
}

void write_images(const fs::path& dir, const std::string& stem, const Tensor& t, double peak) {
  save_image(dir / (stem + ".pnpf"), t);
  save_pgm(dir / (stem + ".pgm"), t, peak);
}

void write_trace_csv(const fs::path& p, const IterTrace& tr) {
  std::ofstream f = open_out(p);
  f << "iteration,displacement,ratio,residual,psnr\n";
  for (const auto& r : tr.rows)
    f << r.iteration << ',' << num(r.displacement) << ',' << num(r.ratio) << ',' << num(r.residual) << ','
      << num(r.psnr) << '\n';
}

json theory_json(const std::optional<TheoryBounds>& b) {
  if (!b) return nullptr;
  json j{{"delta", b->delta}, {"feasible", b->feasible}, {"contractive", b->contractive()}};
  if (b->alpha_range) {
    j["alpha_range"] = {{"lo", b->alpha_range->lo}, {"hi", jnum(b->alpha_range->hi)}};
  } else {
    j["alpha_range"] = nullptr;
  }
  return j;
}

std::optional<ContractionStats> try_stats(const IterTrace& tr) {
  try {
    return contraction_stats(tr);
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

std::optional<double> max_ratio(const IterTrace& tr) {
  std::optional<double> m;
  for (const auto& r : tr.rows)
    if (r.ratio) m = std::max(m.value_or(0.0), *r.ratio);
  return m;
}

std::optional<double> theory_eps(const ExperimentConfig& cfg, const Denoiser& d) {
  return cfg.run->theory_eps ? cfg.run->theory_eps : d.eps_bound();
}

// ------------------------------------------------------------------- run

void cmd_run(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const Problem p = build_problem(*cfg.fidelity, cfg.seed);
  const DenoiserPtr d = build_denoiser(*cfg.denoiser, p.truth.shape());
  PnPConfig pc = cfg.run->pnp;
  pc.psnr_peak = p.peak;
  pc.keep_iterates = false;
  const IterTrace tr = run(*p.f, *d, pc, initial_point(p, *cfg.run), p.truth);

  write_trace_csv(ctx.out / "trace.csv", tr);
  write_images(ctx.out, "truth", p.truth, p.peak);
  write_images(ctx.out, "observation", p.observation, cfg.fidelity->model == "qis" ? cfg.fidelity->oversample : p.peak);
  write_images(ctx.out, "reconstruction", tr.final_iterate, p.peak);
  if (p.mask) save_mask(ctx.out / "mask.pnpf", *p.mask);

  const double in_psnr = psnr(p.estimate, p.truth, p.peak);
  const double out_psnr = psnr(tr.final_iterate, p.truth, p.peak);
  const auto stats = try_stats(tr);
  auto& r = ctx.result;
  r["fidelity"] = p.f->name();
  r["denoiser"] = d->name();
  r["method"] = to_string(pc.method);
  r["alpha"] = pc.alpha;
  r["run_status"] = to_string(tr.status);
  r["message"] = tr.message;
  r["iterations"] = tr.iterations;
  r["iterations_to_tol"] = tr.converged() ? json(tr.iterations) : json(nullptr);
  r["final_residual"] = tr.final_residual();
  r["psnr_input"] = in_psnr;
  r["psnr_final"] = out_psnr;
  r["psnr_gain"] = out_psnr - in_psnr;
  r["eps"] = jnum(theory_eps(cfg, *d));
  r["theory"] = theory_json(theory_for(pc.method, *p.f, theory_eps(cfg, *d), pc.alpha));
  r["geometric_mean_ratio"] = stats ? jnum(stats->geometric_mean) : json(nullptr);
  r["max_ratio"] = jnum(max_ratio(tr));
  if (tr.status == RunStatus::failed) throw NumericalError(tr.message);
}

// ------------------------------------------------------------------- sweep

struct SweepRow {
  double alpha = 0.0;
  std::string status, message;
  std::size_t iterations = 0;
  double final_residual = 0.0;
  std::optional<double> geo, max;
  std::optional<TheoryBounds> theory;
  std::string check = "n/a";
};

// Bounded pool: at most `threads` workers pull indices until the work runs out.
void parallel_for(std::size_t n, std::size_t threads, const std::function<void(std::size_t)>& body) {
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) body(i);
  };
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(threads, n); ++t) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

void cmd_sweep(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const Problem p = build_problem(*cfg.fidelity, cfg.seed);
  const DenoiserPtr d = build_denoiser(*cfg.denoiser, p.truth.shape());
  const Tensor init = initial_point(p, *cfg.run);
  const auto& alphas = cfg.sweep->alphas;
  std::vector<SweepRow> rows(alphas.size());

  parallel_for(alphas.size(), cfg.sweep->threads, [&](std::size_t i) {
    SweepRow& row = rows[i];
    row.alpha = alphas[i];
    PnPConfig pc = cfg.run->pnp;
    pc.alpha = alphas[i];
    pc.psnr_peak = p.peak;
    pc.keep_iterates = false;
    try {
      const IterTrace tr = run(*p.f, *d, pc, init, p.truth);
      row.status = to_string(tr.status);
      row.message = tr.message;
      row.iterations = tr.iterations;
      row.final_residual = tr.final_residual();
      if (auto s = try_stats(tr); s && !s->degenerate) row.geo = s->geometric_mean;
      row.max = max_ratio(tr);
    } catch (const std::exception& e) {
      row.status = "failed";
      row.message = e.what();
    }
    row.theory = theory_for(pc.method, *p.f, theory_eps(cfg, *d), pc.alpha);
    if (row.theory && row.theory->contractive() && row.geo)
      row.check = *row.geo <= row.theory->delta + 1e-9 ? "pass" : "fail";
  });

  std::ofstream f = open_out(ctx.out / "sweep.csv");
  f << "alpha,status,iterations,final_residual,geo_mean_ratio,max_ratio,theory_delta,theory_contractive,bound_check\n";
  std::size_t failed = 0, violated = 0;
  json jrows = json::array();
  for (const auto& r : rows) {
    f << num(r.alpha) << ',' << r.status << ',' << r.iterations << ',' << num(r.final_residual) << ',' << num(r.geo)
      << ',' << num(r.max) << ',' << (r.theory ? num(r.theory->delta) : "") << ','
      << (r.theory ? (r.theory->contractive() ? "true" : "false") : "") << ',' << r.check << '\n';
    failed += r.status == "failed";
    violated += r.check == "fail";
    jrows.push_back({{"alpha", r.alpha}, {"status", r.status}, {"message", r.message}, {"check", r.check}});
  }
  ctx.result["rows"] = jrows;
  ctx.result["failed_runs"] = failed;
  ctx.result["bound_violations"] = violated;
  if (violated) throw CertificateFailure(std::to_string(violated) + " sweep rows exceed the theoretical bound");
  if (failed) throw NumericalError(std::to_string(failed) + " sweep runs failed");
}

// ------------------------------------------------------------------- hist

void cmd_hist(Context& ctx) {
  const auto& cfg = ctx.cfg;
  const HistSpec& h = *cfg.hist;
  std::vector<TensorPair> pairs;
  DenoiserPtr d;
  PairScheme scheme = PairScheme::random_pairs;
  if (h.pairs == "trace") {
    const Problem p = build_problem(*cfg.fidelity, cfg.seed);
    d = build_denoiser(*cfg.denoiser, p.truth.shape());
    PnPConfig pc = cfg.run->pnp;
    pc.keep_iterates = true;
    pc.psnr_peak = p.peak;
    const IterTrace tr = run(*p.f, *d, pc, initial_point(p, *cfg.run));
    if (!tr.converged()) throw NumericalError("hist: trace did not converge (" + std::string(to_string(tr.status)) + ")");
    auto all = iterate_pairs_from_trace(tr);
    // Evenly thinned to the requested count.
    if (all.size() > h.count) {
      for (std::size_t i = 0; i < h.count; ++i) pairs.push_back(all[i * all.size() / h.count]);
    } else {
      pairs = std::move(all);
    }
    scheme = PairScheme::iterates_vs_limit;
  } else {
    const Shape s{h.channels, h.size, h.size};
    d = build_denoiser(*cfg.denoiser, s);
    Rng rng(derive_seed(cfg.seed, 4));
    pairs = random_pairs(s, h.count, rng, h.lo, h.hi, h.spread);
  }
  const EpsEstimate e = estimate_eps(*d, pairs, scheme);

  const double range = h.range ? *h.range : std::max(1.0, e.max_ratio);
  std::vector<std::size_t> counts(h.bins, 0);
  std::size_t above = 0;
  for (double r : e.ratios) {
    if (r > range) {
      ++above;
      continue;
    }
    counts[std::min(h.bins - 1, static_cast<std::size_t>(r / range * double(h.bins)))]++;
  }
  std::ofstream f = open_out(ctx.out / "hist.csv");
  f << "bin_lo,bin_hi,count\n";
  for (std::size_t b = 0; b < h.bins; ++b)
    f << num(range * b / double(h.bins)) << ',' << num(range * (b + 1) / double(h.bins)) << ',' << counts[b] << '\n';

  const auto bound = d->eps_bound();
  ctx.result["denoiser"] = d->name();
  ctx.result["pair_scheme"] = to_string(scheme);
  ctx.result["pairs"] = pairs.size();
  ctx.result["ratios"] = e.ratios.size();
  ctx.result["degenerate_pairs"] = e.degenerate_pairs;
  ctx.result["max_ratio"] = e.max_ratio;
  ctx.result["above_range"] = above;
  ctx.result["eps_bound"] = jnum(bound);
  if (bound) {
    const bool holds = e.max_ratio <= *bound + 1e-6;
    ctx.result["certificate_holds"] = holds;
    if (!holds) throw CertificateFailure("max ratio " + num(e.max_ratio) + " exceeds the certified bound " + num(*bound));
  }
}

// ------------------------------------------------------------------- train

json certify_layers(const SimpleCNNModel& m, std::size_t guard, std::size_t power_steps, RngSeed seed, double tol,
                    std::ostream* csv, std::size_t& bad) {
  json layers = json::array();
  if (csv) *csv << "layer,c_out,c_in,kh,kw,target,power_sigma,reshape_sigma,dense_sigma,dense_over_reshape,status\n";
  for (std::size_t l = 0; l < m.depth(); ++l) {
    const ConvKernel& k = m.layers[l].kernel;
    const double target = l < m.c_targets.size() ? m.c_targets[l] : 1.0;
    PowerIterState st = init_power_state(k, guard, guard, derive_seed(seed, 100 + l));
    for (std::size_t i = 0; i < power_steps; ++i) st = power_step(k, st);
    const double power = sigma_from_state(k, st).sigma;
    const double reshape = reshape_sn_sigma(k).sigma;
    std::optional<double> dense;
    std::string status;
    try {
      dense = dense_sigma(k, guard, guard).sigma;
    } catch (const DomainError&) {
      status = "guard_exceeded";
    }
    const bool asserted = m.norm_mode == NormMode::real_sn;
    if (dense) status = !asserted ? "reported" : (*dense <= target + tol ? "ok" : "over_target");
    if (asserted && status != "ok") ++bad;
    std::optional<double> ratio;
    if (dense && reshape > 0.0) ratio = *dense / reshape;
    if (csv)
      *csv << l << ',' << k.c_out() << ',' << k.c_in() << ',' << k.kh() << ',' << k.kw() << ',' << num(target) << ','
           << num(power) << ',' << num(reshape) << ',' << num(dense) << ',' << num(ratio) << ',' << status << '\n';
    layers.push_back({{"layer", l},
                      {"target", target},
                      {"power_sigma", power},
                      {"reshape_sigma", reshape},
                      {"dense_sigma", jnum(dense)},
                      {"dense_over_reshape", jnum(ratio)},
                      {"status", status}});
  }
  return layers;
}

void cmd_train(Context& ctx) {
  const TrainSpec& t = *ctx.cfg.train;
  const PatchSet data = make_patches(t.patches, t.patch_size, derive_seed(ctx.cfg.seed, 1));
  TrainConfig tc = t.train;
  tc.seed = derive_seed(ctx.cfg.seed, 3);
  if (t.shape.image_channels != 1) throw ShapeError("training patches are single-channel; set channels to 1");
  const TrainResult res = train(make_simple_cnn(t.shape, t.norm_mode, t.lipschitz, derive_seed(ctx.cfg.seed, 2)), tc,
                                data);
  save_model(ctx.out / "model.pnpm", res.model);
  std::ofstream f = open_out(ctx.out / "loss.csv");
  f << "epoch,mean_loss\n";
  for (std::size_t e = 0; e < res.epoch_loss.size(); ++e) f << e + 1 << ',' << num(res.epoch_loss[e]) << '\n';

  std::size_t bad = 0;
  ctx.result["norm_mode"] = to_string(res.model.norm_mode);
  ctx.result["epoch_loss"] = res.epoch_loss;
  ctx.result["lipschitz_target"] = res.model.lipschitz_target();
  ctx.result["guard"] = t.guard;
  ctx.result["certification"] = certify_layers(res.model, t.guard, 0, ctx.cfg.seed, 1e-3, nullptr, bad);
  ctx.result["certified"] = res.model.norm_mode == NormMode::real_sn ? json(bad == 0) : json(nullptr);
  if (bad) throw CertificateFailure(std::to_string(bad) + " layers fail the dense spectral-norm certificate");
}

// ------------------------------------------------------------------- sncheck

void cmd_sncheck(Context& ctx) {
  const SncheckSpec& s = *ctx.cfg.sncheck;
  const SimpleCNNModel m = load_model(s.model);
  std::ofstream f = open_out(ctx.out / "sncheck.csv");
  std::size_t bad = 0;
  ctx.result["norm_mode"] = to_string(m.norm_mode);
  ctx.result["guard"] = s.guard;
  ctx.result["layers"] = certify_layers(m, s.guard, s.power_steps, ctx.cfg.seed, s.tolerance, &f, bad);
  if (bad) throw CertificateFailure(std::to_string(bad) + " layers fail the dense spectral-norm certificate");
}

// ------------------------------------------------------------------- oracle

void cmd_oracle(Context& ctx) {
  const OracleSpec& o = ctx.cfg.oracle;
  Rng rng(derive_seed(ctx.cfg.seed, 5));
  struct Check {
    std::string name;
    std::size_t cases;
    double error, tolerance;
  };
  std::vector<Check> checks;

  double e = 0.0;
  for (std::size_t t = 0; t < o.poisson_cases; ++t) {
    const double a = std::exp(rng.uniform(std::log(1e-3), std::log(10.0))), z = rng.uniform(-5.0, 10.0);
    const double y = double(rng.below(30));
    e = std::max(e, std::abs(scalar::poisson_prox(a, z, y) - oracle::poisson_prox(a, z, y)));
  }
  checks.push_back({"poisson_prox", o.poisson_cases, e, 1e-8});

  e = 0.0;
  for (std::size_t t = 0; t < o.qis_cases; ++t) {
    const double a = std::exp(rng.uniform(std::log(1e-2), std::log(10.0))), z = rng.uniform(-2.0, 5.0);
    const std::uint64_t k = 1 + rng.below(16), k1 = rng.below(k + 1);
    const double beta = rng.uniform(0.2, 4.0);
    e = std::max(e, std::abs(scalar::qis_prox(a, z, double(k - k1), double(k1), beta) -
                             oracle::qis_prox(a, z, double(k - k1), double(k1), beta)));
  }
  checks.push_back({"qis_prox", o.qis_cases, e, 1e-8});

  e = 0.0;
  for (std::size_t m = 0; m < o.mri_masks; ++m) {
    MriProblem p = simulate_mri(random_uniform(Shape{2, 8, 8}, rng),
                                random_mask(8, 8, 0.3, derive_seed(ctx.cfg.seed, 1000 + m)), 0.05, rng);
    const auto f = mri_model(p);
    const double a = std::exp(rng.uniform(std::log(0.1), std::log(10.0)));
    const Tensor z = random_normal(Shape{2, 8, 8}, rng);
    const Tensor got = f->prox(a, z), want = oracle::mri_prox(p, a, z);
    for (std::size_t i = 0; i < got.size(); ++i) e = std::max(e, std::abs(got[i] - want[i]));
  }
  checks.push_back({"mri_prox", o.mri_masks, e, 1e-6});

  // Relative: sigma scales with the kernel.
  double power = 0.0, adj = 0.0, under = -INFINITY;
  for (std::size_t t = 0; t < o.kernels; ++t) {
    ConvKernel k(2, 2, 3, 3);
    for (double& w : k.weights()) w = rng.normal();
    const double dense = dense_sigma(k, 8, 8).sigma;
    PowerIterState st = init_power_state(k, 8, 8, derive_seed(ctx.cfg.seed, 2000 + t));
    for (std::size_t i = 0; i < o.power_steps; ++i) st = power_step(k, st);
    power = std::max(power, std::abs(sigma_from_state(k, st).sigma - dense) / dense);
    under = std::max(under, reshape_sn_sigma(k).sigma - dense);
    const Tensor x = random_normal(Shape{2, 8, 8}, rng), u = random_normal(Shape{2, 8, 8}, rng);
    adj = std::max(adj, std::abs(inner(conv_forward(k, x), u) - inner(x, conv_adjoint(k, u))) /
                            (1.0 + norm2(x) * norm2(u)));
  }
  checks.push_back({"power_sigma_relative", o.kernels, power, 1e-3});
  checks.push_back({"conv_adjoint", o.kernels, adj, 1e-10});
  checks.push_back({"reshape_minus_dense", o.kernels, under, 1e-9});

  std::ofstream f = open_out(ctx.out / "oracle.csv");
  f << "check,cases,max_error,tolerance,pass\n";
  std::size_t bad = 0;
  json jc = json::array();
  for (const auto& c : checks) {
    const bool pass = c.error <= c.tolerance;
    bad += !pass;
    f << c.name << ',' << c.cases << ',' << num(c.error) << ',' << num(c.tolerance) << ',' << (pass ? "true" : "false")
      << '\n';
    jc.push_back({{"check", c.name}, {"cases", c.cases}, {"max_error", c.error}, {"tolerance", c.tolerance},
                  {"pass", pass}});
  }
  ctx.result["checks"] = jc;
  if (bad) throw CertificateFailure(std::to_string(bad) + " oracle checks failed");
}

}  // namespace

int execute(const Invocation& inv, std::ostream& out, std::ostream& err) {
  const auto t0 = std::chrono::steady_clock::now();
  std::optional<Context> ctx;
  try {
    ConfigSource src = load_config(inv.config);
    ctx.emplace(Context{inv, parse_experiment(src, inv.command), inv.out});
    if (inv.seed) ctx->cfg.seed = RngSeed{*inv.seed};
  } catch (const ConfigError& e) {
    err << "config error";
    if (e.line()) err << " at line " << e.line() << ", column " << e.column();
    err << ": " << e.what() << '\n';
    return kConfigError;
  }

  auto finish = [&](const std::string& status, int code, const std::string& msg) -> int {
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    try {
      if (!msg.empty()) ctx->result["error"] = msg;
      write_summary(*ctx, status, secs);
    } catch (const std::exception& e) {
      err << "error: " << e.what() << '\n';
      return kFailure;
    }
    if (!msg.empty()) err << inv.command << ": " << msg << '\n';
    out << inv.command << ": " << status << " (" << (ctx->out / "summary.json").string() << ")\n";
    return code;
  };

  try {
    fs::create_directories(ctx->out);
  } catch (const std::exception& e) {
    err << "error: cannot create output directory: " << e.what() << '\n';
    return kFailure;
  }
  try {
    const std::string& c = inv.command;
    if (c == "run") cmd_run(*ctx);
    else if (c == "sweep") cmd_sweep(*ctx);
    else if (c == "hist") cmd_hist(*ctx);
    else if (c == "train") cmd_train(*ctx);
    else if (c == "sncheck") cmd_sncheck(*ctx);
    else cmd_oracle(*ctx);
  } catch (const CertificateFailure& e) {
    return finish("certificate_failure", kCertificateFailure, e.what());
  } catch (const FormatError& e) {
    // A referenced input file is malformed.
    return finish("config_error", kConfigError, e.what());
  } catch (const ShapeError& e) {
    return finish("config_error", kConfigError, e.what());
  } catch (const DomainError& e) {
    return finish("numerical_failure", kNumericalFailure, e.what());
  } catch (const NumericalError& e) {
    return finish("numerical_failure", kNumericalFailure, e.what());
  } catch (const std::exception& e) {
    return finish("error", kFailure, e.what());
  }
  return finish("ok", kOk, "");
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Plug-and-play reconstruction experiments"};
  app.require_subcommand(1);
  Invocation inv;
  std::uint64_t seed = 0;
  for (const auto& name : commands()) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", inv.config, "JSON experiment config")->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out", inv.out, "output directory");
  }
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kOk;
    }
    err << e.what() << '\n' << "run with --help for usage\n";
    return kConfigError;
  }
  for (CLI::App* sub : app.get_subcommands()) {
    inv.command = sub->get_name();
    if (sub->count("--seed")) inv.seed = seed;
  }
  return execute(inv, out, err);
}

}  // namespace pnp::cli
