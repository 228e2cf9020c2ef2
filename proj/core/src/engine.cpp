#include "pnp/engine.hpp"

#include <cmath>
#include <string>

#include "pnp/errors.hpp"

namespace pnp {

void PnPConfig::validate() const {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("step size alpha must be positive");
  if (!(tol > 0.0)) throw DomainError("tol must be positive");
  if (record_every == 0) throw DomainError("record_every must be at least 1");
}

Tensor fbs_step(const FidelityModel& f, const Denoiser& d, double alpha, const Tensor& x) {
  Tensor g = f.grad(x);
  require_same_shape(x, g, "fbs_step");
  Tensor w = x;
  w.axpy(-alpha, g);
  return d.apply(w);
}

AdmmState admm_step(const FidelityModel& f, const Denoiser& d, double alpha, const AdmmState& s) {
  require_same_shape(s.y, s.u, "admm_step");
  AdmmState out;
  out.x = d.apply(s.y - s.u);
  out.y = f.prox(alpha, out.x + s.u);
  out.u = s.u;
  out.u += out.x;
  out.u -= out.y;
  return out;
}

Tensor drs_step(const FidelityModel& f, const Denoiser& d, double alpha, const Tensor& z) {
  Tensor half = f.prox(alpha, z);
  Tensor refl = 2.0 * half;
  refl -= z;
  Tensor x = d.apply(refl);
  Tensor out = z;
  out += x;
  out -= half;
  return out;
}

Tensor drs_operator(const FidelityModel& f, const Denoiser& d, double alpha, const Tensor& z) {
  // (2P - I) z
  Tensor r1 = 2.0 * f.prox(alpha, z);
  r1 -= z;
  // (2H - I) r1
  Tensor r2 = 2.0 * d.apply(r1);
  r2 -= r1;
  Tensor out = 0.5 * z;
  out.axpy(0.5, r2);
  return out;
}

Tensor admm_to_drs(const AdmmState& s) {
  require_same_shape(s.y, s.u, "admm_to_drs");
  return s.y + s.u;
}

namespace {

// Image iterate and method state advanced together so run() stays uniform.
struct Stepper {
  const FidelityModel& f;
  const Denoiser& d;
  Method method;
  double alpha;

  Tensor x;       // image iterate
  Tensor state;   // x, z or y + u
  AdmmState admm;

  void init(const Tensor& x0) {
    x = x0;
    if (method == Method::ADMM) {
      admm = AdmmState{x0, x0, Tensor(x0.shape())};
      state = admm_to_drs(admm);
    } else {
      state = x0;
    }
  }

  void step() {
    switch (method) {
      case Method::FBS:
        state = fbs_step(f, d, alpha, state);
        x = state;
        break;
      case Method::ADMM:
        admm = admm_step(f, d, alpha, admm);
        x = admm.x;
        state = admm_to_drs(admm);
        break;
      case Method::DRS: {
        Tensor half = f.prox(alpha, state);
        Tensor refl = 2.0 * half;
        refl -= state;
        x = d.apply(refl);
        state += x;
        state -= half;
        break;
      }
    }
  }
};

}  // namespace

IterTrace run(const FidelityModel& f, const Denoiser& d, const PnPConfig& cfg, const Tensor& init,
              const std::optional<Tensor>& ground_truth) {
  cfg.validate();
  if (init.shape() != f.shape())
    throw ShapeError("run: initial image shape does not match the fidelity model");
  if (ground_truth && ground_truth->shape() != init.shape())
    throw ShapeError("run: ground truth shape does not match the initial image");

  IterTrace trace;
  trace.method = cfg.method;
  trace.alpha = cfg.alpha;
  trace.tol = cfg.tol;

  Stepper s{f, d, cfg.method, cfg.alpha, {}, {}, {}};
  s.init(init);

  // The ADMM start (y = init, u = 0) is not a post-step state, so the first
  // mapped residual is not a DRS residual and cannot seed a ratio.
  const std::size_t first_ratio = cfg.method == Method::ADMM ? 3 : 2;

  std::optional<double> prev;
  trace.status = RunStatus::max_iter;
  for (std::size_t k = 1; k <= cfg.max_iter; ++k) {
    Tensor x_prev = s.x;
    Tensor w_prev = s.state;
    try {
      s.step();
    } catch (const DomainError& e) {
      trace.status = RunStatus::failed;
      trace.message = "iteration " + std::to_string(k) + ": " + e.what();
    } catch (const NumericalError& e) {
      trace.status = RunStatus::failed;
      trace.message = "iteration " + std::to_string(k) + ": " + e.what();
    }
    if (trace.status == RunStatus::failed) {
      s.x = std::move(x_prev);
      s.state = std::move(w_prev);
      break;
    }
    if (!s.state.all_finite() || !s.x.all_finite()) {
      trace.status = RunStatus::failed;
      trace.message = "iteration " + std::to_string(k) + ": non-finite iterate";
      trace.iterations = k;
      break;
    }
    trace.iterations = k;

    TraceRow row;
    row.iteration = k;
    row.displacement = distance(s.x, x_prev);
    row.residual = distance(s.state, w_prev);
    if (k >= first_ratio && prev) {
      row.prev_residual = *prev;
      if (*prev > 0.0) row.ratio = row.residual / *prev;
    }
    if (ground_truth) row.psnr = psnr(s.x, *ground_truth, cfg.psnr_peak);
    prev = row.residual;

    const bool done = row.residual <= cfg.tol;
    if (k % cfg.record_every == 0 || done || k == cfg.max_iter) {
      trace.rows.push_back(row);
      if (cfg.keep_iterates) trace.iterates.push_back(s.x);
    }
    if (done) {
      trace.status = RunStatus::converged;
      break;
    }
  }

  trace.final_iterate = s.x;
  trace.final_state = s.state;
  if (cfg.method == Method::ADMM) trace.final_admm = s.admm;
  return trace;
}

}  // namespace pnp
