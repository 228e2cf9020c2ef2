#pragma once

#include <cstddef>
#include <optional>

#include "pnp/denoiser.hpp"
#include "pnp/fidelity.hpp"
#include "pnp/trace.hpp"

namespace pnp {

struct PnPConfig {
  Method method = Method::ADMM;
  double alpha = 0.1;
  std::size_t max_iter = 500;
  double tol = 1e-6;
  std::size_t record_every = 1;
  double psnr_peak = 1.0;
  bool keep_iterates = true;  // snapshot the image iterate at recorded rows

  void validate() const;
};

// x' = H(x - alpha * grad f(x)).
Tensor fbs_step(const FidelityModel& f, const Denoiser& d, double alpha, const Tensor& x);

// x' = H(y - u); y' = Prox(x' + u); u' = u + x' - y'.
AdmmState admm_step(const FidelityModel& f, const Denoiser& d, double alpha, const AdmmState& s);

// x_half = Prox(z); x = H(2 x_half - z); z' = z + x - x_half.
Tensor drs_step(const FidelityModel& f, const Denoiser& d, double alpha, const Tensor& z);

// Same map in operator form: 1/2 z + 1/2 (2H - I)(2Prox - I) z.
Tensor drs_operator(const FidelityModel& f, const Denoiser& d, double alpha, const Tensor& z);

// DRS variable of an ADMM state.
//
// With z^k = x^{k+1} + u^k the DRS half step is x^{k+1/2} = y^{k+1} and the
// DRS image iterate is x^{k+2}. Since u^{k+1} = u^k + x^{k+1} - y^{k+1}, the
// same z^k equals y^{k+1} + u^{k+1}, which only needs the post-step state.
// For any state produced by admm_step, drs_step(admm_to_drs(s)) equals
// admm_to_drs(admm_step(s)).
Tensor admm_to_drs(const AdmmState& s);

// Iterates until the state residual drops to tol or max_iter is reached.
//
// FBS starts from x = init. ADMM starts from y = init, u = 0 (x = init) and
// measures residuals on the DRS variable y + u. DRS starts from z = init.
// Non-finite iterates or domain failures end the run with status failed and
// leave the partial trace intact.
IterTrace run(const FidelityModel& f, const Denoiser& d, const PnPConfig& cfg, const Tensor& init,
              const std::optional<Tensor>& ground_truth = std::nullopt);

}  // namespace pnp
