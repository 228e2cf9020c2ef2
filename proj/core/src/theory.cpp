#include "pnp/theory.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pnp/errors.hpp"

namespace pnp {

namespace {

void check_common(double eps, double alpha) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw DomainError("eps must be finite and nonnegative");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("alpha must be positive");
}

}  // namespace

TheoryBounds theory_fbs(double mu, double L, double eps, double alpha) {
  if (!(mu > 0.0) || !(L >= mu) || !std::isfinite(L)) throw DomainError("theory_fbs needs 0 < mu <= L");
  check_common(eps, alpha);
  TheoryBounds b;
  b.delta = std::max(std::abs(1.0 - alpha * mu), std::abs(1.0 - alpha * L)) * (1.0 + eps);
  // eps (L - mu) < 2 mu, written without dividing so L == mu needs no special case
  b.feasible = eps * (L - mu) < 2.0 * mu;
  if (b.feasible) {
    // 1/(1 + 1/eps) = eps/(1 + eps), which also covers eps = 0
    const double t = eps / (1.0 + eps);
    b.alpha_range = AlphaInterval{t / mu, 2.0 / L - t / L};
  }
  return b;
}

TheoryBounds theory_drs(double mu, double eps, double alpha) {
  if (!(mu > 0.0) || !std::isfinite(mu)) throw DomainError("theory_drs needs mu > 0");
  check_common(eps, alpha);
  TheoryBounds b;
  const double am = alpha * mu;
  b.delta = (1.0 + eps + eps * am + 2.0 * eps * eps * am) / (1.0 + am + 2.0 * eps * am);
  if (eps < 1.0) {
    const double lo = eps / ((1.0 + eps - 2.0 * eps * eps) * mu);
    b.alpha_range = AlphaInterval{lo, std::numeric_limits<double>::infinity()};
    b.feasible = alpha > lo;
  }
  return b;
}

std::optional<TheoryBounds> theory_for(Method method, const FidelityModel& f, std::optional<double> eps,
                                       double alpha) {
  const auto mu = f.mu();
  if (!eps || !mu || !(*mu > 0.0)) return std::nullopt;
  if (method == Method::FBS) {
    const auto L = f.lip_grad();
    if (!L) return std::nullopt;
    return theory_fbs(*mu, *L, *eps, alpha);
  }
  return theory_drs(*mu, *eps, alpha);
}

ContractionStats contraction_stats(const IterTrace& trace) {
  ContractionStats st;
  double log_sum = 0.0;
  bool hit_zero = false;
  for (const auto& row : trace.rows) {
    if (!row.prev_residual) continue;
    if (*row.prev_residual < kVanishingResidual) {
      ++st.excluded;
      continue;
    }
    const double r = row.residual / *row.prev_residual;
    st.ratios.push_back(r);
    if (r > 0.0)
      log_sum += std::log(r);
    else
      hit_zero = true;
  }
  if (st.ratios.empty()) {
    if (trace.converged()) {
      st.degenerate = true;
      return st;
    }
    throw DomainError("contraction_stats: trace has too few iterates for a ratio");
  }
  st.geometric_mean = hit_zero ? 0.0 : std::exp(log_sum / static_cast<double>(st.ratios.size()));
  return st;
}

double averagedness_margin(const Operator& op, double theta, std::span<const TensorPair> pairs) {
  if (!(theta > 0.0 && theta < 1.0)) throw DomainError("averagedness_margin: theta must lie in (0,1)");
  if (pairs.empty()) throw DomainError("averagedness_margin: no pairs");
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& [x, y] : pairs) {
    const Tensor dx = x - y;
    const Tensor dt = op(x) - op(y);
    const double ndt = norm2(dt);
    const double ndx = norm2(dx);
    const double m = ndt * ndt + (1.0 - 2.0 * theta) * ndx * ndx - 2.0 * (1.0 - theta) * inner(dt, dx);
    worst = std::max(worst, m);
  }
  return worst;
}

}  // namespace pnp
