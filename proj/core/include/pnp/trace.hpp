#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "pnp/tensor.hpp"

namespace pnp {

enum class Method { FBS, ADMM, DRS };

const char* to_string(Method m);
Method method_from_string(const std::string& s);

// One recorded iteration k (the state after k steps).
struct TraceRow {
  std::size_t iteration = 0;
  double displacement = 0.0;            // ||x^k - x^{k-1}|| on the image iterate
  double residual = 0.0;                // ||w^k - w^{k-1}|| on the method's state variable
  std::optional<double> prev_residual;  // residual of step k-1, when comparable
  std::optional<double> ratio;          // residual / prev_residual
  std::optional<double> psnr;
};

struct AdmmState {
  Tensor x, y, u;
};

enum class RunStatus { converged, max_iter, failed };

const char* to_string(RunStatus s);

struct IterTrace {
  Method method = Method::FBS;
  double alpha = 0.0;
  double tol = 0.0;
  std::vector<TraceRow> rows;
  std::vector<Tensor> iterates;  // image iterate at each recorded row
  Tensor final_iterate;          // image iterate at termination
  Tensor final_state;            // x for FBS, z for DRS and (mapped) ADMM
  std::optional<AdmmState> final_admm;
  std::size_t iterations = 0;
  RunStatus status = RunStatus::max_iter;
  std::string message;

  bool converged() const { return status == RunStatus::converged; }
  double final_residual() const { return rows.empty() ? 0.0 : rows.back().residual; }
};

}  // namespace pnp
