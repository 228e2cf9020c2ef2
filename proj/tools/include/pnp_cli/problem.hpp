#pragma once

#include <optional>

#include "pnp/denoiser.hpp"
#include "pnp/fidelity.hpp"
#include "pnp/image_io.hpp"
#include "pnp_cli/config.hpp"

namespace pnp::cli {

// A simulated (or loaded) inverse problem in fidelity units.
struct Problem {
  FidelityPtr f;
  Tensor truth;
  Tensor observation;  // what gets written as the input image: b, counts, K1 counts or zero-filled
  Tensor estimate;     // naive reconstruction from the data alone
  std::optional<Mask> mask;
  double peak = 1.0;
};

Problem build_problem(const FidelitySpec& spec, RngSeed seed);

// `image` is the shape the denoiser will see.
DenoiserPtr build_denoiser(const DenoiserSpec& spec, Shape image);

Tensor initial_point(const Problem& p, const RunSpec& run);

}  // namespace pnp::cli
