#pragma once

#include "pnp/tensor.hpp"

namespace pnp {

// Orthonormal 2-D discrete Fourier transform (1/sqrt(h*w) scaling), so
// dft2 is unitary and idft2 is its exact adjoint and inverse.
ComplexImage dft2(const ComplexImage& x);
ComplexImage idft2(const ComplexImage& k);

}  // namespace pnp
