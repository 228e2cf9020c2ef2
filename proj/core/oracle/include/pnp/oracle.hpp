#pragma once

// Slow reference implementations used to freeze expected values in tests and
// by the CLI "oracle" task. Nothing here shares code paths with the fast
// implementations it checks.

#include <cstddef>
#include <functional>

#include <Eigen/Dense>

#include "pnp/conv.hpp"
#include "pnp/fidelity.hpp"
#include "pnp/image_io.hpp"
#include "pnp/tensor.hpp"

namespace pnp::oracle {

// diff(a, b) must return g(a) - g(b); comparing through differences lets the
// caller cancel large common terms analytically.
using ObjectiveDiff = std::function<double(double, double)>;

// Golden-section minimiser of a unimodal g on [lo, hi]; stops when the
// bracket is narrower than tol * max(1, |x|).
double golden_section(const ObjectiveDiff& diff, double lo, double hi, double tol = 1e-13);

double poisson_prox(double alpha, double z, double y);
double qis_prox(double alpha, double z, double k0, double k1, double beta);

// Direct O((hw)^2) unitary DFT.
ComplexImage naive_dft2(const ComplexImage& x);
ComplexImage naive_idft2(const ComplexImage& k);

// argmin_x alpha/2 ||y - M F x||^2 + 1/2 ||x - z||^2 by conjugate gradients
// on the normal equations, with the naive DFT.
Tensor mri_prox(const MriProblem& p, double alpha, const Tensor& z);

// Central differences of f at x.
Tensor fd_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x, double h = 1e-6);

// Matrix of the zero-padded convolution on an h x w grid, built from the
// index definition (out(o,r,c) = sum k(o,i,a,b) x(i, r+a-pr, c+b-pc)).
Eigen::MatrixXd conv_matrix(const ConvKernel& k, std::size_t height, std::size_t width);

// Largest singular value of conv_matrix by Jacobi SVD.
double svd_sigma(const ConvKernel& k, std::size_t height, std::size_t width);

// Direct evaluation of conv_matrix(k) * x.
Tensor naive_conv(const ConvKernel& k, const Tensor& x);

}  // namespace pnp::oracle
