#pragma once

// Independent reference computations for the test suites. Everything here
// works on dense matrices via LU factorization and plain summation, never
// through the packed-triangular code paths it is used to check.

#include <functional>
#include <span>
#include <vector>

#include "mdn/autonet.hpp"
#include "mdn/gmm.hpp"
#include "mdn/linalg.hpp"

namespace oracle {

using Dense = mdn::linalg::DenseMatrix;

Dense dense_from_raw(const mdn::linalg::UpperTriangularRaw& u, bool exp_diagonal);
Dense dense_from_factor(const mdn::linalg::CholeskyFactor& c);
Dense matmul(const Dense& a, const Dense& b);
Dense transpose(const Dense& a);
std::vector<double> matvec(const Dense& a, std::span<const double> v);

/// log |det A| via LU with partial pivoting. `sign` receives -1/0/+1.
double log_abs_det(Dense a, int* sign = nullptr);

/// Dense inverse via Gauss-Jordan elimination with partial pivoting.
Dense inverse(Dense a);

/// Textbook multivariate normal log density evaluated from the covariance:
/// solves sigma z = (x - mu) by LU and takes the determinant from the same
/// factorization.
double mvn_logpdf(std::span<const double> x, std::span<const double> mean, const Dense& sigma);

/// Naive mixture density: sum of w_i exp(log p_i) accumulated in long double
/// without the log-sum-exp rearrangement.
double naive_mixture_log_density(std::span<const double> x, const mdn::gmm::MixtureParams& params,
                                 bool normalized = true);
double naive_mixture_log_density(std::span<const double> x, const mdn::gmm::DiagParams& params,
                                 bool normalized = true);

/// Central finite differences of f over every scalar in params.
mdn::net::NetworkParams finite_difference_grad(
    const mdn::net::NetworkParams& params,
    const std::function<double(const mdn::net::NetworkParams&)>& f, double step = 1e-5);

/// Worst relative mismatch between two gradients, with an absolute floor for
/// near-zero entries.
double max_grad_mismatch(const mdn::net::NetworkParams& analytic,
                         const mdn::net::NetworkParams& numeric, double abs_floor = 1e-7);

struct Moments {
    std::vector<double> mean;
    Dense covariance;
};

Moments empirical_moments(const std::vector<std::vector<double>>& samples);

double frobenius_norm(const Dense& a);
double relative_frobenius_error(const Dense& actual, const Dense& expected);

}  // namespace oracle
