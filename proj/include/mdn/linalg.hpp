#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mdn/errors.hpp"

namespace mdn::linalg {

/// Number of packed entries of an upper triangle (diagonal included).
constexpr std::size_t tri_size(int dim) {
    return static_cast<std::size_t>(dim) * (dim + 1) / 2;
}

/// Index into the packed row-major upper triangle. Requires row <= col.
constexpr std::size_t tri_index(int dim, int row, int col) {
    return static_cast<std::size_t>(row) * dim - static_cast<std::size_t>(row) * (row - 1) / 2 +
           static_cast<std::size_t>(col - row);
}

/// Unconstrained upper-triangular matrix as predicted by a network head.
/// Packed row-major over the upper triangle, diagonal included.
struct UpperTriangularRaw {
    int dim = 0;
    std::vector<double> entries;

    double at(int row, int col) const { return entries[tri_index(dim, row, col)]; }
    double diag(int j) const { return entries[tri_index(dim, j, j)]; }

    /// Throws if the entry count is wrong or any entry is non-finite.
    void validate() const;
};

/// Upper-triangular Cholesky factor of a precision matrix; diagonal is
/// strictly positive. Obtained from UpperTriangularRaw via exp_diag only.
struct CholeskyFactor {
    int dim = 0;
    std::vector<double> entries;

    double at(int row, int col) const { return entries[tri_index(dim, row, col)]; }
    double diag(int j) const { return entries[tri_index(dim, j, j)]; }
    double min_diag() const;
};

/// Row-major dense matrix. Used for covariance reconstruction and oracles,
/// never in the training path.
struct DenseMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> entries;

    DenseMatrix() = default;
    DenseMatrix(int rows_, int cols_)
        : rows(rows_), cols(cols_), entries(static_cast<std::size_t>(rows_) * cols_, 0.0) {}

    double& at(int r, int c) { return entries[static_cast<std::size_t>(r) * cols + c]; }
    double at(int r, int c) const { return entries[static_cast<std::size_t>(r) * cols + c]; }
};

/// Raw diagonal entries are clamped to this range before exponentiation so
/// factor diagonals stay inside (exp(-30), exp(30)).
inline constexpr double kDiagClampLimit = 30.0;

/// Factor diagonals below this threshold are treated as singular.
inline constexpr double kSingularThreshold = 1e-300;

double clamp_diag(double raw);

/// Derivative of clamp_diag (1 inside the clamp range, 0 outside).
double clamp_diag_derivative(double raw);

/// Copies the off-diagonal entries verbatim and exponentiates the (clamped)
/// diagonal, yielding a factor with strictly positive diagonal.
CholeskyFactor exp_diag(const UpperTriangularRaw& u);

/// log |Sigma^-1|^(1/2) for the factor exp_diag(u): the sum of the clamped
/// raw diagonal entries. Independent of all off-diagonal values.
double log_det_half_precision(const UpperTriangularRaw& u);

/// Upper-triangular matrix-vector product c * v.
std::vector<double> tri_matvec(const CholeskyFactor& c, std::span<const double> v);

/// Solves c^T w = rhs (c^T is lower triangular) by forward substitution,
/// i.e. returns w = c^-T rhs. Throws SingularFactorError when a diagonal
/// entry falls below kSingularThreshold.
std::vector<double> solve_lower_transposed(const CholeskyFactor& c, std::span<const double> rhs);

/// Solves c w = rhs by back substitution, i.e. returns w = c^-1 rhs. This is
/// the transform that inverts tri_matvec, so it carries the latent-to-data
/// map and exact sampling: cov(c^-1 eta) = (c^T c)^-1 for eta ~ N(0, I).
std::vector<double> solve_upper(const CholeskyFactor& c, std::span<const double> rhs);

/// Reconstructs Sigma = (c^T c)^-1 via dim back-substitution solves against
/// unit vectors. Output is exactly symmetric by construction. Diagnostics
/// only.
DenseMatrix covariance_from_factor(const CholeskyFactor& c);

}  // namespace mdn::linalg
