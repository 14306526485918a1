#include "mdn/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace mdn::linalg {

void UpperTriangularRaw::validate() const {
    if (dim < 1) {
        throw InvalidInputError("triangular matrix dimension must be positive");
    }
    if (entries.size() != tri_size(dim)) {
        throw ShapeError("triangular matrix of dim " + std::to_string(dim) + " needs " +
                         std::to_string(tri_size(dim)) + " entries, got " +
                         std::to_string(entries.size()));
    }
    for (double e : entries) {
        if (!std::isfinite(e)) {
            throw InvalidInputError("non-finite entry in triangular matrix");
        }
    }
}

double CholeskyFactor::min_diag() const {
    double m = diag(0);
    for (int j = 1; j < dim; ++j) {
        m = std::min(m, diag(j));
    }
    return m;
}

double clamp_diag(double raw) {
    return std::clamp(raw, -kDiagClampLimit, kDiagClampLimit);
}

double clamp_diag_derivative(double raw) {
    return (raw > -kDiagClampLimit && raw < kDiagClampLimit) ? 1.0 : 0.0;
}

CholeskyFactor exp_diag(const UpperTriangularRaw& u) {
    u.validate();
    CholeskyFactor c;
    c.dim = u.dim;
    c.entries = u.entries;
    for (int j = 0; j < u.dim; ++j) {
        const std::size_t k = tri_index(u.dim, j, j);
        c.entries[k] = std::exp(clamp_diag(u.entries[k]));
    }
    return c;
}

double log_det_half_precision(const UpperTriangularRaw& u) {
    u.validate();
    double sum = 0.0;
    for (int j = 0; j < u.dim; ++j) {
        sum += clamp_diag(u.diag(j));
    }
    return sum;
}

std::vector<double> tri_matvec(const CholeskyFactor& c, std::span<const double> v) {
    if (static_cast<int>(v.size()) != c.dim) {
        throw ShapeError("tri_matvec: vector length " + std::to_string(v.size()) +
                         " does not match dim " + std::to_string(c.dim));
    }
    std::vector<double> out(c.dim, 0.0);
    for (int i = 0; i < c.dim; ++i) {
        double acc = 0.0;
        for (int j = i; j < c.dim; ++j) {
            acc += c.at(i, j) * v[j];
        }
        out[i] = acc;
    }
    return out;
}

std::vector<double> solve_lower_transposed(const CholeskyFactor& c, std::span<const double> rhs) {
    if (static_cast<int>(rhs.size()) != c.dim) {
        throw ShapeError("solve_lower_transposed: rhs length " + std::to_string(rhs.size()) +
                         " does not match dim " + std::to_string(c.dim));
    }
    std::vector<double> w(c.dim, 0.0);
    // c^T is lower triangular with (c^T)[i][j] = c[j][i]; substitute from row 0.
    for (int i = 0; i < c.dim; ++i) {
        const double d = c.diag(i);
        if (!(d > kSingularThreshold)) {
            throw SingularFactorError("factor diagonal " + std::to_string(i) +
                                      " is below the singularity threshold");
        }
        double acc = rhs[i];
        for (int j = 0; j < i; ++j) {
            acc -= c.at(j, i) * w[j];
        }
        w[i] = acc / d;
    }
    return w;
}

std::vector<double> solve_upper(const CholeskyFactor& c, std::span<const double> rhs) {
    if (static_cast<int>(rhs.size()) != c.dim) {
        throw ShapeError("solve_upper: rhs length " + std::to_string(rhs.size()) +
                         " does not match dim " + std::to_string(c.dim));
    }
    std::vector<double> w(c.dim, 0.0);
    for (int i = c.dim; i-- > 0;) {
        const double d = c.diag(i);
        if (!(d > kSingularThreshold)) {
            throw SingularFactorError("factor diagonal " + std::to_string(i) +
                                      " is below the singularity threshold");
        }
        double acc = rhs[i];
        for (int j = i + 1; j < c.dim; ++j) {
            acc -= c.at(i, j) * w[j];
        }
        w[i] = acc / d;
    }
    return w;
}

DenseMatrix covariance_from_factor(const CholeskyFactor& c) {
    const int n = c.dim;
    // Columns of T = c^-1 are the solves against unit vectors.
    DenseMatrix t(n, n);
    std::vector<double> unit(n, 0.0);
    for (int k = 0; k < n; ++k) {
        unit[k] = 1.0;
        const std::vector<double> col = solve_upper(c, unit);
        unit[k] = 0.0;
        for (int r = 0; r < n; ++r) {
            t.at(r, k) = col[r];
        }
    }
    // Sigma = T T^T, filled from row dot products so it is exactly symmetric.
    DenseMatrix sigma(n, n);
    for (int i = 0; i < n; ++i) {
        for (int j = i; j < n; ++j) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k) {
                acc += t.at(i, k) * t.at(j, k);
            }
            sigma.at(i, j) = acc;
            sigma.at(j, i) = acc;
        }
    }
    return sigma;
}

}  // namespace mdn::linalg
