#include "qbspde/mathutil.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qbspde/errors.hpp"

namespace qbspde {

Mat::Mat(int r, int c) : rows(r), cols(c) {
    if (r < 0 || c < 0 || r > 3 || c > 3)
        throw ArgumentError("Mat: dimensions must be in [0,3]");
}

Mat Mat::identity(int n) {
    Mat m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

Mat Mat::diag(std::span<const double> d) {
    Mat m(static_cast<int>(d.size()), static_cast<int>(d.size()));
    for (int i = 0; i < m.rows; ++i) m(i, i) = d[static_cast<std::size_t>(i)];
    return m;
}

Mat Mat::transposed() const {
    Mat t(cols, rows);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) t(j, i) = (*this)(i, j);
    return t;
}

Mat Mat::operator*(const Mat& rhs) const {
    if (cols != rhs.rows) throw ArgumentError("Mat multiply: inner dimensions differ");
    Mat out(rows, rhs.cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < rhs.cols; ++j) {
            double s = 0.0;
            for (int k = 0; k < cols; ++k) s += (*this)(i, k) * rhs(k, j);
            out(i, j) = s;
        }
    return out;
}

Mat Mat::operator+(const Mat& rhs) const {
    if (rows != rhs.rows || cols != rhs.cols) throw ArgumentError("Mat add: shape mismatch");
    Mat out(rows, cols);
    for (std::size_t k = 0; k < out.v.size(); ++k) out.v[k] = v[k] + rhs.v[k];
    return out;
}

Mat Mat::operator-(const Mat& rhs) const {
    if (rows != rhs.rows || cols != rhs.cols) throw ArgumentError("Mat sub: shape mismatch");
    Mat out(rows, cols);
    for (std::size_t k = 0; k < out.v.size(); ++k) out.v[k] = v[k] - rhs.v[k];
    return out;
}

Mat Mat::scaled(double s) const {
    Mat out = *this;
    for (auto& x : out.v) x *= s;
    return out;
}

bool Mat::is_symmetric(double tol) const {
    if (rows != cols) return false;
    for (int i = 0; i < rows; ++i)
        for (int j = i + 1; j < cols; ++j)
            if (std::abs((*this)(i, j) - (*this)(j, i)) > tol) return false;
    return true;
}

bool Mat::all_finite() const {
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j)
            if (!std::isfinite((*this)(i, j))) return false;
    return true;
}

double Mat::max_abs() const {
    double m = 0.0;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) m = std::max(m, std::abs((*this)(i, j)));
    return m;
}

std::vector<double> symmetric_eigenvalues(const Mat& m) {
    if (m.rows != m.cols) throw ArgumentError("symmetric_eigenvalues: matrix not square");
    const int n = m.rows;
    Mat a = m;
    // Cyclic Jacobi; n <= 3 so convergence is immediate in practice.
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0, scale = 1e-300;
        for (int p = 0; p < n; ++p) {
            scale = std::max(scale, std::abs(a(p, p)));
            for (int q = p + 1; q < n; ++q) off = std::max(off, std::abs(a(p, q)));
        }
        if (off <= 1e-15 * scale) break;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
            }
    }
    std::vector<double> eig(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) eig[static_cast<std::size_t>(i)] = a(i, i);
    std::sort(eig.begin(), eig.end());
    return eig;
}

// ---------------------------------------------------------------------------
// Banded LU (unblocked gbtrf/gbtrs with partial pivoting)
// ---------------------------------------------------------------------------

BandedMatrix::BandedMatrix(int n, int kl, int ku)
    : n_(n), kl_(kl), ku_(ku), stride_(n) {
    if (n < 1 || kl < 0 || ku < 0 || kl >= n || ku >= n)
        throw ArgumentError("BandedMatrix: invalid shape");
    ab_.assign(static_cast<std::size_t>(2 * kl + ku + 1) * static_cast<std::size_t>(n), 0.0);
    pivot_.assign(static_cast<std::size_t>(n), 0);
}

bool BandedMatrix::in_band(int i, int j) const {
    return i >= 0 && j >= 0 && i < n_ && j < n_ && (j - i) <= ku_ && (i - j) <= kl_;
}

double& BandedMatrix::at(int i, int j) {
    const int r = kl_ + ku_ + i - j;
    return ab_[static_cast<std::size_t>(r) * static_cast<std::size_t>(stride_) +
               static_cast<std::size_t>(j)];
}

double BandedMatrix::get(int i, int j) const {
    if (!in_band(i, j)) return 0.0;
    const int r = kl_ + ku_ + i - j;
    return ab_[static_cast<std::size_t>(r) * static_cast<std::size_t>(stride_) +
               static_cast<std::size_t>(j)];
}

void BandedMatrix::set(int i, int j, double value) {
    if (!in_band(i, j)) {
        if (value == 0.0) return;
        throw ArgumentError("BandedMatrix::set outside band: (" + std::to_string(i) + "," +
                            std::to_string(j) + ")");
    }
    at(i, j) = value;
}

void BandedMatrix::add(int i, int j, double value) {
    if (!in_band(i, j)) {
        if (value == 0.0) return;
        throw ArgumentError("BandedMatrix::add outside band");
    }
    at(i, j) += value;
}

void BandedMatrix::multiply(std::span<const double> x, std::span<double> y) const {
    if (factorized_) throw ArgumentError("BandedMatrix::multiply after factorize");
    if (static_cast<int>(x.size()) != n_ || static_cast<int>(y.size()) != n_)
        throw ArgumentError("BandedMatrix::multiply: size mismatch");
    for (int i = 0; i < n_; ++i) {
        double s = 0.0;
        const int j0 = std::max(0, i - kl_), j1 = std::min(n_ - 1, i + ku_);
        for (int j = j0; j <= j1; ++j) {
            const int r = kl_ + ku_ + i - j;
            s += ab_[static_cast<std::size_t>(r) * static_cast<std::size_t>(stride_) +
                     static_cast<std::size_t>(j)] *
                 x[static_cast<std::size_t>(j)];
        }
        y[static_cast<std::size_t>(i)] = s;
    }
}

void BandedMatrix::factorize() {
    if (factorized_) return;
    const int kv = kl_ + ku_;
    auto AB = [&](int r, int j) -> double& {
        return ab_[static_cast<std::size_t>(r) * static_cast<std::size_t>(stride_) +
                   static_cast<std::size_t>(j)];
    };
    int ju = 0;
    for (int j = 0; j < n_; ++j) {
        const int km = std::min(kl_, n_ - 1 - j);
        int jp = 0;
        double best = std::abs(AB(kv, j));
        for (int k = 1; k <= km; ++k) {
            const double cand = std::abs(AB(kv + k, j));
            if (cand > best) {
                best = cand;
                jp = k;
            }
        }
        pivot_[static_cast<std::size_t>(j)] = j + jp;
        if (best == 0.0)
            throw StructuralError("BandedMatrix::factorize: singular at column " +
                                  std::to_string(j));
        ju = std::max(ju, std::min(j + ku_ + jp, n_ - 1));
        if (jp != 0) {
            for (int c = j; c <= ju; ++c)
                std::swap(AB(kv + (j + jp) - c, c), AB(kv + j - c, c));
        }
        if (km > 0) {
            const double inv = 1.0 / AB(kv, j);
            for (int k = 1; k <= km; ++k) AB(kv + k, j) *= inv;
            for (int c = j + 1; c <= ju; ++c) {
                const double temp = AB(kv + j - c, c);
                if (temp != 0.0)
                    for (int k = 1; k <= km; ++k)
                        AB(kv + (j + k) - c, c) -= AB(kv + k, j) * temp;
            }
        }
    }
    factorized_ = true;
}

void BandedMatrix::solve(std::span<double> b) const {
    if (!factorized_) throw ArgumentError("BandedMatrix::solve before factorize");
    if (static_cast<int>(b.size()) != n_) throw ArgumentError("BandedMatrix::solve: size mismatch");
    const int kv = kl_ + ku_;
    auto AB = [&](int r, int j) -> double {
        return ab_[static_cast<std::size_t>(r) * static_cast<std::size_t>(stride_) +
                   static_cast<std::size_t>(j)];
    };
    if (kl_ > 0) {
        for (int j = 0; j < n_ - 1; ++j) {
            const int lm = std::min(kl_, n_ - 1 - j);
            const int p = pivot_[static_cast<std::size_t>(j)];
            if (p != j) std::swap(b[static_cast<std::size_t>(p)], b[static_cast<std::size_t>(j)]);
            for (int k = 1; k <= lm; ++k)
                b[static_cast<std::size_t>(j + k)] -= AB(kv + k, j) * b[static_cast<std::size_t>(j)];
        }
    }
    for (int j = n_ - 1; j >= 0; --j) {
        b[static_cast<std::size_t>(j)] /= AB(kv, j);
        const int lm = std::min(kv, j);
        for (int k = 1; k <= lm; ++k)
            b[static_cast<std::size_t>(j - k)] -= AB(kv - k, j) * b[static_cast<std::size_t>(j)];
    }
}

// ---------------------------------------------------------------------------
// Gauss-Hermite
// ---------------------------------------------------------------------------

GaussHermite gauss_hermite_normal(int n) {
    if (n < 1 || n > 200) throw ArgumentError("gauss_hermite_normal: n out of range");
    const double pi_quarter = 0.7511255444649425;  // pi^{-1/4}
    std::vector<double> x(static_cast<std::size_t>(n)), w(static_cast<std::size_t>(n));
    const int m = (n + 1) / 2;
    double z = 0.0, pp = 0.0, z1 = 0.0, z2 = 0.0;
    for (int i = 0; i < m; ++i) {
        if (i == 0)
            z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
        else if (i == 1)
            z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
        else if (i == 2)
            z = 1.86 * z - 0.86 * z2;
        else if (i == 3)
            z = 1.91 * z - 0.91 * z2;
        else
            z = 2.0 * z - z2;
        for (int it = 0; it < 100; ++it) {
            double p1 = pi_quarter, p2 = 0.0;
            for (int j = 1; j <= n; ++j) {
                const double p3 = p2;
                p2 = p1;
                p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
            }
            pp = std::sqrt(2.0 * n) * p2;
            const double dz = p1 / pp;
            z -= dz;
            if (std::abs(dz) < 1e-14) break;
        }
        z2 = z1;
        z1 = z;
        x[static_cast<std::size_t>(i)] = z;
        x[static_cast<std::size_t>(n - 1 - i)] = -z;
        w[static_cast<std::size_t>(i)] = 2.0 / (pp * pp);
        w[static_cast<std::size_t>(n - 1 - i)] = w[static_cast<std::size_t>(i)];
    }
    // Physicists' nodes/weights -> standard normal measure.
    GaussHermite gh;
    gh.nodes.resize(static_cast<std::size_t>(n));
    gh.weights.resize(static_cast<std::size_t>(n));
    const double inv_sqrt_pi = 0.5641895835477563;
    for (int i = 0; i < n; ++i) {
        gh.nodes[static_cast<std::size_t>(i)] = std::sqrt(2.0) * x[static_cast<std::size_t>(n - 1 - i)];
        gh.weights[static_cast<std::size_t>(i)] = w[static_cast<std::size_t>(n - 1 - i)] * inv_sqrt_pi;
    }
    return gh;
}

std::vector<double> least_squares(const std::vector<double>& X, int n_rows, int n_cols,
                                  std::span<const double> y) {
    if (n_rows < n_cols || n_cols < 1)
        throw RankError("least_squares: underdetermined system; increase the sample count");
    if (static_cast<int>(y.size()) != n_rows || static_cast<int>(X.size()) != n_rows * n_cols)
        throw ArgumentError("least_squares: shape mismatch");

    const int p = n_cols;
    std::vector<double> G(static_cast<std::size_t>(p * p), 0.0), rhs(static_cast<std::size_t>(p), 0.0);
    for (int r = 0; r < n_rows; ++r) {
        const double* row = &X[static_cast<std::size_t>(r * p)];
        for (int i = 0; i < p; ++i) {
            rhs[static_cast<std::size_t>(i)] += row[i] * y[static_cast<std::size_t>(r)];
            for (int j = i; j < p; ++j)
                G[static_cast<std::size_t>(i * p + j)] += row[i] * row[j];
        }
    }
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < i; ++j)
            G[static_cast<std::size_t>(i * p + j)] = G[static_cast<std::size_t>(j * p + i)];

    double trace = 0.0;
    for (int i = 0; i < p; ++i) trace += G[static_cast<std::size_t>(i * p + i)];
    for (double ridge : {1e-13 * trace, 1e-9 * trace}) {
        std::vector<double> C = G;
        for (int i = 0; i < p; ++i) C[static_cast<std::size_t>(i * p + i)] += ridge;
        // Cholesky
        bool ok = true;
        for (int i = 0; i < p && ok; ++i) {
            for (int j = 0; j <= i; ++j) {
                double s = C[static_cast<std::size_t>(i * p + j)];
                for (int k = 0; k < j; ++k)
                    s -= C[static_cast<std::size_t>(i * p + k)] * C[static_cast<std::size_t>(j * p + k)];
                if (i == j) {
                    if (s <= 0.0) {
                        ok = false;
                        break;
                    }
                    C[static_cast<std::size_t>(i * p + i)] = std::sqrt(s);
                } else {
                    C[static_cast<std::size_t>(i * p + j)] = s / C[static_cast<std::size_t>(j * p + j)];
                }
            }
        }
        if (!ok) continue;
        std::vector<double> beta = rhs;
        for (int i = 0; i < p; ++i) {
            for (int k = 0; k < i; ++k)
                beta[static_cast<std::size_t>(i)] -=
                    C[static_cast<std::size_t>(i * p + k)] * beta[static_cast<std::size_t>(k)];
            beta[static_cast<std::size_t>(i)] /= C[static_cast<std::size_t>(i * p + i)];
        }
        for (int i = p - 1; i >= 0; --i) {
            for (int k = i + 1; k < p; ++k)
                beta[static_cast<std::size_t>(i)] -=
                    C[static_cast<std::size_t>(k * p + i)] * beta[static_cast<std::size_t>(k)];
            beta[static_cast<std::size_t>(i)] /= C[static_cast<std::size_t>(i * p + i)];
        }
        return beta;
    }
    throw RankError("least_squares: regression matrix singular; increase n_paths");
}

}  // namespace qbspde
