#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

namespace qbspde {

/// Dense matrix capped at 3x3, row-major. Problem dimensions here are desk
/// scale (d, d0 <= 3), so fixed storage avoids allocation in hot sampling
/// loops.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::array<double, 9> v{};

    Mat() = default;
    Mat(int r, int c);

    static Mat identity(int n);
    static Mat diag(std::span<const double> d);
    static Mat scalar(double x) { return diag(std::span<const double>(&x, 1)); }

    double operator()(int i, int j) const { return v[static_cast<std::size_t>(i * cols + j)]; }
    double& operator()(int i, int j) { return v[static_cast<std::size_t>(i * cols + j)]; }

    Mat transposed() const;
    Mat operator*(const Mat& rhs) const;
    Mat operator+(const Mat& rhs) const;
    Mat operator-(const Mat& rhs) const;
    Mat scaled(double s) const;

    bool is_symmetric(double tol = 0.0) const;
    bool all_finite() const;
    double max_abs() const;
};

/// Eigenvalues of a symmetric matrix (cyclic Jacobi), ascending.
std::vector<double> symmetric_eigenvalues(const Mat& m);

/// General banded matrix with kl sub- and ku super-diagonals, LU-factorable
/// with partial pivoting (LAPACK-style band storage with kl fill rows).
class BandedMatrix {
public:
    BandedMatrix(int n, int kl, int ku);

    int size() const { return n_; }
    int lower_bandwidth() const { return kl_; }
    int upper_bandwidth() const { return ku_; }

    double get(int i, int j) const;
    void set(int i, int j, double value);
    void add(int i, int j, double value);

    /// y = A x (uses the unfactored coefficients; invalid after factorize()).
    void multiply(std::span<const double> x, std::span<double> y) const;

    /// In-place LU with partial pivoting. Throws StructuralError on an
    /// exactly singular pivot.
    void factorize();
    bool factorized() const { return factorized_; }

    /// Solves A x = b using the LU factors (factorize() first).
    void solve(std::span<double> b) const;

private:
    int n_, kl_, ku_, stride_;
    bool factorized_ = false;
    std::vector<double> ab_;   // (2*kl + ku + 1) x n, ab[r*n + j] = A(i,j), r = kl+ku+i-j
    std::vector<int> pivot_;

    bool in_band(int i, int j) const;
    double& at(int i, int j);
};

/// Gauss-Hermite quadrature against the standard normal weight: returns
/// nodes z_i and weights w_i with sum w_i = 1 and E[g(Z)] ~ sum w_i g(z_i).
struct GaussHermite {
    std::vector<double> nodes;
    std::vector<double> weights;
};
GaussHermite gauss_hermite_normal(int n);

/// Least squares fit of y ~ X beta via normal equations with a tiny ridge;
/// throws RankError when the system stays singular. X is row-major
/// n_rows x n_cols.
std::vector<double> least_squares(const std::vector<double>& X, int n_rows, int n_cols,
                                  std::span<const double> y);

}  // namespace qbspde
