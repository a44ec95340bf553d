#pragma once

// Dense linear algebra for the handful of dimensions this library deals with
// (state dimension d <= ~10). Row-major storage, no expression templates.

#include <cstddef>
#include <span>
#include <vector>

namespace mmpr {

using Vector = std::vector<double>;

class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major);

    static Matrix identity(std::size_t d);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool square() const noexcept { return rows_ == cols_; }

    double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }

    Matrix transpose() const;
    double frobenius_norm() const;
    /// Maximum absolute row sum.
    double inf_norm() const;

    friend Matrix operator+(const Matrix& a, const Matrix& b);
    friend Matrix operator-(const Matrix& a, const Matrix& b);
    friend Matrix operator*(const Matrix& a, const Matrix& b);
    friend Matrix operator*(double s, const Matrix& a);
    friend bool operator==(const Matrix& a, const Matrix& b) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

Vector operator*(const Matrix& a, std::span<const double> x);

/// Symmetric d x d matrix. Construction symmetrizes (S + S^T) / 2, so an
/// already symmetric input is stored bit-for-bit.
class SymMatrix {
public:
    SymMatrix() = default;
    explicit SymMatrix(std::size_t d) : m_(d, d) {}
    explicit SymMatrix(const Matrix& s);

    std::size_t dim() const noexcept { return m_.rows(); }
    double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
    const Matrix& matrix() const noexcept { return m_; }

    double max_abs_diagonal() const;

    friend bool operator==(const SymMatrix& a, const SymMatrix& b) = default;

private:
    Matrix m_;
};

/// Lower-triangular factor with non-negative diagonal.
class LowerTriangular {
public:
    LowerTriangular() = default;
    explicit LowerTriangular(const Matrix& l);

    std::size_t dim() const noexcept { return m_.rows(); }
    double operator()(std::size_t i, std::size_t j) const { return m_(i, j); }
    const Matrix& matrix() const noexcept { return m_; }

    /// L * L^T.
    SymMatrix reconstruct() const;

    /// Solves L z = rhs in place. Requires strictly positive pivots.
    void solve_in_place(std::span<double> rhs) const;
    /// rhs <- L rhs, in place.
    void multiply_in_place(std::span<double> rhs) const;

private:
    Matrix m_;
};

struct CholeskyResult {
    LowerTriangular factor;
    /// Column indices whose pivot was <= the tolerance and has been zeroed.
    std::vector<std::size_t> degenerate;
};

/// 1e-12 times the largest diagonal entry.
double default_pivot_tolerance(const SymMatrix& s);

/// Pivoted-free Cholesky for positive semidefinite input. Pivots in
/// [-tol, tol] are zeroed (their column below the diagonal is zeroed too) and
/// reported; throws Error(NotPSD) for a pivot below -tol.
CholeskyResult cholesky(const SymMatrix& s, double pivot_tol);
CholeskyResult cholesky(const SymMatrix& s);

struct SymEigen {
    Vector values;
    Matrix vectors;  ///< eigenvectors in columns
};

/// Cyclic Jacobi eigendecomposition.
SymEigen symmetric_eigen(const SymMatrix& s);

/// Smallest Frobenius-norm change that lifts every eigenvalue to at least
/// eig_floor. Returns s unchanged when it already satisfies the floor.
SymMatrix nearest_psd(const SymMatrix& s, double eig_floor);

/// Smallest eigenvalue >= -tol, where tol scales with the largest diagonal.
bool is_psd(const SymMatrix& s);

/// exp(K t) for K = [[alpha, beta], [0, delta]], stored as
/// [[slow, coupling], [0, fast]].
struct UpperTri2x2Exp {
    double slow = 1.0;      ///< exp(alpha t)
    double coupling = 0.0;  ///< upper-right entry
    double fast = 1.0;      ///< exp(delta t)

    friend UpperTri2x2Exp operator*(const UpperTri2x2Exp& a, const UpperTri2x2Exp& b) {
        return {a.slow * b.slow, a.slow * b.coupling + a.coupling * b.fast, a.fast * b.fast};
    }
};

/// True when |delta - alpha| < 1e-8 max(1, |alpha|, |delta|). In that case
/// the coupling entry is beta t exp(alpha t) times a cubic Taylor
/// polynomial of expm1(x) / x, x = (delta - alpha) t, which reduces to
/// beta t exp(alpha t) at equal rates.
bool rates_coincide(double alpha, double delta) noexcept;

UpperTri2x2Exp expm_2x2_upper(double alpha, double beta, double delta, double t);

/// Closed-form solution of A e(k) = B e(k-1) + (b .* eps0) eps^(k-1):
///   e(k) = (A^-1 B)^k e(0) + sum_{i<k} (A^-1 B)^i A^-1 (b .* eps0) eps^(k-1-i).
/// Throws Error(SingularMatrix) when A is numerically singular.
Vector solve_linear_recursion(const Matrix& a, const Matrix& b_mat, std::span<const double> b,
                              double eps, std::span<const double> eps0,
                              std::span<const double> e0, std::size_t k);

/// LU with partial pivoting; solves A x = rhs. Throws Error(SingularMatrix).
Vector lu_solve(const Matrix& a, std::span<const double> rhs);

}  // namespace mmpr
