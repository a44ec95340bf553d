#include "mmpr/smallmat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mmpr/error.hpp"

namespace mmpr {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::NotPSD: return "NotPSD";
        case ErrorKind::SingularMatrix: return "SingularMatrix";
        case ErrorKind::DegenerateBound: return "DegenerateBound";
        case ErrorKind::Unsupported: return "Unsupported";
        case ErrorKind::NonFinite: return "NonFinite";
        case ErrorKind::EmptyEnsemble: return "EmptyEnsemble";
        case ErrorKind::UnrepairableCovariance: return "UnrepairableCovariance";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
    }
    return "Unknown";
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
    : rows_(rows), cols_(cols), data_(std::move(row_major)) {
    if (data_.size() != rows * cols) {
        throw Error(ErrorKind::InvalidArgument, "matrix data size does not match its shape");
    }
}

Matrix Matrix::identity(std::size_t d) {
    Matrix m(d, d);
    for (std::size_t i = 0; i < d; ++i) m(i, i) = 1.0;
    return m;
}

Matrix Matrix::transpose() const {
    Matrix t(cols_, rows_);
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
}

double Matrix::frobenius_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
}

double Matrix::inf_norm() const {
    double best = 0.0;
    for (std::size_t i = 0; i < rows_; ++i) {
        double row = 0.0;
        for (std::size_t j = 0; j < cols_; ++j) row += std::abs((*this)(i, j));
        best = std::max(best, row);
    }
    return best;
}

namespace {

void require_same_shape(const Matrix& a, const Matrix& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw Error(ErrorKind::InvalidArgument, "matrix shapes differ");
    }
}

}  // namespace

Matrix operator+(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b);
    Matrix r = a;
    for (std::size_t i = 0; i < r.data_.size(); ++i) r.data_[i] += b.data_[i];
    return r;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
    require_same_shape(a, b);
    Matrix r = a;
    for (std::size_t i = 0; i < r.data_.size(); ++i) r.data_[i] -= b.data_[i];
    return r;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.rows()) throw Error(ErrorKind::InvalidArgument, "matrix product shape mismatch");
    Matrix r(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const double aik = a(i, k);
            for (std::size_t j = 0; j < b.cols(); ++j) r(i, j) += aik * b(k, j);
        }
    return r;
}

Matrix operator*(double s, const Matrix& a) {
    Matrix r = a;
    for (double& v : r.data_) v *= s;
    return r;
}

Vector operator*(const Matrix& a, std::span<const double> x) {
    if (a.cols() != x.size()) throw Error(ErrorKind::InvalidArgument, "matrix-vector shape mismatch");
    Vector y(a.rows(), 0.0);
    for (std::size_t i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
        y[i] = s;
    }
    return y;
}

SymMatrix::SymMatrix(const Matrix& s) : m_(s.rows(), s.cols()) {
    if (!s.square()) throw Error(ErrorKind::InvalidArgument, "symmetric matrix must be square");
    const std::size_t d = s.rows();
    for (std::size_t i = 0; i < d; ++i) {
        m_(i, i) = s(i, i);
        for (std::size_t j = 0; j < i; ++j) {
            const double v = 0.5 * (s(i, j) + s(j, i));
            m_(i, j) = v;
            m_(j, i) = v;
        }
    }
}

double SymMatrix::max_abs_diagonal() const {
    double m = 0.0;
    for (std::size_t i = 0; i < dim(); ++i) m = std::max(m, std::abs(m_(i, i)));
    return m;
}

LowerTriangular::LowerTriangular(const Matrix& l) : m_(l) {
    if (!l.square()) throw Error(ErrorKind::InvalidArgument, "triangular factor must be square");
    for (std::size_t i = 0; i < l.rows(); ++i) {
        if (l(i, i) < 0.0) throw Error(ErrorKind::InvalidArgument, "negative diagonal in triangular factor");
        for (std::size_t j = i + 1; j < l.cols(); ++j)
            if (l(i, j) != 0.0) throw Error(ErrorKind::InvalidArgument, "nonzero entry above diagonal");
    }
}

SymMatrix LowerTriangular::reconstruct() const {
    return SymMatrix(m_ * m_.transpose());
}

void LowerTriangular::solve_in_place(std::span<double> rhs) const {
    const std::size_t d = dim();
    for (std::size_t i = 0; i < d; ++i) {
        double s = rhs[i];
        for (std::size_t j = 0; j < i; ++j) s -= m_(i, j) * rhs[j];
        if (m_(i, i) == 0.0) throw Error(ErrorKind::SingularMatrix, "zero pivot in triangular solve at " + std::to_string(i));
        rhs[i] = s / m_(i, i);
    }
}

void LowerTriangular::multiply_in_place(std::span<double> rhs) const {
    const std::size_t d = dim();
    for (std::size_t i = d; i-- > 0;) {
        double s = 0.0;
        for (std::size_t j = 0; j <= i; ++j) s += m_(i, j) * rhs[j];
        rhs[i] = s;
    }
}

double default_pivot_tolerance(const SymMatrix& s) {
    double m = 0.0;
    for (std::size_t i = 0; i < s.dim(); ++i) m = std::max(m, s(i, i));
    return 1e-12 * m;
}

CholeskyResult cholesky(const SymMatrix& s, double pivot_tol) {
    if (pivot_tol < 0.0) throw Error(ErrorKind::InvalidArgument, "pivot tolerance must be non-negative");
    const std::size_t d = s.dim();
    Matrix l(d, d);
    std::vector<std::size_t> degenerate;
    for (std::size_t j = 0; j < d; ++j) {
        double pivot = s(j, j);
        for (std::size_t k = 0; k < j; ++k) pivot -= l(j, k) * l(j, k);
        if (pivot < -pivot_tol) {
            throw Error(ErrorKind::NotPSD, "pivot " + std::to_string(j) + " is " + std::to_string(pivot));
        }
        if (pivot <= pivot_tol) {
            degenerate.push_back(j);
            continue;  // column stays zero
        }
        const double diag = std::sqrt(pivot);
        l(j, j) = diag;
        for (std::size_t i = j + 1; i < d; ++i) {
            double v = s(i, j);
            for (std::size_t k = 0; k < j; ++k) v -= l(i, k) * l(j, k);
            l(i, j) = v / diag;
        }
    }
    return {LowerTriangular(l), std::move(degenerate)};
}

CholeskyResult cholesky(const SymMatrix& s) {
    return cholesky(s, default_pivot_tolerance(s));
}

SymEigen symmetric_eigen(const SymMatrix& s) {
    const std::size_t d = s.dim();
    Matrix a = s.matrix();
    Matrix v = Matrix::identity(d);

    auto off_diagonal = [&] {
        double off = 0.0;
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                if (i != j) off += a(i, j) * a(i, j);
        return off;
    };
    const double scale = std::max(a.frobenius_norm(), 1e-300);

    for (int sweep = 0; sweep < 100; ++sweep) {
        if (std::sqrt(off_diagonal()) <= 1e-15 * scale) break;
        for (std::size_t p = 0; p < d; ++p) {
            for (std::size_t q = p + 1; q < d; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double sn = t * c;
                for (std::size_t k = 0; k < d; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - sn * akq;
                    a(k, q) = sn * akp + c * akq;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - sn * aqk;
                    a(q, k) = sn * apk + c * aqk;
                }
                for (std::size_t k = 0; k < d; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - sn * vkq;
                    v(k, q) = sn * vkp + c * vkq;
                }
            }
        }
    }
    Vector values(d);
    for (std::size_t i = 0; i < d; ++i) values[i] = a(i, i);
    return {std::move(values), std::move(v)};
}

SymMatrix nearest_psd(const SymMatrix& s, double eig_floor) {
    const SymEigen eig = symmetric_eigen(s);
    if (std::all_of(eig.values.begin(), eig.values.end(), [&](double l) { return l >= eig_floor; })) {
        return s;
    }
    const std::size_t d = s.dim();
    Matrix r(d, d);
    for (std::size_t k = 0; k < d; ++k) {
        const double lambda = std::max(eig.values[k], eig_floor);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j) r(i, j) += lambda * eig.vectors(i, k) * eig.vectors(j, k);
    }
    return SymMatrix(r);
}

bool is_psd(const SymMatrix& s) {
    if (s.dim() == 0) return true;
    const double tol = 1e-12 * s.max_abs_diagonal();
    const SymEigen eig = symmetric_eigen(s);
    return *std::min_element(eig.values.begin(), eig.values.end()) >= -tol;
}

bool rates_coincide(double alpha, double delta) noexcept {
    const double scale = std::max({1.0, std::abs(alpha), std::abs(delta)});
    return std::abs(delta - alpha) < 1e-8 * scale;
}

UpperTri2x2Exp expm_2x2_upper(double alpha, double beta, double delta, double t) {
    if (t < 0.0) throw Error(ErrorKind::InvalidArgument, "expm_2x2_upper needs t >= 0");
    UpperTri2x2Exp e;
    e.slow = std::exp(alpha * t);
    e.fast = std::exp(delta * t);
    if (beta == 0.0 || t == 0.0) {
        e.coupling = 0.0;
    } else if (rates_coincide(alpha, delta)) {
        // expm1(x) / x by its Taylor series; exact at x == 0
        const double x = (delta - alpha) * t;
        e.coupling = beta * t * e.slow * (1.0 + x / 2.0 * (1.0 + x / 3.0 * (1.0 + x / 4.0)));
    } else {
        // exp(delta t) - exp(alpha t) == exp(alpha t) * expm1((delta - alpha) t)
        e.coupling = beta / (delta - alpha) * e.slow * std::expm1((delta - alpha) * t);
    }
    return e;
}

Vector lu_solve(const Matrix& a, std::span<const double> rhs) {
    if (!a.square() || a.rows() != rhs.size()) throw Error(ErrorKind::InvalidArgument, "lu_solve shape mismatch");
    const std::size_t d = a.rows();
    Matrix lu = a;
    Vector x(rhs.begin(), rhs.end());
    const double scale = std::max(a.inf_norm(), 1e-300);
    for (std::size_t c = 0; c < d; ++c) {
        std::size_t piv = c;
        for (std::size_t r = c + 1; r < d; ++r)
            if (std::abs(lu(r, c)) > std::abs(lu(piv, c))) piv = r;
        if (std::abs(lu(piv, c)) <= 1e-14 * scale) {
            throw Error(ErrorKind::SingularMatrix, "matrix is numerically singular at column " + std::to_string(c));
        }
        if (piv != c) {
            for (std::size_t j = 0; j < d; ++j) std::swap(lu(c, j), lu(piv, j));
            std::swap(x[c], x[piv]);
        }
        for (std::size_t r = c + 1; r < d; ++r) {
            const double f = lu(r, c) / lu(c, c);
            for (std::size_t j = c; j < d; ++j) lu(r, j) -= f * lu(c, j);
            x[r] -= f * x[c];
        }
    }
    for (std::size_t i = d; i-- > 0;) {
        double s = x[i];
        for (std::size_t j = i + 1; j < d; ++j) s -= lu(i, j) * x[j];
        x[i] = s / lu(i, i);
    }
    return x;
}

Vector solve_linear_recursion(const Matrix& a, const Matrix& b_mat, std::span<const double> b,
                              double eps, std::span<const double> eps0,
                              std::span<const double> e0, std::size_t k) {
    const std::size_t d = e0.size();
    if (a.rows() != d || b_mat.rows() != d || b.size() != d || eps0.size() != d) {
        throw Error(ErrorKind::InvalidArgument, "solve_linear_recursion dimension mismatch");
    }
    // Columns of A^-1 B, and A^-1 (b .* eps0).
    Matrix step(d, d);
    for (std::size_t j = 0; j < d; ++j) {
        Vector col(d);
        for (std::size_t i = 0; i < d; ++i) col[i] = b_mat(i, j);
        const Vector sol = lu_solve(a, col);
        for (std::size_t i = 0; i < d; ++i) step(i, j) = sol[i];
    }
    Vector forcing(d);
    for (std::size_t i = 0; i < d; ++i) forcing[i] = b[i] * eps0[i];
    const Vector g = lu_solve(a, forcing);

    Vector homogeneous(e0.begin(), e0.end());
    for (std::size_t i = 0; i < k; ++i) homogeneous = step * homogeneous;

    Vector result = homogeneous;
    Vector term = g;  // (A^-1 B)^i g
    for (std::size_t i = 0; i < k; ++i) {
        const double w = std::pow(eps, static_cast<double>(k - 1 - i));
        for (std::size_t r = 0; r < d; ++r) result[r] += term[r] * w;
        term = step * term;
    }
    return result;
}

}  // namespace mmpr
