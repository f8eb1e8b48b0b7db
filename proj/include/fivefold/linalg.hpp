#pragma once

#include <stdexcept>
#include <utility>
#include <vector>

#include "field.hpp"

namespace fivefold {

template <class T>
using Vec = std::vector<T>;

template <class T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols) : r_(rows), c_(cols), a_(static_cast<std::size_t>(rows) * cols, T(0)) {}

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = T(1);
    return m;
  }

  // Rows given as vectors of equal length.
  static Matrix from_rows(const std::vector<Vec<T>>& rows, int cols = -1) {
    int nc = rows.empty() ? (cols < 0 ? 0 : cols) : static_cast<int>(rows[0].size());
    Matrix m(static_cast<int>(rows.size()), nc);
    for (int i = 0; i < m.r_; ++i) {
      if (static_cast<int>(rows[i].size()) != nc) throw std::invalid_argument("ragged rows");
      for (int j = 0; j < nc; ++j) m(i, j) = rows[i][j];
    }
    return m;
  }

  int rows() const { return r_; }
  int cols() const { return c_; }
  T& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * c_ + j]; }
  const T& operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * c_ + j]; }

  Vec<T> row(int i) const { return Vec<T>(a_.begin() + static_cast<std::ptrdiff_t>(i) * c_, a_.begin() + static_cast<std::ptrdiff_t>(i + 1) * c_); }
  Vec<T> col(int j) const {
    Vec<T> v(r_);
    for (int i = 0; i < r_; ++i) v[i] = (*this)(i, j);
    return v;
  }

  Matrix transpose() const {
    Matrix t(c_, r_);
    for (int i = 0; i < r_; ++i)
      for (int j = 0; j < c_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  Matrix operator*(const Matrix& o) const {
    if (c_ != o.r_) throw std::invalid_argument("matrix product shape mismatch");
    Matrix p(r_, o.c_);
    for (int i = 0; i < r_; ++i)
      for (int k = 0; k < c_; ++k) {
        if (is_zero((*this)(i, k))) continue;
        for (int j = 0; j < o.c_; ++j) p(i, j) += (*this)(i, k) * o(k, j);
      }
    return p;
  }

  Vec<T> operator*(const Vec<T>& v) const {
    if (static_cast<int>(v.size()) != c_) throw std::invalid_argument("matrix-vector shape mismatch");
    Vec<T> out(r_, T(0));
    for (int i = 0; i < r_; ++i)
      for (int j = 0; j < c_; ++j) out[i] += (*this)(i, j) * v[j];
    return out;
  }

  Matrix operator+(const Matrix& o) const {
    Matrix s = *this;
    for (std::size_t i = 0; i < a_.size(); ++i) s.a_[i] += o.a_[i];
    return s;
  }
  Matrix operator-(const Matrix& o) const {
    Matrix s = *this;
    for (std::size_t i = 0; i < a_.size(); ++i) s.a_[i] -= o.a_[i];
    return s;
  }
  Matrix scaled(const T& c) const {
    Matrix s = *this;
    for (auto& x : s.a_) x *= c;
    return s;
  }

  bool operator==(const Matrix& o) const { return r_ == o.r_ && c_ == o.c_ && a_ == o.a_; }

  bool is_zero_matrix() const {
    for (const auto& x : a_)
      if (!is_zero(x)) return false;
    return true;
  }

 private:
  int r_ = 0, c_ = 0;
  std::vector<T> a_;
};

template <class T>
struct Echelon {
  Matrix<T> m;              // reduced row echelon form
  std::vector<int> pivots;  // pivot column of each nonzero row
  T det_factor = T(1);      // product of scalings/swaps applied (square input only)
};

template <class T>
Echelon<T> rref(Matrix<T> m) {
  Echelon<T> e;
  int r = 0;
  for (int c = 0; c < m.cols() && r < m.rows(); ++c) {
    int piv = -1;
    for (int i = r; i < m.rows(); ++i)
      if (!is_zero(m(i, c))) {
        piv = i;
        break;
      }
    if (piv < 0) continue;
    if (piv != r) {
      for (int j = 0; j < m.cols(); ++j) std::swap(m(piv, j), m(r, j));
      e.det_factor = -e.det_factor;
    }
    T inv = T(1) / m(r, c);
    e.det_factor *= m(r, c);
    for (int j = 0; j < m.cols(); ++j) m(r, j) *= inv;
    for (int i = 0; i < m.rows(); ++i) {
      if (i == r || is_zero(m(i, c))) continue;
      T f = m(i, c);
      for (int j = 0; j < m.cols(); ++j) m(i, j) -= f * m(r, j);
    }
    e.pivots.push_back(c);
    ++r;
  }
  e.m = std::move(m);
  return e;
}

template <class T>
int rank(const Matrix<T>& m) {
  return static_cast<int>(rref(m).pivots.size());
}

template <class T>
T det(const Matrix<T>& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("det of non-square matrix");
  auto e = rref(m);
  if (static_cast<int>(e.pivots.size()) < m.rows()) return T(0);
  return e.det_factor;
}

// Basis of {x : m x = 0}, one vector per free column.
template <class T>
std::vector<Vec<T>> kernel(const Matrix<T>& m) {
  auto e = rref(m);
  std::vector<bool> is_pivot(m.cols(), false);
  for (int c : e.pivots) is_pivot[c] = true;
  std::vector<Vec<T>> basis;
  for (int f = 0; f < m.cols(); ++f) {
    if (is_pivot[f]) continue;
    Vec<T> v(m.cols(), T(0));
    v[f] = T(1);
    for (std::size_t i = 0; i < e.pivots.size(); ++i) v[e.pivots[i]] = -e.m(static_cast<int>(i), f);
    basis.push_back(std::move(v));
  }
  return basis;
}

template <class T>
Matrix<T> inverse(const Matrix<T>& m) {
  int n = m.rows();
  if (n != m.cols()) throw std::invalid_argument("inverse of non-square matrix");
  Matrix<T> aug(n, 2 * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) aug(i, j) = m(i, j);
    aug(i, n + i) = T(1);
  }
  auto e = rref(aug);
  if (static_cast<int>(e.pivots.size()) < n || e.pivots[n - 1] != n - 1) throw std::domain_error("singular matrix");
  Matrix<T> inv(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) inv(i, j) = e.m(i, n + j);
  return inv;
}

// Solves m x = b for one solution, or nullopt when inconsistent.
template <class T>
std::optional<Vec<T>> solve(const Matrix<T>& m, const Vec<T>& b) {
  Matrix<T> aug(m.rows(), m.cols() + 1);
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) aug(i, j) = m(i, j);
    aug(i, m.cols()) = b[i];
  }
  auto e = rref(aug);
  if (!e.pivots.empty() && e.pivots.back() == m.cols()) return std::nullopt;
  Vec<T> x(m.cols(), T(0));
  for (std::size_t i = 0; i < e.pivots.size(); ++i) x[e.pivots[i]] = e.m(static_cast<int>(i), m.cols());
  return x;
}

template <class T>
T dot(const Vec<T>& a, const Vec<T>& b) {
  T s(0);
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

template <class T>
bool is_zero_vec(const Vec<T>& v) {
  for (const auto& x : v)
    if (!is_zero(x)) return false;
  return true;
}

// Exact Pfaffian by pivoted block elimination: Pf(A) = a01 * Pf(D + C B^-1 C^T).
template <class T>
T pfaffian(Matrix<T> a) {
  int n = a.rows();
  if (n != a.cols()) throw std::invalid_argument("pfaffian of non-square matrix");
  if (n % 2) throw std::invalid_argument("pfaffian of odd-size matrix");
  for (int i = 0; i < n; ++i) {
    if (!is_zero(a(i, i))) throw std::invalid_argument("pfaffian: matrix is not antisymmetric");
    for (int j = i + 1; j < n; ++j)
      if (!(a(i, j) == -a(j, i))) throw std::invalid_argument("pfaffian: matrix is not antisymmetric");
  }
  T result(1);
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;
  // Work on the active index list; each step removes two indices.
  while (!idx.empty()) {
    int m = static_cast<int>(idx.size());
    int k = -1;
    for (int j = 1; j < m; ++j)
      if (!is_zero(a(idx[0], idx[j]))) {
        k = j;
        break;
      }
    if (k < 0) return T(0);
    if (k != 1) {
      // swapping two indices of the active block flips the sign
      std::swap(idx[1], idx[k]);
      result = -result;
    }
    int i0 = idx[0], i1 = idx[1];
    T p = a(i0, i1);
    result *= p;
    T pinv = T(1) / p;
    for (int s = 2; s < m; ++s)
      for (int t = s + 1; t < m; ++t) {
        int u = idx[s], v = idx[t];
        T upd = (a(u, i1) * a(v, i0) - a(u, i0) * a(v, i1)) * pinv;
        a(u, v) += upd;
        a(v, u) = -a(u, v);
      }
    idx.erase(idx.begin(), idx.begin() + 2);
  }
  return result;
}

}  // namespace fivefold
