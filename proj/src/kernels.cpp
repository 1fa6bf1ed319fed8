#include "emo/kernels.hpp"

#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "emo/error.hpp"

namespace emo::kernels {

namespace {

// Below this many multiply-adds the fork/join overhead dominates.
constexpr std::size_t kParallelWork = 1 << 15;

void check_inner(std::size_t a, std::size_t b, const Matrix& x, const Matrix& y,
                 const char* op) {
  if (a != b)
    throw ShapeError(std::string(op) + ": inner dimension mismatch " +
                     x.shape_string() + " vs " + y.shape_string());
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.rows(), a, b, "matmul");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  Matrix c(m, n);
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  const bool par = m * n * k >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    double* crow = pc + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double av = pa[i * k + p];
      const double* brow = pb + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  Matrix c(a.cols(), b.cols());
  add_matmul_tn(c, a, b);
  return c;
}

void add_matmul_tn(Matrix& c, const Matrix& a, const Matrix& b) {
  check_inner(a.rows(), b.rows(), a, b, "matmul_tn");
  const std::size_t m = a.cols(), k = a.rows(), n = b.cols();
  if (c.rows() != m || c.cols() != n)
    throw ShapeError("add_matmul_tn: accumulator " + c.shape_string());
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  const bool par = m * n * k >= kParallelWork;
#pragma omp parallel if (par)
  {
    std::vector<double> acc(n);
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::size_t p = 0; p < k; ++p) {
        const double av = pa[p * m + i];
        const double* brow = pb + p * n;
        for (std::size_t j = 0; j < n; ++j) acc[j] += av * brow[j];
      }
      double* crow = pc + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += acc[j];
    }
  }
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.cols(), a, b, "matmul_nt");
  const std::size_t m = a.rows(), k = a.cols(), n = b.rows();
  Matrix c(m, n);
  const double* pa = a.data();
  const double* pb = b.data();
  double* pc = c.data();
  const bool par = m * n * k >= kParallelWork;
#pragma omp parallel for schedule(static) if (par)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(m); ++i) {
    const double* arow = pa + i * k;
    for (std::size_t j = 0; j < n; ++j) {
      const double* brow = pb + j * k;
      double s = 0.0;
      for (std::size_t p = 0; p < k; ++p) s += arow[p] * brow[p];
      pc[i * n + j] = s;
    }
  }
  return c;
}

void add_row_broadcast(Matrix& y, const Matrix& bias) {
  if (bias.rows() != 1 || bias.cols() != y.cols())
    throw ShapeError("bias " + bias.shape_string() + " for " + y.shape_string());
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] += bias(0, c);
  }
}

void add_column_sums(Matrix& acc, const Matrix& m) {
  if (acc.rows() != 1 || acc.cols() != m.cols())
    throw ShapeError("column-sum accumulator " + acc.shape_string() + " for " +
                     m.shape_string());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) acc(0, c) += row[c];
  }
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void set_num_threads(int n) {
#ifdef _OPENMP
  if (n > 0) omp_set_num_threads(n);
#else
  (void)n;
#endif
}

namespace reference {

Matrix matmul(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.rows(), a, b, "matmul");
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(p, j);
      c(i, j) = s;
    }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  Matrix c(a.cols(), b.cols());
  add_matmul_tn(c, a, b);
  return c;
}

void add_matmul_tn(Matrix& c, const Matrix& a, const Matrix& b) {
  check_inner(a.rows(), b.rows(), a, b, "matmul_tn");
  if (c.rows() != a.cols() || c.cols() != b.cols())
    throw ShapeError("add_matmul_tn: accumulator " + c.shape_string());
  for (std::size_t i = 0; i < a.cols(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.rows(); ++p) s += a(p, i) * b(p, j);
      c(i, j) += s;
    }
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  check_inner(a.cols(), b.cols(), a, b, "matmul_nt");
  Matrix c(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t p = 0; p < a.cols(); ++p) s += a(i, p) * b(j, p);
      c(i, j) = s;
    }
  return c;
}

}  // namespace reference

}  // namespace emo::kernels
