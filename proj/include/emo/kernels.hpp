#pragma once

#include "emo/matrix.hpp"

// Dense products used by every layer. The default entry points are
// OpenMP-parallel over output rows; emo::kernels::reference holds the plain
// serial loops they are tested against. Both accumulate each output element
// in the same k order, so results are bit-identical regardless of thread
// count.
namespace emo::kernels {

// C = A * B
Matrix matmul(const Matrix& a, const Matrix& b);
// C = A^T * B
Matrix matmul_tn(const Matrix& a, const Matrix& b);
// C = A * B^T
Matrix matmul_nt(const Matrix& a, const Matrix& b);

// C += A^T * B (gradient accumulation for weights).
void add_matmul_tn(Matrix& c, const Matrix& a, const Matrix& b);

// y[r, :] += bias for every row.
void add_row_broadcast(Matrix& y, const Matrix& bias);
// acc[0, :] += column sums of m.
void add_column_sums(Matrix& acc, const Matrix& m);

int max_threads();
void set_num_threads(int n);

namespace reference {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
void add_matmul_tn(Matrix& c, const Matrix& a, const Matrix& b);
}  // namespace reference

}  // namespace emo::kernels
