#include "readnet/num/kernels.hpp"

#include <stdexcept>
#include <string>

namespace readnet::num {
namespace {

struct GemmDims {
  std::size_t m, n, k;
};

GemmDims check_dims(const Tensor& a, bool ta, const Tensor& b, bool tb, const Tensor& out) {
  const std::size_t am = ta ? a.cols() : a.rows();
  const std::size_t ak = ta ? a.rows() : a.cols();
  const std::size_t bk = tb ? b.cols() : b.rows();
  const std::size_t bn = tb ? b.rows() : b.cols();
  if (ak != bk || out.rows() != am || out.cols() != bn) {
    throw std::invalid_argument("matmul: shape mismatch " + shape_string(a.shape()) + (ta ? "^T" : "") + " x " +
                                shape_string(b.shape()) + (tb ? "^T" : "") + " -> " + shape_string(out.shape()));
  }
  return {am, bn, ak};
}

// One output row. Shared by both drivers so the reduction order is identical.
inline void gemm_row(std::size_t i, const GemmDims& d, const double* a, bool ta, const double* b, bool tb,
                     double* out, bool accumulate) {
  const std::size_t lda = ta ? d.m : d.k;
  const std::size_t ldb = tb ? d.k : d.n;
  double* c = out + i * d.n;
  if (!accumulate) {
    for (std::size_t j = 0; j < d.n; ++j) c[j] = 0.0;
  }
  if (!tb) {
    for (std::size_t p = 0; p < d.k; ++p) {
      const double av = ta ? a[p * lda + i] : a[i * lda + p];
      if (av == 0.0) continue;
      const double* brow = b + p * ldb;
      for (std::size_t j = 0; j < d.n; ++j) c[j] += av * brow[j];
    }
  } else {
    for (std::size_t j = 0; j < d.n; ++j) {
      const double* brow = b + j * ldb;
      double acc = 0.0;
      for (std::size_t p = 0; p < d.k; ++p) {
        const double av = ta ? a[p * lda + i] : a[i * lda + p];
        acc += av * brow[p];
      }
      c[j] += acc;
    }
  }
}

}  // namespace

void matmul_into(const Tensor& a, bool transpose_a, const Tensor& b, bool transpose_b, Tensor& out,
                 bool accumulate) {
  const auto d = check_dims(a, transpose_a, b, transpose_b, out);
  const double* ap = a.data().data();
  const double* bp = b.data().data();
  double* op = out.data().data();
  const long rows = static_cast<long>(d.m);
  const bool parallel = d.m * d.n * d.k >= kParallelGemmThreshold && d.m > 1;
#pragma omp parallel for schedule(static) if (parallel)
  for (long i = 0; i < rows; ++i) {
    gemm_row(static_cast<std::size_t>(i), d, ap, transpose_a, bp, transpose_b, op, accumulate);
  }
}

void matmul_reference(const Tensor& a, bool transpose_a, const Tensor& b, bool transpose_b, Tensor& out,
                      bool accumulate) {
  const auto d = check_dims(a, transpose_a, b, transpose_b, out);
  for (std::size_t i = 0; i < d.m; ++i) {
    gemm_row(i, d, a.data().data(), transpose_a, b.data().data(), transpose_b, out.data().data(), accumulate);
  }
}

}  // namespace readnet::num
