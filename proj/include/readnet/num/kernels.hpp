#pragma once

#include "readnet/num/tensor.hpp"

namespace readnet::num {

// Dense GEMM: out (+)= op(a) * op(b), op = optional transpose.
//
// matmul_into splits output rows across OpenMP threads; every output element
// is still reduced in the same order as matmul_reference, so the two agree
// bit-for-bit at any thread count.
void matmul_into(const Tensor& a, bool transpose_a, const Tensor& b, bool transpose_b, Tensor& out,
                 bool accumulate = false);

/// Serial reference kept for tests and benchmarks.
void matmul_reference(const Tensor& a, bool transpose_a, const Tensor& b, bool transpose_b, Tensor& out,
                      bool accumulate = false);

/// Work size (m*n*k) below which matmul_into stays on the calling thread.
inline constexpr std::size_t kParallelGemmThreshold = 1u << 15;

}  // namespace readnet::num
