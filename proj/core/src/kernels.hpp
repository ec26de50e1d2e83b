// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

#include "fed/tensor.hpp"

// Dense GEMM variants, backed by OpenBLAS when available and otherwise by a
// blocked loop with 64-bit accumulation. `accumulate` adds into C
// instead of overwriting it.
namespace fed::kernels {

// C[m x p] = A[m x k] * B[k x p]
void gemm_nn(const real* a, const real* b, real* c, std::size_t m, std::size_t k,
             std::size_t p, bool accumulate);
// C[m x p] = A[m x k] * B[p x k]^T
void gemm_nt(const real* a, const real* b, real* c, std::size_t m, std::size_t k,
             std::size_t p, bool accumulate);
// C[m x p] = A[k x m]^T * B[k x p]
void gemm_tn(const real* a, const real* b, real* c, std::size_t m, std::size_t k,
             std::size_t p, bool accumulate);

// Worker threads for the BLAS backend; a no-op for the built-in loop.
void set_threads(std::size_t n);

}  // namespace fed::kernels
