// SPDX-License-Identifier: Apache-2.0
#include "kernels.hpp"

#include <vector>

#ifdef FED_HAVE_CBLAS
#include <cblas.h>
#endif

namespace fed::kernels {

#ifdef FED_HAVE_CBLAS

namespace {

void gemm(CBLAS_TRANSPOSE ta, CBLAS_TRANSPOSE tb, const real* a, const real* b, real* c, std::size_t m,
          std::size_t k, std::size_t p, bool accumulate) {
  const auto mi = static_cast<blasint>(m), ki = static_cast<blasint>(k), pi = static_cast<blasint>(p);
  const blasint lda = ta == CblasNoTrans ? ki : mi;
  const blasint ldb = tb == CblasNoTrans ? pi : ki;
  const real beta = accumulate ? real{1} : real{0};
#ifdef FED_REAL_DOUBLE
  cblas_dgemm(CblasRowMajor, ta, tb, mi, pi, ki, 1.0, a, lda, b, ldb, beta, c, pi);
#else
  cblas_sgemm(CblasRowMajor, ta, tb, mi, pi, ki, 1.0f, a, lda, b, ldb, beta, c, pi);
#endif
}

}  // namespace

void gemm_nn(const real* a, const real* b, real* c, std::size_t m, std::size_t k,
             std::size_t p, bool accumulate) {
  gemm(CblasNoTrans, CblasNoTrans, a, b, c, m, k, p, accumulate);
}

void gemm_nt(const real* a, const real* b, real* c, std::size_t m, std::size_t k,
             std::size_t p, bool accumulate) {
  gemm(CblasNoTrans, CblasTrans, a, b, c, m, k, p, accumulate);
}

void gemm_tn(const real* a, const real* b, real* c, std::size_t m, std::size_t k,
             std::size_t p, bool accumulate) {
  gemm(CblasTrans, CblasNoTrans, a, b, c, m, k, p, accumulate);
}

void set_threads(std::size_t n) { openblas_set_num_threads(static_cast<int>(n)); }

#else

namespace {

inline void store_row(const double* acc, real* c, std::size_t p, bool accumulate) {
  if (accumulate) {
    for (std::size_t j = 0; j < p; ++j) c[j] = static_cast<real>(c[j] + acc[j]);
  } else {
    for (std::size_t j = 0; j < p; ++j) c[j] = static_cast<real>(acc[j]);
  }
}

}  // namespace

void gemm_nn(const real* a, const real* b, real* c, std::size_t m, std::size_t k,
             std::size_t p, bool accumulate) {
  constexpr std::size_t kRows = 4;
  std::vector<double> acc(kRows * p);
  std::vector<double> brow(p);
  std::size_t i = 0;
  for (; i + kRows <= m; i += kRows) {
    std::fill(acc.begin(), acc.end(), 0.0);
    double* acc0 = acc.data();
    double* acc1 = acc0 + p;
    double* acc2 = acc1 + p;
    double* acc3 = acc2 + p;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double a0 = a[i * k + kk], a1 = a[(i + 1) * k + kk];
      const double a2 = a[(i + 2) * k + kk], a3 = a[(i + 3) * k + kk];
      if (a0 == 0.0 && a1 == 0.0 && a2 == 0.0 && a3 == 0.0) continue;
      const real* bsrc = b + kk * p;
      for (std::size_t j = 0; j < p; ++j) brow[j] = bsrc[j];
      for (std::size_t j = 0; j < p; ++j) {
        const double bv = brow[j];
        acc0[j] += a0 * bv;
        acc1[j] += a1 * bv;
        acc2[j] += a2 * bv;
        acc3[j] += a3 * bv;
      }
    }
    for (std::size_t r = 0; r < kRows; ++r) store_row(acc.data() + r * p, c + (i + r) * p, p, accumulate);
  }
  for (; i < m; ++i) {
    std::fill(acc.begin(), acc.begin() + static_cast<std::ptrdiff_t>(p), 0.0);
    const real* arow = a + i * k;
    for (std::size_t kk = 0; kk < k; ++kk) {
      const double av = arow[kk];
      if (av == 0.0) continue;
      const real* bsrc = b + kk * p;
      for (std::size_t j = 0; j < p; ++j) acc[j] += av * static_cast<double>(bsrc[j]);
    }
    store_row(acc.data(), c + i * p, p, accumulate);
  }
}

void gemm_nt(const real* a, const real* b, real* c, std::size_t m, std::size_t k,
             std::size_t p, bool accumulate) {
  std::vector<real> bt(k * p);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t kk = 0; kk < k; ++kk) bt[kk * p + j] = b[j * k + kk];
  }
  gemm_nn(a, bt.data(), c, m, k, p, accumulate);
}

void gemm_tn(const real* a, const real* b, real* c, std::size_t m, std::size_t k,
             std::size_t p, bool accumulate) {
  std::vector<real> at(m * k);
  for (std::size_t kk = 0; kk < k; ++kk) {
    for (std::size_t i = 0; i < m; ++i) at[i * k + kk] = a[kk * m + i];
  }
  gemm_nn(at.data(), b, c, m, k, p, accumulate);
}

void set_threads(std::size_t) {}

#endif

}  // namespace fed::kernels
