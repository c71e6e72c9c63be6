#pragma once

#include <cstddef>

#include "amc/autograd.hpp"

namespace amc::detail {

/// C[m,n] (+)= op(A) * op(B) for row-major buffers, where op(A) is m x k and
/// op(B) is k x n. `accumulate` adds into C instead of overwriting it.
void gemm(Precision precision, const double* a, bool trans_a, const double* b, bool trans_b,
          double* c, std::size_t m, std::size_t n, std::size_t k, bool accumulate);

}  // namespace amc::detail
