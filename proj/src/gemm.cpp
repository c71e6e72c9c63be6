#include "gemm.hpp"

#include <Eigen/Core>
#include <vector>

namespace amc::detail {

namespace {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
void gemm_impl(const T* a, bool trans_a, const T* b, bool trans_b, RowMat<T>& out,
               std::size_t m, std::size_t n, std::size_t k) {
  using CMap = Eigen::Map<const RowMat<T>>;
  const auto mi = static_cast<Eigen::Index>(m);
  const auto ni = static_cast<Eigen::Index>(n);
  const auto ki = static_cast<Eigen::Index>(k);
  CMap am = trans_a ? CMap(a, ki, mi) : CMap(a, mi, ki);
  CMap bm = trans_b ? CMap(b, ni, ki) : CMap(b, ki, ni);
  if (trans_a && trans_b)
    out.noalias() = am.transpose() * bm.transpose();
  else if (trans_a)
    out.noalias() = am.transpose() * bm;
  else if (trans_b)
    out.noalias() = am * bm.transpose();
  else
    out.noalias() = am * bm;
}

}  // namespace

void gemm(Precision precision, const double* a, bool trans_a, const double* b, bool trans_b,
          double* c, std::size_t m, std::size_t n, std::size_t k, bool accumulate) {
  const auto mi = static_cast<Eigen::Index>(m);
  const auto ni = static_cast<Eigen::Index>(n);
  Eigen::Map<RowMat<double>> cm(c, mi, ni);
  if (precision == Precision::fp64) {
    using CMap = Eigen::Map<const RowMat<double>>;
    const auto ki = static_cast<Eigen::Index>(k);
    CMap am = trans_a ? CMap(a, ki, mi) : CMap(a, mi, ki);
    CMap bm = trans_b ? CMap(b, ni, ki) : CMap(b, ki, ni);
    auto assign = [&](auto&& l, auto&& r) {
      if (accumulate)
        cm.noalias() += l * r;
      else
        cm.noalias() = l * r;
    };
    if (trans_a && trans_b)
      assign(am.transpose(), bm.transpose());
    else if (trans_a)
      assign(am.transpose(), bm);
    else if (trans_b)
      assign(am, bm.transpose());
    else
      assign(am, bm);
    return;
  }
  std::vector<float> af(a, a + m * k);
  std::vector<float> bf(b, b + k * n);
  RowMat<float> out(mi, ni);
  gemm_impl<float>(af.data(), trans_a, bf.data(), trans_b, out, m, n, k);
  if (accumulate)
    cm += out.cast<double>();
  else
    cm = out.cast<double>();
}

}  // namespace amc::detail
