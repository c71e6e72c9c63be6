#include "amc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "amc/ops.hpp"

namespace amc {

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

void require_same_dim(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size())
    throw ShapeError(std::string(what) + ": dimension mismatch " + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()));
}

struct AmcTerm {
  double loss;
  double dloss_du;  // derivative w.r.t. the inner product
};

// The clamp is straight-through: dtheta/du is evaluated at the clamped value, which
// bounds it by 1/sqrt(1 - (1 - eps)^2) ~ 2.2e3.
AmcTerm amc_term(double u, bool similar, double margin_g) {
  const double uc = std::clamp(u, -1.0 + kArccosClamp, 1.0 - kArccosClamp);
  const double theta = std::acos(uc);
  const double dtheta_du = -1.0 / std::sqrt(1.0 - uc * uc);
  if (similar) return {theta * theta, 2.0 * theta * dtheta_du};
  const double gap = margin_g - theta;
  if (gap <= 0.0) return {0.0, 0.0};
  return {gap * gap, -2.0 * gap * dtheta_du};
}

struct EucdTerm {
  double loss;
  double dloss_ddist2;  // derivative w.r.t. the squared distance
};

EucdTerm eucd_term(double dist2, bool similar, double margin_e) {
  if (similar) return {dist2, 1.0};
  const double dist = std::sqrt(dist2);
  const double gap = margin_e - dist;
  if (gap <= 0.0) return {0.0, 0.0};
  // d/d(dist^2) of (m - dist)^2 = -(m - dist)/dist; zero subgradient at coincident points.
  return {gap * gap, dist > 0.0 ? -gap / dist : 0.0};
}

}  // namespace

LossMode parse_loss_mode(const std::string& s) {
  if (s == "ce") return LossMode::ce;
  if (s == "eucd") return LossMode::eucd;
  if (s == "amc") return LossMode::amc;
  throw ConfigError("unknown loss mode '" + s + "' (expected ce, eucd or amc)");
}

std::string to_string(LossMode mode) {
  switch (mode) {
    case LossMode::ce: return "ce";
    case LossMode::eucd: return "eucd";
    case LossMode::amc: return "amc";
  }
  return "?";
}

void validate(const LossConfig& cfg) {
  if (!(cfg.lambda >= 0.0) || !std::isfinite(cfg.lambda))
    throw ConfigError("lambda must be a finite value >= 0");
  if (!(cfg.margin_g > 0.0 && cfg.margin_g <= std::numbers::pi))
    throw ConfigError("margin_g must be in (0, pi]");
  if (!(cfg.margin_e >= 0.0) || !std::isfinite(cfg.margin_e))
    throw ConfigError("margin_e must be a finite value >= 0");
}

UnitFeature normalize(std::span<const double> x) {
  const double norm = std::sqrt(dot(x, x));
  if (!(norm > kMinFeatureNorm))
    throw DegenerateFeatureError("normalize: feature norm " + std::to_string(norm) +
                                 " is too small to project onto the sphere");
  std::vector<double> z(x.begin(), x.end());
  for (auto& v : z) v /= norm;
  return UnitFeature(std::move(z));
}

double geodesic(std::span<const double> zi, std::span<const double> zj) {
  require_same_dim(zi, zj, "geodesic");
  for (auto z : {zi, zj})
    if (std::abs(std::sqrt(dot(z, z)) - 1.0) > kUnitTolerance)
      throw ContractError("geodesic: argument is not unit norm");
  const double u = std::clamp(dot(zi, zj), -1.0 + kArccosClamp, 1.0 - kArccosClamp);
  return std::acos(u);
}

double eucd_contrastive(std::span<const double> xi, std::span<const double> xj, bool similar,
                        double margin_e) {
  require_same_dim(xi, xj, "eucd_contrastive");
  double d2 = 0.0;
  for (std::size_t k = 0; k < xi.size(); ++k) d2 += (xi[k] - xj[k]) * (xi[k] - xj[k]);
  return eucd_term(d2, similar, margin_e).loss;
}

double amc_loss(std::span<const double> zi, std::span<const double> zj, bool similar,
                double margin_g) {
  require_same_dim(zi, zj, "amc_loss");
  return amc_term(dot(zi, zj), similar, margin_g).loss;
}

double cross_entropy(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "cross_entropy");
  const std::size_t n = logits.dim(0), c = logits.dim(1);
  if (labels.size() != n) throw ShapeError("cross_entropy: label count does not match batch");
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= c)
      throw ConfigError("cross_entropy: label " + std::to_string(labels[i]) + " out of range");
    double mx = logits.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += std::exp(logits.at(i, j) - mx);
    total += mx + std::log(s) - logits.at(i, static_cast<std::size_t>(labels[i]));
  }
  return total / static_cast<double>(n);
}

std::size_t argmax_row(const Tensor& scores, std::size_t i) {
  const std::size_t c = scores.dim(1);
  std::size_t best = 0;
  for (std::size_t j = 1; j < c; ++j)
    if (scores.at(i, j) > scores.at(i, best)) best = j;
  return best;
}

PairSplit split_pairs(std::size_t batch_size, Rng& rng) {
  PairSplit split;
  if (batch_size < 2) return split;
  std::vector<std::size_t> order(batch_size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  const std::size_t half = batch_size / 2;
  split.first.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(half));
  split.second.assign(order.begin() + static_cast<std::ptrdiff_t>(half),
                      order.begin() + static_cast<std::ptrdiff_t>(2 * half));
  return split;
}

PairBatch similarity_from_predictions(const Tensor& probs, const PairSplit& split) {
  require_rank(probs, 2, "similarity_from_predictions");
  if (split.first.size() != split.second.size())
    throw ShapeError("similarity_from_predictions: halves differ in size");
  PairBatch out;
  out.pairs.reserve(split.first.size());
  for (std::size_t k = 0; k < split.first.size(); ++k) {
    const std::size_t i = split.first[k], j = split.second[k];
    if (i >= probs.dim(0) || j >= probs.dim(0))
      throw ShapeError("similarity_from_predictions: index out of range");
    out.pairs.push_back({i, j, argmax_row(probs, i) == argmax_row(probs, j)});
  }
  return out;
}

double combined_loss(double ce_loss, std::span<const double> pair_losses, double w_t,
                     const LossConfig& cfg, std::size_t batch_size) {
  if (cfg.mode == LossMode::ce || cfg.lambda == 0.0) return ce_loss;
  if (batch_size == 0) throw ConfigError("combined_loss: batch size must be positive");
  double s = 0.0;
  for (double v : pair_losses) s += v;
  return ce_loss + w_t * cfg.lambda * (1.0 / static_cast<double>(batch_size)) * s;
}

namespace ops {

Var cross_entropy(Var logits, std::span<const int> labels) {
  const Tensor& x = logits.value();
  const double loss = amc::cross_entropy(x, labels);
  std::vector<int> saved(labels.begin(), labels.end());
  return logits.tape()->record(
      "cross_entropy", Tensor::scalar(loss), {logits},
      [logits, saved = std::move(saved)](const Tensor& dy, std::span<Tensor* const> grads) {
        const Tensor p = softmax_rows(logits.value());
        Tensor& dx = *grads[0];
        const std::size_t n = p.dim(0), c = p.dim(1);
        const double k = dy[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < c; ++j)
            dx.at(i, j) += k * (p.at(i, j) - (static_cast<int>(j) == saved[i] ? 1.0 : 0.0));
      });
}

Var normalize_rows(Var features) {
  const Tensor& x = features.value();
  require_rank(x, 2, "normalize_rows");
  const std::size_t n = x.dim(0), p = x.dim(1);
  Tensor z(x.shape());
  std::vector<double> norms(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t k = 0; k < p; ++k) s += x.at(i, k) * x.at(i, k);
    const double norm = std::sqrt(s);
    if (!(norm > kMinFeatureNorm))
      throw DegenerateFeatureError("normalize_rows: row " + std::to_string(i) +
                                   " has near-zero norm");
    norms[i] = norm;
    for (std::size_t k = 0; k < p; ++k) z.at(i, k) = x.at(i, k) / norm;
  }
  Tensor saved = z;
  return features.tape()->record(
      "normalize_rows", std::move(z), {features},
      [n, p, saved = std::move(saved), norms = std::move(norms)](const Tensor& dy,
                                                                 std::span<Tensor* const> grads) {
        // dx = (I - z z^T) dy / ||x||
        Tensor& dx = *grads[0];
        for (std::size_t i = 0; i < n; ++i) {
          double zd = 0.0;
          for (std::size_t k = 0; k < p; ++k) zd += saved.at(i, k) * dy.at(i, k);
          for (std::size_t k = 0; k < p; ++k)
            dx.at(i, k) += (dy.at(i, k) - saved.at(i, k) * zd) / norms[i];
        }
      });
}

Var amc_pair_sum(Var unit_features, const PairBatch& pairs, double margin_g) {
  const Tensor& z = unit_features.value();
  require_rank(z, 2, "amc_pair_sum");
  const std::size_t p = z.dim(1);
  double total = 0.0;
  std::vector<double> coef(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& pr = pairs.pairs[k];
    if (pr.i >= z.dim(0) || pr.j >= z.dim(0)) throw ShapeError("amc_pair_sum: pair index out of range");
    double u = 0.0, ni = 0.0, nj = 0.0;
    for (std::size_t d = 0; d < p; ++d) {
      u += z.at(pr.i, d) * z.at(pr.j, d);
      ni += z.at(pr.i, d) * z.at(pr.i, d);
      nj += z.at(pr.j, d) * z.at(pr.j, d);
    }
    if (std::abs(std::sqrt(ni) - 1.0) > kUnitTolerance || std::abs(std::sqrt(nj) - 1.0) > kUnitTolerance)
      throw ContractError("amc_pair_sum: rows must be unit norm (normalize_rows first)");
    const AmcTerm t = amc_term(u, pr.similar, margin_g);
    total += t.loss;
    coef[k] = t.dloss_du;
  }
  return unit_features.tape()->record(
      "amc_pair_sum", Tensor::scalar(total), {unit_features},
      [unit_features, pairs, coef = std::move(coef), p](const Tensor& dy,
                                                        std::span<Tensor* const> grads) {
        const Tensor& zv = unit_features.value();
        Tensor& dz = *grads[0];
        for (std::size_t k = 0; k < pairs.size(); ++k) {
          const auto& pr = pairs.pairs[k];
          const double c = dy[0] * coef[k];
          if (c == 0.0) continue;
          for (std::size_t d = 0; d < p; ++d) {
            dz.at(pr.i, d) += c * zv.at(pr.j, d);
            dz.at(pr.j, d) += c * zv.at(pr.i, d);
          }
        }
      });
}

Var eucd_pair_sum(Var features, const PairBatch& pairs, double margin_e) {
  const Tensor& x = features.value();
  require_rank(x, 2, "eucd_pair_sum");
  const std::size_t p = x.dim(1);
  double total = 0.0;
  std::vector<double> coef(pairs.size());
  for (std::size_t k = 0; k < pairs.size(); ++k) {
    const auto& pr = pairs.pairs[k];
    if (pr.i >= x.dim(0) || pr.j >= x.dim(0)) throw ShapeError("eucd_pair_sum: pair index out of range");
    double d2 = 0.0;
    for (std::size_t d = 0; d < p; ++d) {
      const double diff = x.at(pr.i, d) - x.at(pr.j, d);
      d2 += diff * diff;
    }
    const EucdTerm t = eucd_term(d2, pr.similar, margin_e);
    total += t.loss;
    coef[k] = t.dloss_ddist2;
  }
  return features.tape()->record(
      "eucd_pair_sum", Tensor::scalar(total), {features},
      [features, pairs, coef = std::move(coef), p](const Tensor& dy,
                                                   std::span<Tensor* const> grads) {
        const Tensor& xv = features.value();
        Tensor& dx = *grads[0];
        for (std::size_t k = 0; k < pairs.size(); ++k) {
          const auto& pr = pairs.pairs[k];
          const double c = 2.0 * dy[0] * coef[k];
          if (c == 0.0) continue;
          for (std::size_t d = 0; d < p; ++d) {
            const double diff = xv.at(pr.i, d) - xv.at(pr.j, d);
            dx.at(pr.i, d) += c * diff;
            dx.at(pr.j, d) -= c * diff;
          }
        }
      });
}

Var combined_loss(Var ce_loss, Var pair_sum, double w_t, const LossConfig& cfg,
                  std::size_t batch_size) {
  if (cfg.mode == LossMode::ce || cfg.lambda == 0.0) return ce_loss;
  if (batch_size == 0) throw ConfigError("combined_loss: batch size must be positive");
  const double factor = w_t * cfg.lambda * (1.0 / static_cast<double>(batch_size));
  return add(ce_loss, scale(pair_sum, factor));
}

}  // namespace ops

}  // namespace amc
