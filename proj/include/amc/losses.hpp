#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "amc/autograd.hpp"
#include "amc/rng.hpp"

namespace amc {

/// Raised when a feature vector is too close to zero to project onto the sphere.
class DegenerateFeatureError : public Error {
 public:
  using Error::Error;
};

/// Clamp applied to inner products before arccos.
inline constexpr double kArccosClamp = 1e-7;
/// Smallest norm accepted by normalize().
inline constexpr double kMinFeatureNorm = 1e-12;
/// Tolerance on ||z|| - 1 accepted by geodesic().
inline constexpr double kUnitTolerance = 1e-4;

/// A point on the unit hypersphere; only obtainable through normalize().
class UnitFeature {
 public:
  std::span<const double> values() const { return z_; }
  std::size_t dim() const { return z_.size(); }
  double operator[](std::size_t i) const { return z_[i]; }

 private:
  explicit UnitFeature(std::vector<double> z) : z_(std::move(z)) {}
  friend UnitFeature normalize(std::span<const double> x);
  std::vector<double> z_;
};

enum class LossMode { ce, eucd, amc };

LossMode parse_loss_mode(const std::string& s);
std::string to_string(LossMode mode);

struct LossConfig {
  LossMode mode = LossMode::amc;
  double lambda = 0.1;
  double margin_g = 0.5;  // radians
  double margin_e = 1.0;
};

/// Throws ConfigError when a field is out of its domain.
void validate(const LossConfig& cfg);

/// One element-wise pair from the split mini-batch.
struct Pair {
  std::size_t i;  // index into the mini-batch (first half)
  std::size_t j;  // index into the mini-batch (second half)
  bool similar;   // S_ij
};

struct PairBatch {
  std::vector<Pair> pairs;
  std::size_t size() const { return pairs.size(); }
  bool empty() const { return pairs.empty(); }
};

/// The two halves of a shuffled mini-batch; first[k] pairs with second[k].
struct PairSplit {
  std::vector<std::size_t> first;
  std::vector<std::size_t> second;
};

// --- Per-vector reference functions -------------------------------------------------

UnitFeature normalize(std::span<const double> x);

/// Arc length between two unit vectors, arccos of the clamped inner product.
double geodesic(std::span<const double> zi, std::span<const double> zj);
inline double geodesic(const UnitFeature& a, const UnitFeature& b) {
  return geodesic(a.values(), b.values());
}

/// S=1: ||xi - xj||^2;  S=0: max(0, m_e - ||xi - xj||)^2.
double eucd_contrastive(std::span<const double> xi, std::span<const double> xj, bool similar,
                        double margin_e);

/// S=1: theta^2;  S=0: max(0, m_g - theta)^2 with theta = geodesic(zi, zj).
double amc_loss(std::span<const double> zi, std::span<const double> zj, bool similar,
                double margin_g);
inline double amc_loss(const UnitFeature& a, const UnitFeature& b, bool similar, double margin_g) {
  return amc_loss(a.values(), b.values(), similar, margin_g);
}

/// Mean negative log-likelihood over the batch, via log-sum-exp.
double cross_entropy(const Tensor& logits, std::span<const int> labels);

/// argmax of row `i`, lowest index on ties.
std::size_t argmax_row(const Tensor& scores, std::size_t i);

/// Shuffles [0, batch_size) and splits it into two halves; an odd trailing element
/// is dropped. Fewer than 2 samples yields an empty split.
PairSplit split_pairs(std::size_t batch_size, Rng& rng);

/// S_ij = 1 iff the predicted classes (row argmax) of i and j agree.
PairBatch similarity_from_predictions(const Tensor& probs, const PairSplit& split);

/// L_C + w_t * lambda * (1/|B|) * sum(pair_losses). Returns L_C unchanged in ce mode
/// or when lambda is 0.
double combined_loss(double ce_loss, std::span<const double> pair_losses, double w_t,
                     const LossConfig& cfg, std::size_t batch_size);

// --- Differentiable versions -------------------------------------------------------

namespace ops {

Var cross_entropy(Var logits, std::span<const int> labels);

/// Row-wise projection of N x p features onto the unit sphere.
Var normalize_rows(Var features);

/// Sum of AMC pair losses over unit-norm rows.
Var amc_pair_sum(Var unit_features, const PairBatch& pairs, double margin_g);

/// Sum of Euclidean contrastive pair losses over raw rows.
Var eucd_pair_sum(Var features, const PairBatch& pairs, double margin_e);

/// Differentiable combined_loss; `pair_sum` is ignored in ce mode or when lambda is 0.
Var combined_loss(Var ce_loss, Var pair_sum, double w_t, const LossConfig& cfg,
                  std::size_t batch_size);

}  // namespace ops

}  // namespace amc
