#include "amc/metrics.hpp"

#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <limits>
#include <map>

#include "amc/losses.hpp"
#include "amc/rng.hpp"

namespace amc {

namespace {

double entropy(const std::map<int, std::size_t>& counts, double total) {
  double h = 0.0;
  for (const auto& [label, c] : counts) {
    const double p = static_cast<double>(c) / total;
    h -= p * std::log(p);
  }
  return h;
}

}  // namespace

double accuracy(std::span<const int> predicted, std::span<const int> truth) {
  if (predicted.empty()) throw ConfigError("accuracy: empty input");
  if (predicted.size() != truth.size()) throw ShapeError("accuracy: length mismatch");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) hits += predicted[i] == truth[i];
  return 100.0 * static_cast<double>(hits) / static_cast<double>(predicted.size());
}

std::vector<int> predicted_labels(const Tensor& scores) {
  require_rank(scores, 2, "predicted_labels");
  std::vector<int> out(scores.dim(0));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<int>(argmax_row(scores, i));
  return out;
}

ClusterScores homogeneity_completeness(std::span<const int> class_labels,
                                       std::span<const int> cluster_labels) {
  if (class_labels.empty()) throw ConfigError("homogeneity_completeness: empty input");
  if (class_labels.size() != cluster_labels.size())
    throw ShapeError("homogeneity_completeness: length mismatch");
  const double n = static_cast<double>(class_labels.size());
  std::map<int, std::size_t> classes, clusters;
  std::map<std::pair<int, int>, std::size_t> joint;
  for (std::size_t i = 0; i < class_labels.size(); ++i) {
    ++classes[class_labels[i]];
    ++clusters[cluster_labels[i]];
    ++joint[{class_labels[i], cluster_labels[i]}];
  }
  const double h_class = entropy(classes, n);
  const double h_cluster = entropy(clusters, n);
  double h_class_given_cluster = 0.0, h_cluster_given_class = 0.0;
  for (const auto& [key, c] : joint) {
    const double p = static_cast<double>(c) / n;
    h_class_given_cluster -= p * std::log(static_cast<double>(c) / static_cast<double>(clusters[key.second]));
    h_cluster_given_class -= p * std::log(static_cast<double>(c) / static_cast<double>(classes[key.first]));
  }
  ClusterScores s{};
  s.homogeneity = h_class == 0.0 ? 1.0 : 1.0 - h_class_given_cluster / h_class;
  s.completeness = h_cluster == 0.0 ? 1.0 : 1.0 - h_cluster_given_class / h_cluster;
  return s;
}

SampleSummary run_summary(std::span<const double> values) {
  if (values.size() < 2) throw ConfigError("run_summary: need at least 2 values");
  SampleSummary s;
  s.n = values.size();
  for (double v : values) s.mean += v;
  s.mean /= static_cast<double>(s.n);
  double ss = 0.0;
  for (double v : values) ss += (v - s.mean) * (v - s.mean);
  s.sd = std::sqrt(ss / static_cast<double>(s.n - 1));
  return s;
}

double two_sided_t_test(const SampleSummary& a, const SampleSummary& b) {
  if (a.n < 2 || b.n < 2) throw ConfigError("t test: each sample needs n >= 2");
  if (a.sd < 0.0 || b.sd < 0.0) throw ConfigError("t test: standard deviations must be >= 0");
  const double na = static_cast<double>(a.n), nb = static_cast<double>(b.n);
  const double df = na + nb - 2.0;
  const double pooled = ((na - 1.0) * a.sd * a.sd + (nb - 1.0) * b.sd * b.sd) / df;
  const double diff = a.mean - b.mean;
  if (pooled == 0.0) return diff == 0.0 ? 1.0 : 0.0;
  const double t = diff / std::sqrt(pooled * (1.0 / na + 1.0 / nb));
  const boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
}

std::vector<int> kmeans(const Tensor& features, std::size_t k, std::uint64_t seed,
                        std::size_t max_iterations) {
  require_rank(features, 2, "kmeans");
  const std::size_t n = features.dim(0), p = features.dim(1);
  if (k == 0) throw ConfigError("kmeans: k must be positive");
  k = std::min(k, n);
  Rng rng(derive_seed(seed, {0xc1a5}));

  auto dist2 = [&](std::size_t i, const std::vector<double>& c) {
    double s = 0.0;
    for (std::size_t d = 0; d < p; ++d) {
      const double diff = features.at(i, d) - c[d];
      s += diff * diff;
    }
    return s;
  };

  std::vector<std::vector<double>> centers;
  centers.push_back(features.row(rng.index(n)));
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  while (centers.size() < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = std::min(best[i], dist2(i, centers.back()));
      total += best[i];
    }
    std::size_t pick = n - 1;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      for (std::size_t i = 0; i < n; ++i) {
        r -= best[i];
        if (r < 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.index(n);
    }
    centers.push_back(features.row(pick));
  }

  std::vector<int> assign(n, -1);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int arg = 0;
      double bd = dist2(i, centers[0]);
      for (std::size_t c = 1; c < k; ++c) {
        const double d = dist2(i, centers[c]);
        if (d < bd) {
          bd = d;
          arg = static_cast<int>(c);
        }
      }
      if (assign[i] != arg) {
        assign[i] = arg;
        changed = true;
      }
    }
    if (!changed) break;
    std::vector<std::vector<double>> sums(k, std::vector<double>(p, 0.0));
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(assign[i]);
      ++counts[c];
      for (std::size_t d = 0; d < p; ++d) sums[c][d] += features.at(i, d);
    }
    for (std::size_t c = 0; c < k; ++c)
      if (counts[c])  // empty clusters keep their previous center
        for (std::size_t d = 0; d < p; ++d)
          centers[c][d] = sums[c][d] / static_cast<double>(counts[c]);
  }
  return assign;
}

}  // namespace amc
