#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "amc/tensor.hpp"

namespace amc {

/// 100 * matches / N.
double accuracy(std::span<const int> predicted, std::span<const int> truth);

/// Row argmax of a logits/probability matrix (lowest index on ties).
std::vector<int> predicted_labels(const Tensor& scores);

struct ClusterScores {
  double homogeneity;
  double completeness;
};

/// Rosenberg-Hirschberg homogeneity and completeness from the joint contingency
/// table, natural-log entropies; each is 1 when its reference entropy is 0.
ClusterScores homogeneity_completeness(std::span<const int> class_labels,
                                       std::span<const int> cluster_labels);

struct SampleSummary {
  double mean = 0.0;
  double sd = 0.0;  // sample (n - 1) standard deviation
  std::size_t n = 0;
};

/// Mean and sample standard deviation of at least two values.
SampleSummary run_summary(std::span<const double> values);

/// Two-sided p-value of the pooled-variance two-sample Student t test
/// (df = n_a + n_b - 2) computed from summary statistics.
double two_sided_t_test(const SampleSummary& a, const SampleSummary& b);

/// Lloyd's k-means with k-means++ seeding on the rows of `features`. Returns a
/// cluster id in [0, k) per row.
std::vector<int> kmeans(const Tensor& features, std::size_t k, std::uint64_t seed,
                        std::size_t max_iterations = 100);

}  // namespace amc
