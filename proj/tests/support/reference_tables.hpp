#pragma once

// Hand-worked clustering fixtures and published mean/SD/p rows shared by the
// unit tests and the acceptance binary.

#include <cmath>
#include <string>
#include <vector>

namespace amc::testing {

struct ClusterFixture {
  std::vector<int> classes, clusters;
  double h, c;
};

// Entropies worked out by hand from each contingency table (natural log).
inline std::vector<ClusterFixture> cluster_fixtures() {
  const double ln2 = std::log(2.0), ln3 = std::log(3.0);
  return {
      {{0, 0, 1, 1}, {0, 0, 1, 1}, 1.0, 1.0},
      {{0, 0, 1, 1}, {5, 5, 5, 5}, 0.0, 1.0},
      {{0, 0, 1, 1}, {0, 1, 2, 3}, 1.0, 0.5},
      {{0, 0, 0, 1, 1, 1}, {0, 0, 1, 1, 2, 2}, 2.0 / 3.0, (2.0 / 3.0) * ln2 / ln3},
      {{0, 0, 0, 0, 1, 1, 2, 2}, {0, 0, 1, 1, 1, 1, 2, 2}, 2.0 / 3.0, 2.0 / 3.0},
  };
}

// AMC vs Eucd accuracy (mean, SD over 5 runs) and the printed two-sided p-value.
struct PublishedRow {
  std::string dataset;
  double m1, s1, m2, s2, p;
};

inline std::vector<PublishedRow> published_rows() {
  return {{"mnist", 99.66, 0.01, 99.65, 0.01, 0.1525},
          {"cifar10", 82.97, 0.20, 82.60, 0.21, 0.0214},
          {"svhn", 95.52, 0.05, 95.29, 0.06, 0.0002},
          {"cifar100", 66.19, 0.22, 65.57, 0.20, 0.0016}};
}

}  // namespace amc::testing
