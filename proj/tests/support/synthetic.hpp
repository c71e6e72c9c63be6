#pragma once

#include "amc/dataset.hpp"
#include "amc/rng.hpp"

namespace amc::testing {

// Raw 0..255 integer pixels with random labels, as a loader would return them.
inline Dataset synthetic_raw(std::string name, std::size_t n, std::size_t c, std::size_t hw,
                             std::size_t classes, std::uint64_t seed, Split split = Split::train) {
  Rng rng(seed);
  Dataset d;
  d.name = std::move(name);
  d.split = split;
  d.num_classes = classes;
  d.images = Tensor({n, c, hw, hw});
  for (std::size_t i = 0; i < d.images.size(); ++i) d.images[i] = static_cast<double>(rng.index(256));
  for (std::size_t i = 0; i < n; ++i) d.labels.push_back(static_cast<int>(rng.index(classes)));
  return d;
}

inline Dataset synthetic_cifar100(std::size_t n, std::uint64_t seed) {
  Dataset d = synthetic_raw("cifar100", n, 3, 32, 20, seed);
  Rng rng(seed + 1);
  for (std::size_t i = 0; i < n; ++i) d.fine_labels.push_back(static_cast<int>(rng.index(100)));
  return d;
}

}  // namespace amc::testing
