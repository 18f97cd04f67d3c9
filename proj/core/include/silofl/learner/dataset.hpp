#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "silofl/prg.hpp"

namespace silofl::learner {

// Horizontally partitioned dataset: every party holds the same features,
// party i owns the contiguous index range partition[i].
struct Dataset {
  std::size_t feature_dim = 0;
  std::vector<double> features;  // size() x feature_dim, row-major
  std::vector<int> labels;       // binary, 0/1
  std::vector<std::pair<std::size_t, std::size_t>> partition;  // [begin,end)

  std::size_t size() const { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * feature_dim,
                                                     feature_dim);
  }
  std::size_t party_count() const { return partition.size(); }
  std::size_t party_size(std::size_t i) const {
    return partition[i].second - partition[i].first;
  }
};

// Two-class Gaussian mixture: class means at +-(separation/2) along the
// normalized all-ones direction, unit covariance. Bayes accuracy is
// Phi(separation/2).
Dataset make_synthetic(std::size_t n, std::size_t feature_dim,
                       double separation, const prg::Seed& seed);

// CSV with one sample per row, features then the label in the last
// column (or `label_column` if nonnegative). A non-numeric first row is
// skipped as a header.
Dataset load_csv(const std::string& path, int label_column = -1);

// Raw binary image format: magic "SFIM", LE32 version(=1), LE32 n, LE32
// height, LE32 width, LE32 channels, n*h*w*c pixel bytes, n label bytes.
// Pixels scale to [0,1].
Dataset load_image_binary(const std::string& path);
void save_image_binary(const std::string& path, const Dataset& data,
                       std::uint32_t height, std::uint32_t width,
                       std::uint32_t channels);

// Splits [0, n) into `parties` near-equal contiguous ranges.
void partition_uniform(Dataset& data, std::size_t parties);

// Explicit ranges; they must be disjoint and cover the data.
void partition_explicit(
    Dataset& data,
    std::vector<std::pair<std::size_t, std::size_t>> ranges);

}  // namespace silofl::learner
