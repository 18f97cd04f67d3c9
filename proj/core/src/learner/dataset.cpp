#include "silofl/learner/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "silofl/errors.hpp"

namespace silofl::learner {

namespace {

constexpr char kImageMagic[4] = {'S', 'F', 'I', 'M'};

void check_partition(const Dataset& data) {
  std::size_t expected_begin = 0;
  for (const auto& [begin, end] : data.partition) {
    if (begin != expected_begin || end < begin || end > data.size()) {
      throw ConfigError("partition ranges must be disjoint and cover the data");
    }
    expected_begin = end;
  }
  if (expected_begin != data.size()) {
    throw ConfigError("partition does not cover the dataset");
  }
}

}  // namespace

Dataset make_synthetic(std::size_t n, std::size_t feature_dim,
                       double separation, const prg::Seed& seed) {
  Dataset data;
  data.feature_dim = feature_dim;
  data.features.resize(n * feature_dim);
  data.labels.resize(n);
  prg::DeterministicRng rng(prg::derive_seed(seed, "data"), 0);
  const double shift =
      0.5 * separation / std::sqrt(static_cast<double>(feature_dim));
  for (std::size_t i = 0; i < n; ++i) {
    const int label = rng.next_unit() < 0.5 ? 0 : 1;
    data.labels[i] = label;
    const double sign = label == 1 ? 1.0 : -1.0;
    for (std::size_t j = 0; j < feature_dim; ++j) {
      data.features[i * feature_dim + j] = sign * shift + rng.next_gaussian();
    }
  }
  data.partition = {{0, n}};
  return data;
}

Dataset load_csv(const std::string& path, int label_column) {
  std::ifstream in(path);
  if (!in) {
    throw Error("load_csv: cannot open " + path);
  }
  Dataset data;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    bool numeric = true;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        cells.push_back(std::stod(cell, &used));
        if (used == 0) numeric = false;
      } catch (const std::exception&) {
        numeric = false;
        break;
      }
    }
    if (!numeric) {
      if (first) {
        first = false;  // header row
        continue;
      }
      throw Error("load_csv: non-numeric cell outside header in " + path);
    }
    first = false;
    if (cells.size() < 2) {
      throw Error("load_csv: need at least one feature and a label");
    }
    const std::size_t label_idx =
        label_column >= 0 ? static_cast<std::size_t>(label_column)
                          : cells.size() - 1;
    if (label_idx >= cells.size()) {
      throw ConfigError("load_csv: label column out of range");
    }
    if (data.feature_dim == 0) {
      data.feature_dim = cells.size() - 1;
    } else if (cells.size() - 1 != data.feature_dim) {
      throw Error("load_csv: inconsistent column count");
    }
    const double label_value = cells[label_idx];
    if (label_value != 0.0 && label_value != 1.0) {
      throw Error("load_csv: labels must be 0 or 1");
    }
    data.labels.push_back(static_cast<int>(label_value));
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i != label_idx) data.features.push_back(cells[i]);
    }
  }
  if (data.labels.empty()) {
    throw Error("load_csv: no samples in " + path);
  }
  data.partition = {{0, data.labels.size()}};
  return data;
}

Dataset load_image_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error("load_image_binary: cannot open " + path);
  }
  std::vector<std::uint8_t> buf((std::istreambuf_iterator<char>(in)),
                                std::istreambuf_iterator<char>());
  if (buf.size() < 20 || std::memcmp(buf.data(), kImageMagic, 4) != 0) {
    throw Error("load_image_binary: bad magic");
  }
  auto u32 = [&](std::size_t off) {
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | buf[off + static_cast<std::size_t>(i)];
    return v;
  };
  const std::uint32_t version = u32(4);
  if (version != 1) {
    throw Error("load_image_binary: unsupported version");
  }
  const std::uint64_t n = u32(8);
  const std::uint64_t h = u32(12);
  const std::uint64_t w = u32(16);
  if (buf.size() < 24) throw Error("load_image_binary: truncated header");
  const std::uint64_t c = u32(20);
  const std::uint64_t pixels = n * h * w * c;
  if (buf.size() != 24 + pixels + n) {
    throw Error("load_image_binary: payload size mismatch");
  }
  Dataset data;
  data.feature_dim = h * w * c;
  data.features.resize(pixels);
  data.labels.resize(n);
  for (std::uint64_t i = 0; i < pixels; ++i) {
    data.features[i] = buf[24 + i] / 255.0;
  }
  for (std::uint64_t i = 0; i < n; ++i) {
    const std::uint8_t label = buf[24 + pixels + i];
    if (label > 1) {
      throw Error("load_image_binary: labels must be 0 or 1");
    }
    data.labels[i] = label;
  }
  data.partition = {{0, data.labels.size()}};
  return data;
}

void save_image_binary(const std::string& path, const Dataset& data,
                       std::uint32_t height, std::uint32_t width,
                       std::uint32_t channels) {
  if (static_cast<std::uint64_t>(height) * width * channels !=
      data.feature_dim) {
    throw ConfigError("save_image_binary: dimensions do not match features");
  }
  std::vector<std::uint8_t> buf;
  buf.insert(buf.end(), kImageMagic, kImageMagic + 4);
  auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  put_u32(1);
  put_u32(static_cast<std::uint32_t>(data.size()));
  put_u32(height);
  put_u32(width);
  put_u32(channels);
  for (double v : data.features) {
    const double clamped = std::clamp(v, 0.0, 1.0);
    buf.push_back(static_cast<std::uint8_t>(std::lround(clamped * 255.0)));
  }
  for (int label : data.labels) {
    buf.push_back(static_cast<std::uint8_t>(label));
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error("save_image_binary: cannot open " + path);
  }
  out.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
}

void partition_uniform(Dataset& data, std::size_t parties) {
  if (parties == 0 || parties > data.size()) {
    throw ConfigError("partition_uniform: party count out of range");
  }
  data.partition.clear();
  const std::size_t base = data.size() / parties;
  const std::size_t extra = data.size() % parties;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < parties; ++i) {
    const std::size_t len = base + (i < extra ? 1 : 0);
    data.partition.emplace_back(begin, begin + len);
    begin += len;
  }
}

void partition_explicit(
    Dataset& data, std::vector<std::pair<std::size_t, std::size_t>> ranges) {
  data.partition = std::move(ranges);
  check_partition(data);
}

}  // namespace silofl::learner
