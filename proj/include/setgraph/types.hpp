#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace setgraph {

using NodeId = std::uint32_t;

// Row-major dense matrix of 32-bit scalars. Walk landing counts are kept as
// exact integer-valued floats so that feature rows can be deduplicated by
// their raw bytes; normalization happens at model input.
struct FeatureMatrix {
  std::vector<float> values;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;

  static FeatureMatrix zeros(std::uint32_t rows, std::uint32_t cols) {
    FeatureMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.values.assign(static_cast<std::size_t>(rows) * cols, 0.0f);
    return m;
  }

  float& at(std::uint32_t r, std::uint32_t c) {
    return values[static_cast<std::size_t>(r) * cols + c];
  }
  float at(std::uint32_t r, std::uint32_t c) const {
    return values[static_cast<std::size_t>(r) * cols + c];
  }
  std::span<const float> row(std::uint32_t r) const {
    return {values.data() + static_cast<std::size_t>(r) * cols, cols};
  }
};

// Node attribute table (n rows, d columns).
struct AttrMatrix {
  std::vector<double> values;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;

  bool empty() const { return rows == 0 || cols == 0; }
  std::span<const double> row(std::uint32_t r) const {
    return {values.data() + static_cast<std::size_t>(r) * cols, cols};
  }
};

}  // namespace setgraph
