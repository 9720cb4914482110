#pragma once

#include "pqtds/polycore.hpp"

#include <algorithm>
#include <cstddef>
#include <vector>

namespace pqtds::detail {

struct DistinctRows {
  std::vector<std::size_t> rows;    // index of the first occurrence, in lexicographic row order
  std::vector<std::size_t> counts;  // multiplicity of each distinct row
};

/// Groups bitwise-identical rows (exact equality of every entry).
inline DistinctRows distinct_rows(const RowMatrix& m) {
  const auto n = static_cast<std::size_t>(m.rows());
  const auto k = static_cast<std::size_t>(m.cols());
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  auto row = [&](std::size_t i) { return m.data() + i * k; };
  auto less = [&](std::size_t a, std::size_t b) {
    return std::lexicographical_compare(row(a), row(a) + k, row(b), row(b) + k);
  };
  std::stable_sort(order.begin(), order.end(), less);
  DistinctRows out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i > 0 && std::equal(row(order[i]), row(order[i]) + k, row(order[i - 1]))) {
      ++out.counts.back();
    } else {
      out.rows.push_back(order[i]);
      out.counts.push_back(1);
    }
  }
  return out;
}

}  // namespace pqtds::detail
