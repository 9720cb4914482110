#pragma once

#include "pqtds/classifier.hpp"
#include "pqtds/oracle.hpp"
#include "pqtds/polycore.hpp"

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace testutil {

using namespace pqtds;

inline Sample cube_sample(int d, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  RowMatrix pts(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (int j = 0; j < d; ++j) pts(i, j) = (rng() & 1) ? 1.0 : -1.0;
  }
  return Sample(std::move(pts));
}

inline Sample gaussian_sample(int d, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  RowMatrix pts(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    for (int j = 0; j < d; ++j) pts(i, j) = g(rng);
  }
  return Sample(std::move(pts));
}

inline Sample full_cube(int d) { return Sample(oracle::hypercube_points(d)); }

inline Sample with_labels(const Sample& s, const Classifier::Fn& f) {
  std::vector<std::uint8_t> y(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) y[i] = static_cast<std::uint8_t>(f(s.point(i)));
  return Sample(s.points, std::move(y));
}

inline RowMatrix rows(std::initializer_list<std::initializer_list<double>> r) {
  RowMatrix m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(r.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& row : r) {
    Eigen::Index j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

inline double binom(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

// prod over literals of (1 + s x_i)/2, the exact indicator of a conjunction on the cube.
inline Polynomial conjunction_polynomial(const BasisPtr& basis, const std::vector<int>& lits) {
  Polynomial p = Polynomial::constant(basis, 1.0);
  for (int l : lits) {
    const int i = std::abs(l) - 1;
    const double s = l > 0 ? 1.0 : -1.0;
    Polynomial next = Polynomial::zero(basis);
    for (std::size_t k = 0; k < basis->size(); ++k) {
      const double c = p.coefficients[static_cast<Eigen::Index>(k)];
      if (c == 0.0) continue;
      std::vector<std::uint8_t> e(basis->exponents(k).begin(), basis->exponents(k).end());
      next = next + Polynomial::monomial(basis, e, 0.5 * c);
      ++e[static_cast<std::size_t>(i)];
      next = next + Polynomial::monomial(basis, e, 0.5 * c * s);
    }
    p = next;
  }
  return p;
}

}  // namespace testutil
