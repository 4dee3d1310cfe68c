#pragma once
// Shared fixtures and independent reference computations for the tests.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <vector>

#include "confscore/data.hpp"

namespace testing {

// (O, E, C) rows: (1,1,1) (0,1,1) (1,0,1) (0,0,0) (1,1,0) (0,0,1)
inline confscore::Dataset six_rows() {
  return confscore::Dataset::create({1, 0, 1, 0, 1, 0}, {1, 1, 0, 0, 1, 0},
                                    {{1, 1, 1, 0, 0, 1}}, {"C"});
}

// Discrete dataset whose covariate levels all contain both exposure arms.
inline confscore::Dataset random_discrete(std::mt19937_64& gen, std::size_t n_max = 200,
                                          int max_levels = 8, bool binary_outcome = false) {
  std::uniform_int_distribution<int> level_count(1, max_levels);
  const int levels = level_count(gen);
  std::uniform_int_distribution<std::size_t> size(std::max<std::size_t>(4 * levels, 8), n_max);
  const std::size_t n = size(gen);
  std::uniform_int_distribution<int> pick(0, levels - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<double> c(n), o(n);
  std::vector<int> e(n);
  for (std::size_t i = 0; i < n; ++i) {
    // the first 2 * levels rows seed each level with one row per arm
    const int lv = i < static_cast<std::size_t>(2 * levels) ? static_cast<int>(i / 2) : pick(gen);
    c[i] = 0.5 * lv - 1.0;
    const double pe = 0.2 + 0.6 * unit(gen);
    e[i] = i < static_cast<std::size_t>(2 * levels) ? static_cast<int>(i % 2) : (unit(gen) < pe);
    o[i] = binary_outcome ? (unit(gen) < 0.3 + 0.05 * lv ? 1.0 : 0.0)
                          : 0.7 * e[i] + std::sin(1.0 + lv) + noise(gen);
  }
  return confscore::Dataset::create(o, e, {c}, {"C"});
}

// theta by enumeration: sum over levels of p(c, E=1) * mean(O | c).
inline double brute_force_theta(const confscore::Dataset& d) {
  std::map<double, std::array<double, 3>> cells;  // count, treated, sum O
  for (std::size_t i = 0; i < d.n(); ++i) {
    auto& cell = cells[d.column(0)[i]];
    cell[0] += 1;
    cell[1] += d.exposure()[i];
    cell[2] += d.outcome()[i];
  }
  double theta = 0.0;
  for (const auto& [level, cell] : cells)
    theta += (cell[1] / static_cast<double>(d.n())) * (cell[2] / cell[0]);
  return theta;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

inline double sd(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace testing
