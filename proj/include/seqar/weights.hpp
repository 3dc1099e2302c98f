#pragma once

// Pinsker-type weight family indexed by alpha = (beta, l) on the grid
// {1..k*} x {eps, 2 eps, ..., m eps} with eps = 1/ln n, m = [1/eps^2] and
// k* = ceil(k0* + sqrt(ln n)).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "seqar/numeric.hpp"

namespace seqar {

struct WeightGridParams {
  double k_star0 = 0.0;
  std::size_t n = 0;
  std::size_t d = 0;

  void validate() const {
    if (n < 3) throw std::invalid_argument("weight grid requires n >= 3");
    if (d < 1) throw std::invalid_argument("weight grid requires d >= 1");
    if (!(k_star0 >= 0.0)) throw std::invalid_argument("k_star0 must be non-negative");
  }
  [[nodiscard]] double log_n() const { return std::log(static_cast<double>(n)); }
  [[nodiscard]] std::size_t k_star() const {
    return static_cast<std::size_t>(std::ceil(k_star0 + std::sqrt(log_n())));
  }
  [[nodiscard]] double step() const { return 1.0 / log_n(); }
  [[nodiscard]] std::size_t m() const {
    return static_cast<std::size_t>(std::floor(1.0 / (step() * step())));
  }
  /// j* = 1 + [ln n].
  [[nodiscard]] std::size_t plateau_end() const { return 1 + static_cast<std::size_t>(std::floor(log_n())); }
};

/// d_beta = (beta + 1)(2 beta + 1) / (pi^{2 beta} beta).
inline double pinsker_constant(int beta) {
  const double b = beta;
  return (b + 1.0) * (2.0 * b + 1.0) / (std::pow(kPi, 2.0 * b) * b);
}

/// omega_alpha = (d_beta l n)^{1/(2 beta + 1)}.
inline double pinsker_cutoff(int beta, double l, std::size_t n) {
  return std::pow(pinsker_constant(beta) * l * static_cast<double>(n), 1.0 / (2.0 * beta + 1.0));
}

struct WeightVector {
  int beta = 1;
  double l = 0.0;
  double omega = 0.0;
  std::vector<double> values;  // values[j-1] = lambda_alpha(j)

  [[nodiscard]] std::size_t support_length() const {
    std::size_t s = 0;
    for (std::size_t j = 0; j < values.size(); ++j) {
      if (values[j] > 0.0) s = j + 1;
    }
    return s;
  }
};

/// lambda(j) = 1 for j < j*, 1 - (j/omega)^beta for j* <= j <= omega, else 0;
/// truncated to the first d coordinates.
inline WeightVector pinsker_weights(int beta, double l, std::size_t n, std::size_t d, std::size_t j_star) {
  WeightVector w;
  w.beta = beta;
  w.l = l;
  w.omega = pinsker_cutoff(beta, l, n);
  w.values.assign(d, 0.0);
  for (std::size_t j = 1; j <= d; ++j) {
    const double jd = static_cast<double>(j);
    if (j < j_star) {
      w.values[j - 1] = 1.0;
    } else if (jd <= w.omega) {
      w.values[j - 1] = 1.0 - std::pow(jd / w.omega, beta);
    }
  }
  return w;
}

struct WeightFamily {
  std::vector<WeightVector> members;  // lexicographic in (beta, l)
  std::size_t j_star = 0;

  [[nodiscard]] std::size_t size() const { return members.size(); }
  [[nodiscard]] std::vector<std::vector<double>> vectors() const {
    std::vector<std::vector<double>> out;
    out.reserve(members.size());
    for (const auto& m : members) out.push_back(m.values);
    return out;
  }
};

inline WeightFamily build_weight_family(const WeightGridParams& params) {
  params.validate();
  WeightFamily family;
  family.j_star = params.plateau_end();
  const std::size_t k_star = std::max<std::size_t>(params.k_star(), 1);
  const std::size_t m = std::max<std::size_t>(params.m(), 1);
  const double step = params.step();
  family.members.reserve(k_star * m);
  for (std::size_t beta = 1; beta <= k_star; ++beta) {
    for (std::size_t i = 1; i <= m; ++i) {
      family.members.push_back(pinsker_weights(static_cast<int>(beta), static_cast<double>(i) * step, params.n,
                                               params.d, family.j_star));
    }
  }
  return family;
}

struct FamilyMetadata {
  std::size_t nu = 0;
  std::size_t nu_star = 0;
  std::vector<std::vector<double>> lambda1;  // squared weights
  std::vector<std::vector<double>> lambda2;  // union of the family and its squares
};

inline FamilyMetadata family_metadata(const std::vector<std::vector<double>>& family) {
  FamilyMetadata meta;
  meta.nu = family.size();
  for (const auto& lambda : family) {
    const auto active = static_cast<std::size_t>(std::count_if(lambda.begin(), lambda.end(), [](double v) { return v > 0.0; }));
    meta.nu_star = std::max(meta.nu_star, active);
    auto sq = lambda;
    for (double& v : sq) v *= v;
    meta.lambda1.push_back(std::move(sq));
  }
  meta.lambda2 = family;
  for (const auto& sq : meta.lambda1) {
    if (std::find(meta.lambda2.begin(), meta.lambda2.end(), sq) == meta.lambda2.end()) meta.lambda2.push_back(sq);
  }
  return meta;
}

}  // namespace seqar
