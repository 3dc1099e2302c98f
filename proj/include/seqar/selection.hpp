#pragma once

// Penalized weighted least squares on the regression grid: a trigonometric
// basis orthonormal for the empirical inner product (f,g)_d = ((b-a)/d)
// sum_l f(z_l) g(z_l), Fourier coefficient estimates, the cost
// J_d(lambda) and its minimizer over a finite weight family.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqar/numeric.hpp"
#include "seqar/seqkernel.hpp"

namespace seqar {

/// phi_j(z_l) for 1 <= j, l <= d on the grid z_l = a + l (b - a) / d.
struct Basis {
  std::size_t d = 0;
  double a = 0.0;
  double b = 1.0;
  std::vector<double> values;  // row-major, row j-1, column l-1

  [[nodiscard]] double operator()(std::size_t j, std::size_t l) const { return values[(j - 1) * d + (l - 1)]; }
  [[nodiscard]] std::span<const double> row(std::size_t j) const { return {values.data() + (j - 1) * d, d}; }
  [[nodiscard]] double cell() const { return (b - a) / static_cast<double>(d); }
};

/// Trigonometric basis function evaluated at x, normalized for L2[a,b].
/// j = 1 is the constant; even j are cosines and odd j sines of frequency [j/2].
inline double trig_basis_value(std::size_t j, double x, double a, double b) {
  const double len = b - a;
  if (j == 1) return 1.0 / std::sqrt(len);
  const double arg = 2.0 * kPi * static_cast<double>(j / 2) * (x - a) / len;
  const double scale = std::sqrt(2.0 / len);
  return scale * (j % 2 == 0 ? std::cos(arg) : std::sin(arg));
}

/// Max |(phi_i, phi_j)_d - 1{i=j}| over all pairs.
inline double gram_deviation(const Basis& basis) {
  double worst = 0.0;
  for (std::size_t i = 1; i <= basis.d; ++i) {
    const auto ri = basis.row(i);
    for (std::size_t j = i; j <= basis.d; ++j) {
      const auto rj = basis.row(j);
      double s = 0.0;
      for (std::size_t l = 0; l < basis.d; ++l) s += ri[l] * rj[l];
      s *= basis.cell();
      worst = std::max(worst, std::abs(s - (i == j ? 1.0 : 0.0)));
    }
  }
  return worst;
}

inline constexpr double kOrthonormalityTolerance = 1e-10;

/// Builds the basis on the grid of d points. For even d the last cosine is
/// the alternating Nyquist mode, rescaled to unit empirical norm. Throws
/// std::logic_error if the Gram matrix deviates from the identity.
inline Basis build_basis(std::size_t d, double a, double b) {
  if (d < 2) throw std::invalid_argument("build_basis: d must be at least 2");
  if (!(a < b)) throw std::invalid_argument("build_basis: requires a < b");
  Basis basis{d, a, b, std::vector<double>(d * d)};
  const double len = b - a;
  for (std::size_t j = 1; j <= d; ++j) {
    const bool nyquist = d % 2 == 0 && j == d;
    for (std::size_t l = 1; l <= d; ++l) {
      double v = 0.0;
      if (nyquist) {
        v = (l % 2 == 0 ? 1.0 : -1.0) / std::sqrt(len);
      } else {
        // Phase computed from integers: 2 pi [j/2] l / d.
        const double arg = 2.0 * kPi * static_cast<double>((j / 2) * l % d) / static_cast<double>(d);
        v = j == 1 ? 1.0 / std::sqrt(len) : std::sqrt(2.0 / len) * (j % 2 == 0 ? std::cos(arg) : std::sin(arg));
      }
      basis.values[(j - 1) * d + (l - 1)] = v;
    }
  }
  const double dev = gram_deviation(basis);
  if (!(dev <= kOrthonormalityTolerance)) {
    throw std::logic_error("build_basis: empirical Gram matrix deviates from identity by " + std::to_string(dev));
  }
  return basis;
}

struct FourierEstimates {
  std::vector<double> theta_hat;
  std::vector<double> theta_tilde;
  std::vector<double> s;
  std::size_t d = 0;
  double cell = 0.0;  // (b - a) / d
  bool gamma = true;  // indicator carried over from the regression data
};

/// theta^_j = ((b-a)/d) sum_l Y_l phi_j(z_l),
/// s_j = ((b-a)/d) sum_l sigma_l^2 phi_j(z_l)^2,
/// theta~_j = theta^_j^2 - ((b-a)/d) s_j.
inline FourierEstimates fourier_estimates(std::span<const double> Y, std::span<const double> sigma2,
                                          const Basis& basis, bool gamma = true) {
  if (Y.size() != basis.d || sigma2.size() != basis.d) {
    throw std::invalid_argument("fourier_estimates: data and basis disagree on d");
  }
  FourierEstimates fe;
  fe.d = basis.d;
  fe.cell = basis.cell();
  fe.gamma = gamma;
  fe.theta_hat.resize(basis.d);
  fe.theta_tilde.resize(basis.d);
  fe.s.resize(basis.d);
  for (std::size_t j = 1; j <= basis.d; ++j) {
    const auto phi = basis.row(j);
    double th = 0.0;
    double sj = 0.0;
    for (std::size_t l = 0; l < basis.d; ++l) {
      th += Y[l] * phi[l];
      sj += sigma2[l] * phi[l] * phi[l];
    }
    th *= fe.cell;
    sj *= fe.cell;
    fe.theta_hat[j - 1] = th;
    fe.s[j - 1] = sj;
    fe.theta_tilde[j - 1] = th * th - fe.cell * sj;
  }
  return fe;
}

inline FourierEstimates fourier_estimates(const RegressionData& data, const Basis& basis) {
  if (data.d() != basis.d || data.a != basis.a || data.b != basis.b) {
    throw std::invalid_argument("fourier_estimates: data and basis disagree on grid");
  }
  return fourier_estimates(data.Y, data.sigma2, basis, data.gamma_all);
}

/// P_d(lambda) = ((b-a)/d) sum_j lambda_j^2 s_j.
inline double penalty(std::span<const double> lambda, const FourierEstimates& fe) {
  if (lambda.size() != fe.d) throw std::invalid_argument("penalty: weight vector length must equal d");
  double p = 0.0;
  for (std::size_t j = 0; j < fe.d; ++j) p += lambda[j] * lambda[j] * fe.s[j];
  return fe.cell * p;
}

inline constexpr double kMaxPenaltyMultiplier = 1.0 / 12.0;

inline void check_delta(double delta) {
  if (!(delta > 0.0 && delta <= kMaxPenaltyMultiplier)) {
    throw std::invalid_argument("penalty multiplier delta must lie in (0, 1/12], got " + std::to_string(delta));
  }
}

/// J_d(lambda) = sum lambda^2 theta^^2 - 2 sum lambda theta~ + delta P_d(lambda).
inline double cost(std::span<const double> lambda, const FourierEstimates& fe, double delta) {
  if (lambda.size() != fe.d) throw std::invalid_argument("cost: weight vector length must equal d");
  double fit = 0.0;
  double cross = 0.0;
  for (std::size_t j = 0; j < fe.d; ++j) {
    fit += lambda[j] * lambda[j] * fe.theta_hat[j] * fe.theta_hat[j];
    cross += lambda[j] * fe.theta_tilde[j];
  }
  return fit - 2.0 * cross + delta * penalty(lambda, fe);
}

/// First index attaining the minimum.
inline std::size_t argmin_first(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmin_first: empty sequence");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] < values[best]) best = i;
  }
  return best;
}

/// Weighted least-squares fit sum_j lambda_j theta^_j phi_j(z_l) on the grid,
/// times the Gamma indicator.
inline std::vector<double> weighted_fit(std::span<const double> lambda, const FourierEstimates& fe,
                                        const Basis& basis) {
  std::vector<double> out(basis.d, 0.0);
  if (!fe.gamma) return out;
  for (std::size_t j = 1; j <= basis.d; ++j) {
    const double c = lambda[j - 1] * fe.theta_hat[j - 1];
    if (c == 0.0) continue;
    const auto phi = basis.row(j);
    for (std::size_t l = 0; l < basis.d; ++l) out[l] += c * phi[l];
  }
  return out;
}

struct SelectionResult {
  std::vector<double> lambda_hat;
  std::size_t lambda_index = 0;
  std::vector<double> costs;
  std::vector<double> estimates_on_grid;
  double delta = kMaxPenaltyMultiplier;
  double a = 0.0;
  double b = 1.0;
};

/// Exhaustive minimization of J_d over the family; ties go to the smallest index.
inline SelectionResult select(const FourierEstimates& fe, const Basis& basis,
                              std::span<const std::vector<double>> family, double delta) {
  if (family.empty()) throw std::invalid_argument("select: empty weight family");
  check_delta(delta);
  SelectionResult r;
  r.delta = delta;
  r.a = basis.a;
  r.b = basis.b;
  r.costs.reserve(family.size());
  for (const auto& lambda : family) {
    for (double v : lambda) {
      if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("select: weights must lie in [0,1]");
    }
    r.costs.push_back(cost(lambda, fe, delta));
  }
  r.lambda_index = argmin_first(r.costs);
  r.lambda_hat = family[r.lambda_index];
  r.estimates_on_grid = weighted_fit(r.lambda_hat, fe, basis);
  return r;
}

/// Cell index (0-based) of t for the piecewise-constant extension:
/// [a, z_1] -> 0, (z_{l-1}, z_l] -> l - 1.
inline std::size_t cell_index(double t, double a, double b, std::size_t d) {
  if (!(t >= a && t <= b)) throw std::invalid_argument("evaluate: t lies outside [a, b]");
  const double len = b - a;
  // Smallest l with z_l >= t, computed in scaled integer coordinates then
  // corrected against the actual grid values.
  auto l = static_cast<std::size_t>(std::ceil((t - a) / len * static_cast<double>(d)));
  l = std::clamp<std::size_t>(l, 1, d);
  auto z = [&](std::size_t k) { return a + static_cast<double>(k) * len / static_cast<double>(d); };
  while (l > 1 && z(l - 1) >= t) --l;
  while (l < d && z(l) < t) ++l;
  return l - 1;
}

inline double evaluate_piecewise(std::span<const double> on_grid, double a, double b, double t) {
  return on_grid[cell_index(t, a, b, on_grid.size())];
}

inline double evaluate(const SelectionResult& result, double t) {
  return evaluate_piecewise(result.estimates_on_grid, result.a, result.b, t);
}

}  // namespace seqar
