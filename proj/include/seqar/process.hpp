#pragma once

// Varying-coefficient AR(1) model y_k = S(x_k) y_{k-1} + xi_k on the uniform
// design x_k = a + k (b - a) / n, with noise drawn from a small catalog of
// unit-variance densities.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "seqar/numeric.hpp"

namespace seqar {

enum class NoiseKind { gaussian, uniform_scaled, rademacher };

inline std::string_view to_string(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::gaussian: return "gaussian";
    case NoiseKind::uniform_scaled: return "uniform";
    case NoiseKind::rademacher: return "rademacher";
  }
  return "unknown";
}

inline NoiseKind parse_noise_kind(std::string_view name) {
  if (name == "gaussian") return NoiseKind::gaussian;
  if (name == "uniform") return NoiseKind::uniform_scaled;
  if (name == "rademacher") return NoiseKind::rademacher;
  throw std::invalid_argument("unknown noise kind '" + std::string(name) +
                              "' (expected gaussian, uniform or rademacher)");
}

/// Zero-mean, unit-variance noise law. `varsigma` is the moment-class
/// parameter: E|xi|^{2k} <= varsigma^k (2k-1)!! must hold for all k.
struct NoiseDensity {
  NoiseKind kind = NoiseKind::gaussian;
  double varsigma = 1.0;
};

namespace detail {
inline double double_factorial_odd(int k) {  // (2k-1)!!
  double r = 1.0;
  for (int i = 1; i <= 2 * k - 1; i += 2) r *= i;
  return r;
}
}  // namespace detail

/// Analytic E|xi|^order for the shipped densities. order in {2,4,...,12}.
inline double noise_moment(const NoiseDensity& noise, int order) {
  if (order < 2 || order > 12 || order % 2 != 0) {
    throw std::invalid_argument("noise_moment: order must be an even integer in [2, 12], got " +
                                std::to_string(order));
  }
  switch (noise.kind) {
    case NoiseKind::gaussian: return detail::double_factorial_odd(order / 2);
    case NoiseKind::uniform_scaled: return std::pow(3.0, order / 2) / (order + 1);
    case NoiseKind::rademacher: return 1.0;
  }
  return 0.0;
}

/// Largest admissible E|xi|^{2k} in the moment class with parameter varsigma.
inline double moment_class_bound(double varsigma, int k) {
  return std::pow(varsigma, k) * detail::double_factorial_odd(k);
}

template <class Engine>
double draw_noise(const NoiseDensity& noise, Engine& engine) {
  switch (noise.kind) {
    case NoiseKind::gaussian: {
      std::normal_distribution<double> dist(0.0, 1.0);
      return dist(engine);
    }
    case NoiseKind::uniform_scaled: {
      const double r = std::sqrt(3.0);
      std::uniform_real_distribution<double> dist(-r, r);
      return dist(engine);
    }
    case NoiseKind::rademacher:
      return (engine() >> 63) != 0 ? 1.0 : -1.0;
  }
  return 0.0;
}

using Engine = std::mt19937_64;

/// A named coefficient function, optionally with an analytic derivative.
struct Coefficient {
  std::string name;
  std::function<double(double)> value;
  std::function<double(double)> derivative;  // empty: use finite differences

  double operator()(double x) const { return value(x); }
  [[nodiscard]] bool has_derivative() const { return static_cast<bool>(derivative); }
};

namespace detail {
inline double parse_real(std::string_view text, std::string_view what) {
  double v = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last) {
    throw std::invalid_argument("cannot parse " + std::string(what) + " '" + std::string(text) + "'");
  }
  return v;
}

inline std::vector<double> parse_real_list(std::string_view text, std::string_view what) {
  std::vector<double> out;
  while (true) {
    const auto comma = text.find(',');
    out.push_back(parse_real(text.substr(0, comma), what));
    if (comma == std::string_view::npos) break;
    text.remove_prefix(comma + 1);
  }
  return out;
}
}  // namespace detail

/// Builds a coefficient from the catalog:
///   zero            S(x) = 0
///   const:c         S(x) = c
///   sine:amp,freq   S(x) = amp * sin(2 pi freq x)
///   cosine:amp,freq S(x) = amp * cos(2 pi freq x)
inline Coefficient make_coefficient(std::string_view spec) {
  const auto colon = spec.find(':');
  const std::string_view kind = spec.substr(0, colon);
  const std::string_view args = colon == std::string_view::npos ? std::string_view{} : spec.substr(colon + 1);

  if (kind == "zero" && args.empty()) {
    return {"zero", [](double) { return 0.0; }, [](double) { return 0.0; }};
  }
  if (kind == "const") {
    const double c = detail::parse_real(args, "const level");
    return {std::string(spec), [c](double) { return c; }, [](double) { return 0.0; }};
  }
  if (kind == "sine" || kind == "cosine") {
    const auto p = detail::parse_real_list(args, std::string(kind) + " parameters");
    if (p.size() != 2) throw std::invalid_argument(std::string(kind) + " expects 'amp,freq'");
    const double amp = p[0];
    const double w = 2.0 * kPi * p[1];
    if (kind == "sine") {
      return {std::string(spec), [amp, w](double x) { return amp * std::sin(w * x); },
              [amp, w](double x) { return amp * w * std::cos(w * x); }};
    }
    return {std::string(spec), [amp, w](double x) { return amp * std::cos(w * x); },
            [amp, w](double x) { return -amp * w * std::sin(w * x); }};
  }
  throw std::invalid_argument("unknown coefficient function '" + std::string(spec) +
                              "' (expected zero, const:c, sine:amp,freq or cosine:amp,freq)");
}

/// One experiment instance: interval, sample size, coefficient, noise, start value.
struct ModelSpec {
  double a = 0.0;
  double b = 1.0;
  std::size_t n = 0;
  Coefficient S = make_coefficient("zero");
  NoiseDensity noise{};
  double y0 = 0.0;

  void validate() const {
    if (!(a < b)) throw std::invalid_argument("model interval requires a < b");
    if (n < 3) throw std::invalid_argument("sample size n must be at least 3, got " + std::to_string(n));
    if (!(noise.varsigma >= 1.0)) throw std::invalid_argument("noise varsigma must be >= 1");
  }

  /// x_k = a + k (b - a) / n.
  [[nodiscard]] double design_point(std::size_t k) const {
    return a + static_cast<double>(k) * (b - a) / static_cast<double>(n);
  }
};

struct StabilityParams {
  double eps = 0.1;
  double L = 1.0;

  void validate() const {
    if (!(eps > 0.0 && eps < 1.0)) throw std::invalid_argument("stability eps must lie in (0,1)");
    if (!(L > 0.0)) throw std::invalid_argument("stability L must be positive");
  }
};

/// Realized observations y_0..y_n. The noise record xi_1..xi_n (stored at
/// xi[1..n], xi[0] unused) is kept for diagnostics only.
struct Path {
  std::vector<double> y;
  std::vector<double> xi;
  std::uint64_t seed = 0;
  ModelSpec spec;

  [[nodiscard]] std::size_t n() const { return y.size() - 1; }
  [[nodiscard]] bool has_noise_record() const { return xi.size() == y.size(); }
};

/// Runs the recursion on a caller-supplied noise sequence xi_1..xi_n.
inline Path simulate_path_with_noise(const ModelSpec& spec, std::span<const double> noise) {
  spec.validate();
  if (noise.size() != spec.n) {
    throw std::invalid_argument("noise sequence length must equal n");
  }
  Path path;
  path.spec = spec;
  path.y.resize(spec.n + 1);
  path.xi.assign(spec.n + 1, 0.0);
  path.y[0] = spec.y0;
  for (std::size_t k = 1; k <= spec.n; ++k) {
    path.xi[k] = noise[k - 1];
    path.y[k] = spec.S(spec.design_point(k)) * path.y[k - 1] + path.xi[k];
  }
  return path;
}

/// Simulates y_1..y_n with i.i.d. noise from spec.noise; deterministic in `seed`.
inline Path simulate_path(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  Engine engine(seed);
  std::vector<double> noise(spec.n);
  for (double& e : noise) e = draw_noise(spec.noise, engine);
  Path path = simulate_path_with_noise(spec, noise);
  path.seed = seed;
  return path;
}

struct StabilityReport {
  bool in_theta = false;
  double sup_S = 0.0;
  double sup_dS = 0.0;
};

/// Grid evaluation of |S|_* and |S'|_*. The derivative is the analytic one
/// when registered, otherwise central differences on the evaluation grid
/// (one-sided at the endpoints).
inline StabilityReport check_stability(const Coefficient& S, double a, double b,
                                       const StabilityParams& params, std::size_t grid_size) {
  if (grid_size < 100) throw std::invalid_argument("check_stability: grid_size must be >= 100");
  const double step = (b - a) / static_cast<double>(grid_size - 1);
  std::vector<double> values(grid_size);
  for (std::size_t i = 0; i < grid_size; ++i) values[i] = S(a + static_cast<double>(i) * step);

  StabilityReport report;
  for (std::size_t i = 0; i < grid_size; ++i) {
    report.sup_S = std::max(report.sup_S, std::abs(values[i]));
    double slope = 0.0;
    if (S.has_derivative()) {
      slope = S.derivative(a + static_cast<double>(i) * step);
    } else if (i == 0) {
      slope = (values[1] - values[0]) / step;
    } else if (i + 1 == grid_size) {
      slope = (values[i] - values[i - 1]) / step;
    } else {
      slope = (values[i + 1] - values[i - 1]) / (2.0 * step);
    }
    report.sup_dS = std::max(report.sup_dS, std::abs(slope));
  }
  report.in_theta = report.sup_S <= 1.0 - params.eps && report.sup_dS <= params.L;
  return report;
}

inline StabilityReport check_stability(const ModelSpec& spec, const StabilityParams& params,
                                       std::size_t grid_size = 10000) {
  return check_stability(spec.S, spec.a, spec.b, params, grid_size);
}

/// Monte Carlo estimate of E max_{1<=j<=n} y_j^power, one path per seed.
inline double max_path_moment(const ModelSpec& spec, int power, std::span<const std::uint64_t> seeds) {
  if (power != 2 && power != 4) throw std::invalid_argument("max_path_moment: power must be 2 or 4");
  if (seeds.empty()) throw std::invalid_argument("max_path_moment: need at least one seed");
  const auto stab = check_stability(spec, StabilityParams{1e-12, 1e300});
  if (!(stab.sup_S < 1.0)) throw std::invalid_argument("max_path_moment: requires sup|S| < 1");

  MeanAccumulator acc;
  for (auto seed : seeds) {
    const Path path = simulate_path(spec, seed);
    double m = 0.0;
    for (std::size_t j = 1; j <= spec.n; ++j) m = std::max(m, std::pow(path.y[j], power));
    acc.add(m);
  }
  return acc.mean();
}

}  // namespace seqar
