#pragma once

// Two-stage sequential kernel estimation of S at the grid points
// z_l = a + l (b - a) / d. Each grid point owns a disjoint window of
// observation indices [k1, k2]; the first q + 1 of them feed a pilot
// ratio estimator that fixes the threshold H_l, and the rest are consumed
// by a stopping rule that accumulates sum y_{j-1}^2 until it reaches H_l.
//
// All window arithmetic is done on integers so that windows of distinct
// grid points never share an index (indicator kernel, half-open cells).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqar/numeric.hpp"
#include "seqar/process.hpp"

namespace seqar {

/// Observation window of one grid point: the kernel covers k1..k2, the pilot
/// stage uses k1..iota and the sequential stage iota+1..k2.
struct Window {
  std::size_t k1 = 0;
  std::size_t k2 = 0;
  std::size_t iota = 0;

  [[nodiscard]] bool contains(std::size_t j) const { return j >= k1 && j <= k2; }
  /// k2 - iota - 1: number of sequential-stage terms strictly before k2.
  [[nodiscard]] std::size_t main_stage_length() const { return k2 - iota - 1; }
};

struct GridLayout {
  double a = 0.0;
  double b = 1.0;
  std::size_t n = 0;
  std::size_t d = 0;
  std::vector<double> z;  // z[l-1] = z_l
  double h = 0.0;         // (b - a) / (2d)
  double h_tilde = 0.0;   // h / (b - a)
  double mu0 = 0.5;
  std::size_t q = 0;
  double eps_tilde = 0.0;  // 1 / (2 + ln n)
  std::vector<Window> windows;

  [[nodiscard]] const Window& window(std::size_t l) const { return windows.at(l - 1); }
  [[nodiscard]] double z_at(std::size_t l) const { return z.at(l - 1); }
  [[nodiscard]] double cell() const { return (b - a) / static_cast<double>(d); }
};

inline std::size_t integer_sqrt(std::size_t n) {
  auto r = static_cast<std::size_t>(std::sqrt(static_cast<double>(n)));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

inline GridLayout grid_layout(double a, double b, std::size_t n, double mu0 = 0.5) {
  if (!(a < b)) throw std::invalid_argument("grid_layout: requires a < b");
  if (!(mu0 > 0.0 && mu0 < 1.0)) throw std::invalid_argument("grid_layout: mu0 must lie in (0,1)");
  if (n < 9) throw std::invalid_argument("grid_layout: n must be at least 9");

  GridLayout g;
  g.a = a;
  g.b = b;
  g.n = n;
  g.d = integer_sqrt(n);
  g.h = (b - a) / (2.0 * static_cast<double>(g.d));
  g.h_tilde = 1.0 / (2.0 * static_cast<double>(g.d));
  g.mu0 = mu0;
  g.q = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(n) * g.h_tilde, mu0)));
  g.eps_tilde = 1.0 / (2.0 + std::log(static_cast<double>(n)));
  if (g.q < 1) throw std::invalid_argument("grid_layout: n too small for a pilot of length q >= 1");

  const std::size_t two_d = 2 * g.d;
  g.z.resize(g.d);
  g.windows.resize(g.d);
  for (std::size_t l = 1; l <= g.d; ++l) {
    g.z[l - 1] = a + static_cast<double>(l) * (b - a) / static_cast<double>(g.d);
    Window& w = g.windows[l - 1];
    // k1 = [n z~ - n h~] + 1, k2 = [n z~ + n h~] ^ n with z~ = l/d, h~ = 1/(2d).
    w.k1 = (n * (2 * l - 1)) / two_d + 1;
    w.k2 = l == g.d ? n : std::min((n * (2 * l + 1)) / two_d, n);
    w.iota = w.k1 + g.q;
    if (w.iota + 1 >= w.k2) {
      throw std::invalid_argument("grid_layout: window of grid point " + std::to_string(l) +
                                  " is too short for the sequential stage (n = " + std::to_string(n) + ")");
    }
  }
  return g;
}

inline GridLayout grid_layout(const ModelSpec& spec, double mu0 = 0.5) {
  return grid_layout(spec.a, spec.b, spec.n, mu0);
}

/// Kernel weight Q_{l,j}: the indicator of the window of grid point l.
inline double kernel_weight(const GridLayout& g, std::size_t l, std::size_t j) {
  return g.window(l).contains(j) ? 1.0 : 0.0;
}

struct PilotEstimate {
  double pilot = 0.0;
  double pilot_proj = 0.0;
  bool degenerate = false;
};

/// Projection onto [-1 + eps, 1 - eps].
inline double project_pilot(double pilot, double eps_tilde) {
  return std::min(std::max(pilot, -1.0 + eps_tilde), 1.0 - eps_tilde);
}

/// Ratio estimator over the pilot indices k1..iota, then projected.
inline PilotEstimate pilot_estimate(std::span<const double> y, const Window& w, double eps_tilde) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t j = w.k1; j <= w.iota; ++j) {
    num += y[j - 1] * y[j];
    den += y[j - 1] * y[j - 1];
  }
  PilotEstimate p;
  if (den == 0.0) {
    p.degenerate = true;
    p.pilot = 0.0;
  } else {
    p.pilot = num / den;
  }
  p.pilot_proj = project_pilot(p.pilot, eps_tilde);
  return p;
}

inline PilotEstimate pilot_estimate(const Path& path, const GridLayout& g, std::size_t l) {
  return pilot_estimate(path.y, g.window(l), g.eps_tilde);
}

/// H = (1 - eps~) (k2 - iota - 1) / (1 - pilot_proj^2).
inline double threshold(std::size_t main_stage_length, double pilot_proj, double eps_tilde) {
  const double gamma_tilde = 1.0 - pilot_proj * pilot_proj;
  return (1.0 - eps_tilde) * static_cast<double>(main_stage_length) / gamma_tilde;
}

inline double threshold(const GridLayout& g, std::size_t l, double pilot_proj) {
  return threshold(g.window(l).main_stage_length(), pilot_proj, g.eps_tilde);
}

/// Outcome of the stopping rule on one window for a given threshold.
struct StoppingOutcome {
  std::size_t tau = 0;
  double kappa = 1.0;
  double a_before = 0.0;  // A_{iota, tau-1}
  double raw_estimate = 0.0;  // S*_l before the Gamma_l indicator
  bool gamma_ok = false;      // A_{iota, k2-1} >= H
};

/// Accumulates A_{iota,k} = sum_{j=iota+1}^k y_{j-1}^2 until it reaches H.
/// tau is the first such k in (iota, k2], or k2 when none; kappa solves
/// A_{iota,tau-1} + kappa^2 y_{tau-1}^2 = H. When the threshold is never
/// reached even at k2, kappa is left at 1.
inline StoppingOutcome sequential_stage(std::span<const double> y, const Window& w, double H) {
  StoppingOutcome out;
  WindowSum info(w.k2 - w.iota);
  WindowSum cross(w.k2 - w.iota);
  double before = 0.0;
  double cross_before = 0.0;
  std::size_t tau = w.k2;
  bool reached = false;
  for (std::size_t k = w.iota + 1; k <= w.k2; ++k) {
    before = info.value();
    cross_before = cross.value();
    info.add(y[k - 1] * y[k - 1]);
    cross.add(y[k - 1] * y[k]);
    if (info.value() >= H) {
      tau = k;
      reached = true;
      break;
    }
  }
  if (!reached) {
    // A_{iota,k2} < H: tau = k2 by convention.
    out.tau = w.k2;
    out.a_before = before;
    out.kappa = 1.0;
    out.gamma_ok = false;
    return out;
  }
  out.tau = tau;
  out.a_before = before;
  const double last = y[tau - 1] * y[tau - 1];
  out.gamma_ok = tau < w.k2;  // A_{iota,k2-1} >= H  <=>  tau <= k2 - 1
  if (last == 0.0) {
    out.gamma_ok = false;
    out.kappa = 1.0;
    return out;
  }
  out.kappa = std::sqrt((H - before) / last);
  out.raw_estimate = (cross_before + out.kappa * y[tau - 1] * y[tau]) / H;
  return out;
}

struct PointProcedureResult {
  std::size_t l = 0;
  std::size_t k1 = 0;
  std::size_t k2 = 0;
  std::size_t iota = 0;
  double pilot = 0.0;
  double pilot_proj = 0.0;
  bool pilot_degenerate = false;
  double gamma_tilde = 1.0;
  double H = 0.0;
  std::size_t tau = 0;
  double kappa = 1.0;
  double a_before = 0.0;  // A_{iota, tau-1}
  double estimate = 0.0;  // S*_l, zero off Gamma_l
  bool gamma_ok = false;
  double sigma2 = 0.0;  // 1 / H
};

inline PointProcedureResult run_point_procedure(std::span<const double> y, const GridLayout& g, std::size_t l) {
  const Window& w = g.window(l);
  const PilotEstimate p = pilot_estimate(y, w, g.eps_tilde);

  PointProcedureResult r;
  r.l = l;
  r.k1 = w.k1;
  r.k2 = w.k2;
  r.iota = w.iota;
  r.pilot = p.pilot;
  r.pilot_proj = p.pilot_proj;
  r.pilot_degenerate = p.degenerate;
  r.gamma_tilde = 1.0 - p.pilot_proj * p.pilot_proj;
  r.H = threshold(w.main_stage_length(), p.pilot_proj, g.eps_tilde);
  r.sigma2 = 1.0 / r.H;

  const StoppingOutcome s = sequential_stage(y, w, r.H);
  r.tau = s.tau;
  r.kappa = s.kappa;
  r.a_before = s.a_before;
  r.gamma_ok = s.gamma_ok;
  r.estimate = s.gamma_ok ? s.raw_estimate : 0.0;
  return r;
}

inline PointProcedureResult run_point_procedure(const Path& path, const GridLayout& g, std::size_t l) {
  if (path.n() != g.n) throw std::invalid_argument("run_point_procedure: path and layout disagree on n");
  return run_point_procedure(path.y, g, l);
}

struct SigmaBounds {
  double lower = 0.0;  // sigma_{0,*}
  double upper = 0.0;  // sigma_{1,*}
};

/// sigma_{0,*} = (1 - eps^2) / (2 (1 - eps~) n h~),
/// sigma_{1,*} = 1 / ((1 - eps~) (2 n h~ - q - 3)).
inline SigmaBounds sigma_bounds(const GridLayout& g, double eps) {
  const double nh = static_cast<double>(g.n) * g.h_tilde;
  SigmaBounds s;
  s.lower = (1.0 - eps * eps) / (2.0 * (1.0 - g.eps_tilde) * nh);
  s.upper = 1.0 / ((1.0 - g.eps_tilde) * (2.0 * nh - static_cast<double>(g.q) - 3.0));
  return s;
}

/// The derived regression Y_l = S(z_l) + zeta_l on the grid.
struct RegressionData {
  double a = 0.0;
  double b = 1.0;
  std::vector<double> z;
  std::vector<double> Y;
  std::vector<double> sigma2;
  bool gamma_all = false;
  SigmaBounds sigma_bounds;
  std::vector<PointProcedureResult> point_results;

  [[nodiscard]] std::size_t d() const { return z.size(); }
};

/// Runs the point procedure at every grid point; Y_l = S*_l when every
/// window reached its threshold, and Y = 0 otherwise.
inline RegressionData build_regression(const Path& path, const GridLayout& g, double eps) {
  if (path.n() != g.n) throw std::invalid_argument("build_regression: path and layout disagree on n");
  RegressionData data;
  data.a = g.a;
  data.b = g.b;
  data.z = g.z;
  data.Y.assign(g.d, 0.0);
  data.sigma2.resize(g.d);
  data.point_results.reserve(g.d);
  data.gamma_all = true;
  for (std::size_t l = 1; l <= g.d; ++l) {
    data.point_results.push_back(run_point_procedure(path.y, g, l));
    const auto& r = data.point_results.back();
    data.sigma2[l - 1] = r.sigma2;
    data.gamma_all = data.gamma_all && r.gamma_ok;
  }
  if (data.gamma_all) {
    for (std::size_t l = 0; l < g.d; ++l) data.Y[l] = data.point_results[l].estimate;
  }
  data.sigma_bounds = sigma_bounds(g, eps);
  return data;
}

/// Modified weight Q^_{l,j}: y_{j-1} inside the window before k2, sqrt(H)
/// at j = k2, zero outside the window.
inline double modified_weight(std::span<const double> y, const Window& w, double H, std::size_t j) {
  if (!w.contains(j)) return 0.0;
  return j < w.k2 ? y[j - 1] : std::sqrt(H);
}

/// Always-defined stochastic term eta_l of grid point l, together with the
/// modified stopping time and correction it was built from.
struct EtaVariable {
  double eta = 0.0;
  double sigma2 = 0.0;
  std::size_t tau_check = 0;
  double kappa_check = 1.0;
};

inline EtaVariable eta_variable(std::span<const double> y, std::span<const double> xi, const Window& w, double H) {
  EtaVariable e;
  e.sigma2 = 1.0 / H;
  WindowSum info(w.k2 - w.iota);
  WindowSum noise(w.k2 - w.iota);
  for (std::size_t k = w.iota + 1; k <= w.k2; ++k) {
    const double before = info.value();
    const double qk = modified_weight(y, w, H, k);
    info.add(qk * qk);
    // At k2 the term sqrt(H)^2 reaches H by construction; rounding may leave it one ulp short.
    if (info.value() >= H || k == w.k2) {
      e.tau_check = k;
      e.kappa_check = std::min(1.0, std::sqrt((H - before) / (qk * qk)));
      e.eta = (noise.value() + e.kappa_check * qk * xi[k]) / H;
      return e;
    }
    noise.add(qk * xi[k]);
  }
  throw std::logic_error("eta_variable: modified information never reached the threshold");
}

/// eta_l for every grid point. Requires the noise record of the path, and
/// checks that the modified stopping time and correction agree with the
/// originals wherever Gamma_l holds.
inline std::vector<EtaVariable> eta_variables(const Path& path, const GridLayout& g) {
  if (!path.has_noise_record()) {
    throw std::invalid_argument("eta_variables: the path carries no noise record");
  }
  std::vector<EtaVariable> out;
  out.reserve(g.d);
  for (std::size_t l = 1; l <= g.d; ++l) {
    const auto r = run_point_procedure(path.y, g, l);
    EtaVariable e = eta_variable(path.y, path.xi, g.window(l), r.H);
    if (r.gamma_ok && (e.tau_check != r.tau || std::abs(e.kappa_check - r.kappa) > 1e-12 * r.kappa)) {
      throw std::logic_error("eta_variables: modified stopping rule disagrees with the original at l = " +
                             std::to_string(l));
    }
    out.push_back(e);
  }
  return out;
}

/// (1 / (m1 - m0)) sum_{j=m0+1}^{m1} y_j^2 - 1 / gamma.
inline double upsilon_statistic(std::span<const double> y, std::size_t m0, std::size_t m1, double gamma) {
  if (m0 >= m1) throw std::invalid_argument("upsilon_statistic: empty range (need m0 < m1)");
  if (m1 >= y.size()) throw std::invalid_argument("upsilon_statistic: range exceeds the path");
  if (!(gamma > 0.0 && gamma <= 1.0)) throw std::invalid_argument("upsilon_statistic: gamma must lie in (0,1]");
  double sum = 0.0;
  for (std::size_t j = m0 + 1; j <= m1; ++j) sum += y[j] * y[j];
  return sum / static_cast<double>(m1 - m0) - 1.0 / gamma;
}

}  // namespace seqar
