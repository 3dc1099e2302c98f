#pragma once

// Monte Carlo risk of the weighted least-squares family and of the selected
// estimator, robust (max over noise laws) risk, and the diagnostic checks on
// the stochastic terms of the derived regression.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "seqar/numeric.hpp"
#include "seqar/parallel.hpp"
#include "seqar/process.hpp"
#include "seqar/selection.hpp"
#include "seqar/seqkernel.hpp"
#include "seqar/weights.hpp"

namespace seqar {

/// ||f||_d^2 = ((b-a)/d) sum_l f(z_l)^2.
inline double empirical_norm_sq(std::span<const double> f_on_grid, double a, double b) {
  if (f_on_grid.empty()) throw std::invalid_argument("empirical_norm_sq: empty vector");
  double s = 0.0;
  for (double v : f_on_grid) s += v * v;
  return (b - a) / static_cast<double>(f_on_grid.size()) * s;
}

/// Composite Simpson approximation of the integral of f^2 over [a,b].
inline double l2_norm_sq(const std::function<double(double)>& f, double a, double b,
                         std::size_t quad_points = 100000) {
  if (quad_points < 1000) throw std::invalid_argument("l2_norm_sq: quad_points must be >= 1000");
  const std::size_t m = quad_points + (quad_points % 2);  // even number of panels
  const double step = (b - a) / static_cast<double>(m);
  CompensatedSum sum;
  for (std::size_t i = 0; i <= m; ++i) {
    const double x = i == m ? b : a + static_cast<double>(i) * step;
    const double fx = f(x);
    const double w = (i == 0 || i == m) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    sum.add(w * fx * fx);
  }
  return sum.value() * step / 3.0;
}

namespace detail {
// 5-point Gauss-Legendre nodes and weights on [-1, 1].
inline constexpr std::array<double, 5> kGaussNodes{-0.9061798459386640, -0.5384693101056831, 0.0,
                                                   0.5384693101056831, 0.9061798459386640};
inline constexpr std::array<double, 5> kGaussWeights{0.2369268850561891, 0.4786286704993665,
                                                     0.5688888888888889, 0.4786286704993665,
                                                     0.2369268850561891};
}  // namespace detail

/// Integrals of f and f^2 over the cells [a, z_1], (z_1, z_2], ..., (z_{d-1}, z_d]
/// of the piecewise-constant extension. With these, the continuous L2
/// distance between f and any piecewise-constant g is exact algebra.
struct CellIntegrals {
  double a = 0.0;
  double b = 1.0;
  std::vector<double> length;
  std::vector<double> integral;
  std::vector<double> integral_sq;

  [[nodiscard]] std::size_t d() const { return length.size(); }
};

inline CellIntegrals cell_integrals(const std::function<double(double)>& f, double a, double b, std::size_t d,
                                    std::size_t panels_per_cell = 16) {
  CellIntegrals c;
  c.a = a;
  c.b = b;
  c.length.resize(d);
  c.integral.resize(d);
  c.integral_sq.resize(d);
  auto z = [&](std::size_t l) { return l == d ? b : a + static_cast<double>(l) * (b - a) / static_cast<double>(d); };
  for (std::size_t l = 1; l <= d; ++l) {
    const double lo = z(l - 1);
    const double hi = z(l);
    const double panel = (hi - lo) / static_cast<double>(panels_per_cell);
    double s1 = 0.0;
    double s2 = 0.0;
    for (std::size_t p = 0; p < panels_per_cell; ++p) {
      const double mid = lo + (static_cast<double>(p) + 0.5) * panel;
      for (std::size_t k = 0; k < detail::kGaussNodes.size(); ++k) {
        const double fx = f(mid + 0.5 * panel * detail::kGaussNodes[k]);
        s1 += detail::kGaussWeights[k] * fx;
        s2 += detail::kGaussWeights[k] * fx * fx;
      }
    }
    c.length[l - 1] = hi - lo;
    c.integral[l - 1] = 0.5 * panel * s1;
    c.integral_sq[l - 1] = 0.5 * panel * s2;
  }
  return c;
}

/// ||g - f||^2 for g piecewise constant with value g_l on cell l.
inline double piecewise_l2_error(std::span<const double> g_on_grid, const CellIntegrals& cells) {
  if (g_on_grid.size() != cells.d()) throw std::invalid_argument("piecewise_l2_error: grid size mismatch");
  double s = 0.0;
  for (std::size_t l = 0; l < cells.d(); ++l) {
    const double g = g_on_grid[l];
    s += g * g * cells.length[l] - 2.0 * g * cells.integral[l] + cells.integral_sq[l];
  }
  return std::max(s, 0.0);
}

/// Fixed parameters of the estimation pipeline.
struct PipelineConfig {
  double mu0 = 0.5;
  double delta = kMaxPenaltyMultiplier;
  double k_star0 = 0.0;
  StabilityParams stability{};
  /// Weight family for a given (n, d); the Pinsker family when empty.
  std::function<std::vector<std::vector<double>>(std::size_t n, std::size_t d)> family;
  std::size_t workers = 1;
};

inline std::vector<std::vector<double>> family_for(const PipelineConfig& cfg, std::size_t n, std::size_t d) {
  if (cfg.family) return cfg.family(n, d);
  return build_weight_family(WeightGridParams{cfg.k_star0, n, d}).vectors();
}

inline std::vector<std::uint64_t> replication_seeds(std::uint64_t base, std::size_t count) {
  std::vector<std::uint64_t> seeds(count);
  for (std::size_t r = 0; r < count; ++r) seeds[r] = stream_seed(base, r);
  return seeds;
}

/// Everything that depends on (spec, n) only, shared by all replications.
struct PipelineContext {
  ModelSpec spec;
  PipelineConfig config;
  GridLayout layout;
  Basis basis;
  std::vector<std::vector<double>> family;
  CellIntegrals cells;
  std::vector<double> truth_on_grid;  // S(z_l)

  PipelineContext(const ModelSpec& model, const PipelineConfig& cfg)
      : spec(model),
        config(cfg),
        layout(grid_layout(model, cfg.mu0)),
        basis(build_basis(layout.d, model.a, model.b)),
        family(family_for(cfg, model.n, layout.d)),
        cells(cell_integrals(model.S.value, model.a, model.b, layout.d)) {
    check_delta(cfg.delta);
    cfg.stability.validate();
    truth_on_grid.resize(layout.d);
    for (std::size_t l = 1; l <= layout.d; ++l) truth_on_grid[l - 1] = model.S(layout.z_at(l));
  }
};

/// Output of the full estimator on one path.
struct PipelineOutput {
  RegressionData data;
  FourierEstimates fourier;
  SelectionResult selection;
};

inline PipelineOutput run_pipeline(const PipelineContext& ctx, const Path& path) {
  PipelineOutput out{build_regression(path, ctx.layout, ctx.config.stability.eps), {}, {}};
  out.fourier = fourier_estimates(out.data, ctx.basis);
  out.selection = select(out.fourier, ctx.basis, ctx.family, ctx.config.delta);
  return out;
}

struct ReplicationRecord {
  std::uint64_t seed = 0;
  bool gamma = false;
  std::vector<double> lambda_risk;      // ||S^_lambda - S||^2 per lambda
  std::vector<double> lambda_risk_emp;  // ||S^_lambda - S||_d^2 per lambda
  std::size_t selected_index = 0;
  double selected_risk = 0.0;
  double selected_risk_emp = 0.0;
};

inline ReplicationRecord evaluate_replication(const PipelineContext& ctx, std::uint64_t seed) {
  const Path path = simulate_path(ctx.spec, seed);
  const PipelineOutput out = run_pipeline(ctx, path);
  ReplicationRecord rec;
  rec.seed = seed;
  rec.gamma = out.data.gamma_all;
  rec.lambda_risk.reserve(ctx.family.size());
  rec.lambda_risk_emp.reserve(ctx.family.size());
  std::vector<double> diff(ctx.layout.d);
  for (const auto& lambda : ctx.family) {
    const auto fit = weighted_fit(lambda, out.fourier, ctx.basis);
    rec.lambda_risk.push_back(piecewise_l2_error(fit, ctx.cells));
    for (std::size_t l = 0; l < fit.size(); ++l) diff[l] = fit[l] - ctx.truth_on_grid[l];
    rec.lambda_risk_emp.push_back(empirical_norm_sq(diff, ctx.spec.a, ctx.spec.b));
  }
  rec.selected_index = out.selection.lambda_index;
  rec.selected_risk = rec.lambda_risk[rec.selected_index];
  rec.selected_risk_emp = rec.lambda_risk_emp[rec.selected_index];
  return rec;
}

struct RiskReport {
  std::size_t n = 0;
  std::vector<double> per_lambda_risk;
  std::vector<double> per_lambda_se;
  double selected_risk = 0.0;
  double selected_se = 0.0;
  double oracle_risk = 0.0;
  double oracle_se = 0.0;
  std::size_t oracle_index = 0;
  double oracle_ratio = 0.0;
  double selected_risk_emp = 0.0;
  double oracle_risk_emp = 0.0;
  std::size_t replications = 0;
  double gamma_c_frequency = 0.0;

  /// Combined standard error of selected_risk - oracle_risk (independent approximation).
  [[nodiscard]] double combined_se() const { return std::sqrt(selected_se * selected_se + oracle_se * oracle_se); }
};

inline double risk_ratio(double selected, double oracle) {
  if (oracle > 0.0) return selected / oracle;
  return selected == oracle ? 1.0 : std::numeric_limits<double>::infinity();
}

inline RiskReport summarize(std::size_t n, std::span<const ReplicationRecord> records) {
  if (records.empty()) throw std::invalid_argument("summarize: no replications");
  const std::size_t nu = records.front().lambda_risk.size();
  std::vector<MeanAccumulator> per(nu);
  std::vector<MeanAccumulator> per_emp(nu);
  MeanAccumulator sel;
  MeanAccumulator sel_emp;
  MeanAccumulator gamma_c;
  for (const auto& r : records) {
    for (std::size_t i = 0; i < nu; ++i) {
      per[i].add(r.lambda_risk[i]);
      per_emp[i].add(r.lambda_risk_emp[i]);
    }
    sel.add(r.selected_risk);
    sel_emp.add(r.selected_risk_emp);
    gamma_c.add(r.gamma ? 0.0 : 1.0);
  }
  RiskReport rep;
  rep.n = n;
  rep.replications = records.size();
  for (std::size_t i = 0; i < nu; ++i) {
    rep.per_lambda_risk.push_back(per[i].mean());
    rep.per_lambda_se.push_back(per[i].std_error());
  }
  rep.selected_risk = sel.mean();
  rep.selected_se = sel.std_error();
  rep.selected_risk_emp = sel_emp.mean();
  rep.oracle_index = argmin_first(rep.per_lambda_risk);
  rep.oracle_risk = rep.per_lambda_risk[rep.oracle_index];
  rep.oracle_se = rep.per_lambda_se[rep.oracle_index];
  double best_emp = std::numeric_limits<double>::infinity();
  for (const auto& acc : per_emp) best_emp = std::min(best_emp, acc.mean());
  rep.oracle_risk_emp = best_emp;
  rep.oracle_ratio = risk_ratio(rep.selected_risk, rep.oracle_risk);
  rep.gamma_c_frequency = gamma_c.mean();
  return rep;
}

struct RiskRun {
  RiskReport report;
  std::vector<ReplicationRecord> records;
};

inline void require_stable(const ModelSpec& spec, const StabilityParams& stability) {
  const auto stab = check_stability(spec, stability);
  if (!stab.in_theta) {
    throw std::invalid_argument("coefficient '" + spec.S.name + "' is outside the stability set (sup|S| = " +
                                std::to_string(stab.sup_S) + ", sup|S'| = " + std::to_string(stab.sup_dS) + ")");
  }
}

/// Replication r uses seeds[r]; results are reduced in seed order.
inline RiskRun monte_carlo_risk(const ModelSpec& spec, const PipelineConfig& config,
                                std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw std::invalid_argument("monte_carlo_risk: need at least one replication");
  require_stable(spec, config.stability);
  const PipelineContext ctx(spec, config);
  RiskRun run;
  run.records = parallel_map(seeds.size(), config.workers,
                             [&](std::size_t r) { return evaluate_replication(ctx, seeds[r]); });
  run.report = summarize(spec.n, run.records);
  return run;
}

struct RobustRiskReport {
  RiskReport robust;              // componentwise max over the density set
  std::vector<NoiseDensity> densities;
  std::vector<RiskRun> members;   // one run per density, same seeds
};

inline RobustRiskReport robust_risk(const ModelSpec& spec, std::span<const NoiseDensity> densities,
                                    const PipelineConfig& config, std::span<const std::uint64_t> seeds) {
  if (densities.empty()) throw std::invalid_argument("robust_risk: empty density set");
  RobustRiskReport out;
  out.densities.assign(densities.begin(), densities.end());
  for (const auto& p : densities) {
    ModelSpec member = spec;
    member.noise = p;
    out.members.push_back(monte_carlo_risk(member, config, seeds));
  }
  RiskReport rob = out.members.front().report;
  for (std::size_t m = 1; m < out.members.size(); ++m) {
    const RiskReport& r = out.members[m].report;
    for (std::size_t i = 0; i < rob.per_lambda_risk.size(); ++i) {
      if (r.per_lambda_risk[i] > rob.per_lambda_risk[i]) {
        rob.per_lambda_risk[i] = r.per_lambda_risk[i];
        rob.per_lambda_se[i] = r.per_lambda_se[i];
      }
    }
    if (r.selected_risk > rob.selected_risk) {
      rob.selected_risk = r.selected_risk;
      rob.selected_se = r.selected_se;
    }
    rob.selected_risk_emp = std::max(rob.selected_risk_emp, r.selected_risk_emp);
    rob.gamma_c_frequency = std::max(rob.gamma_c_frequency, r.gamma_c_frequency);
  }
  rob.oracle_index = argmin_first(rob.per_lambda_risk);
  rob.oracle_risk = rob.per_lambda_risk[rob.oracle_index];
  rob.oracle_se = rob.per_lambda_se[rob.oracle_index];
  double best_emp = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rob.per_lambda_risk.size(); ++i) {
    double worst = 0.0;
    for (const auto& m : out.members) {
      double acc = 0.0;
      for (const auto& rec : m.records) acc += rec.lambda_risk_emp[i];
      worst = std::max(worst, acc / static_cast<double>(m.records.size()));
    }
    best_emp = std::min(best_emp, worst);
  }
  rob.oracle_risk_emp = best_emp;
  rob.oracle_ratio = risk_ratio(rob.selected_risk, rob.oracle_risk);
  out.robust = rob;
  return out;
}

/// (1 + 4 delta)(1 + delta)^2 / (1 - 6 delta): leading factor of the oracle
/// inequality for the quadratic risk.
inline double oracle_bound_factor(double delta) {
  return (1.0 + 4.0 * delta) * (1.0 + delta) * (1.0 + delta) / (1.0 - 6.0 * delta);
}

/// Split of the regression noise Y_l - S(z_l) into the martingale part
/// xi*_l, the smoothness bias varpi_{1,l} and the correction bias varpi_{2,l}.
struct NoiseDecomposition {
  std::vector<double> xi_star;
  std::vector<double> varpi1;
  std::vector<double> varpi2;
  double u_d = 0.0;                // 1_Gamma ||varpi||_d^2
  double max_residual = 0.0;       // over points with Gamma_l
  double max_abs_varpi1 = 0.0;     // over points with Gamma_l
  std::size_t points_checked = 0;  // number of l with Gamma_l
};

inline constexpr double kDecompositionTolerance = 1e-9;

/// Requires the true coefficient (from the path's spec) and its noise record.
/// Throws std::logic_error if the identity S*_l - S(z_l) = xi*_l + varpi_l
/// fails on any grid point where Gamma_l holds.
inline NoiseDecomposition decompose_noise(const Path& path, const GridLayout& g, const RegressionData& data) {
  if (!path.has_noise_record()) throw std::invalid_argument("decompose_noise: the path carries no noise record");
  const auto& S = path.spec.S;
  const auto& y = path.y;
  const auto& xi = path.xi;
  NoiseDecomposition out;
  out.xi_star.assign(g.d, 0.0);
  out.varpi1.assign(g.d, 0.0);
  out.varpi2.assign(g.d, 0.0);
  for (std::size_t l = 1; l <= g.d; ++l) {
    const auto& r = data.point_results[l - 1];
    const double sz = S(g.z_at(l));
    double noise = 0.0;
    double bias = 0.0;
    for (std::size_t j = r.iota + 1; j < r.tau; ++j) {
      noise += y[j - 1] * xi[j];
      bias += y[j - 1] * y[j - 1] * (S(path.spec.design_point(j)) - sz);
    }
    const double last = y[r.tau - 1];
    const double s_tau = S(path.spec.design_point(r.tau));
    noise += r.kappa * last * xi[r.tau];
    bias += r.kappa * r.kappa * last * last * (s_tau - sz);
    out.xi_star[l - 1] = noise / r.H;
    out.varpi1[l - 1] = bias / r.H;
    out.varpi2[l - 1] = (r.kappa - r.kappa * r.kappa) * last * last * s_tau / r.H;
    if (r.gamma_ok) {
      ++out.points_checked;
      const double resid = r.estimate - sz - out.xi_star[l - 1] - out.varpi1[l - 1] - out.varpi2[l - 1];
      out.max_residual = std::max(out.max_residual, std::abs(resid));
      out.max_abs_varpi1 = std::max(out.max_abs_varpi1, std::abs(out.varpi1[l - 1]));
    }
  }
  if (out.max_residual > kDecompositionTolerance) {
    throw std::logic_error("decompose_noise: regression identity violated by " + std::to_string(out.max_residual));
  }
  if (data.gamma_all) {
    std::vector<double> varpi(g.d);
    for (std::size_t l = 0; l < g.d; ++l) varpi[l] = out.varpi1[l] + out.varpi2[l];
    out.u_d = empirical_norm_sq(varpi, g.a, g.b);
  }
  return out;
}

/// Per-replication quantities needed by the moment diagnostics.
struct DiagnosticSample {
  std::uint64_t seed = 0;
  bool gamma = false;
  std::vector<double> eta;     // eta_l
  std::vector<double> sigma2;  // sigma_l^2
  std::vector<double> eta_jd;  // sqrt((b-a)/d) sum_l eta_l phi_j(z_l)
  std::vector<double> s;       // s_{j,d}
  std::vector<bool> gamma_l;
  NoiseDecomposition decomposition;
};

struct DiagnosticsRun {
  ModelSpec spec;
  GridLayout layout;
  Basis basis;
  SigmaBounds bounds;
  std::vector<DiagnosticSample> samples;
};

inline DiagnosticSample diagnostic_sample(const ModelSpec& spec, const GridLayout& g, const Basis& basis,
                                          double eps, std::uint64_t seed) {
  const Path path = simulate_path(spec, seed);
  const RegressionData data = build_regression(path, g, eps);
  DiagnosticSample s;
  s.seed = seed;
  s.gamma = data.gamma_all;
  s.sigma2 = data.sigma2;
  for (const auto& r : data.point_results) s.gamma_l.push_back(r.gamma_ok);
  const auto etas = eta_variables(path, g);
  s.eta.reserve(g.d);
  for (const auto& e : etas) s.eta.push_back(e.eta);
  const double root_cell = std::sqrt(basis.cell());
  s.eta_jd.resize(g.d);
  for (std::size_t j = 1; j <= g.d; ++j) {
    const auto phi = basis.row(j);
    double acc = 0.0;
    for (std::size_t l = 0; l < g.d; ++l) acc += s.eta[l] * phi[l];
    s.eta_jd[j - 1] = root_cell * acc;
  }
  s.s = fourier_estimates(data.Y, data.sigma2, basis, data.gamma_all).s;
  s.decomposition = decompose_noise(path, g, data);
  return s;
}

inline DiagnosticsRun collect_diagnostics(const ModelSpec& spec, const PipelineConfig& config,
                                          std::span<const std::uint64_t> seeds) {
  if (seeds.empty()) throw std::invalid_argument("collect_diagnostics: need at least one replication");
  DiagnosticsRun run{spec, grid_layout(spec, config.mu0), {}, {}, {}};
  run.basis = build_basis(run.layout.d, spec.a, spec.b);
  run.bounds = sigma_bounds(run.layout, config.stability.eps);
  run.samples = parallel_map(seeds.size(), config.workers, [&](std::size_t r) {
    return diagnostic_sample(spec, run.layout, run.basis, config.stability.eps, seeds[r]);
  });
  return run;
}

/// m^ = 4 (144 / sqrt 3)^4 m*_4, with m*_4 = 3 varsigma^2 the largest fourth
/// moment allowed in the noise class.
inline double eta_fourth_moment_constant(double varsigma) {
  const double c = 144.0 / std::sqrt(3.0);
  return 4.0 * c * c * c * c * moment_class_bound(varsigma, 2);
}

struct MomentCheck {
  double lhs = 0.0;
  double lhs_se = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

struct QuadraticFormCheck {
  MomentCheck on_gamma;       // E 1_Gamma B^2(lambda)
  MomentCheck unconditional;  // E B^2(lambda)
};

/// B(lambda) = ((b-a)/sqrt d) sum_j lambda_j (eta_{j,d}^2 - s_{j,d}); the bound
/// is 10 (b-a) sigma_{1,*} m^ E P_d(lambda). Holds with a 3-SE allowance.
inline QuadraticFormCheck check_quadratic_form_bound(const DiagnosticsRun& run, std::span<const double> lambda) {
  const std::size_t d = run.layout.d;
  if (lambda.size() != d) throw std::invalid_argument("check_quadratic_form_bound: weight vector length must equal d");
  const double len = run.spec.b - run.spec.a;
  const double cell = len / static_cast<double>(d);
  MeanAccumulator on_gamma;
  MeanAccumulator uncond;
  MeanAccumulator pen;
  for (const auto& s : run.samples) {
    double B = 0.0;
    double P = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      B += lambda[j] * (s.eta_jd[j] * s.eta_jd[j] - s.s[j]);
      P += lambda[j] * lambda[j] * s.s[j];
    }
    B *= len / std::sqrt(static_cast<double>(d));
    P *= cell;
    on_gamma.add(s.gamma ? B * B : 0.0);
    uncond.add(B * B);
    pen.add(P);
  }
  const double rhs = 10.0 * len * run.bounds.upper * eta_fourth_moment_constant(run.spec.noise.varsigma) * pen.mean();
  auto finish = [&](const MeanAccumulator& acc) {
    MomentCheck c;
    c.lhs = acc.mean();
    c.lhs_se = run.samples.size() > 1 ? acc.std_error() : 0.0;
    c.rhs = rhs;
    c.holds = c.lhs - 3.0 * c.lhs_se <= c.rhs;
    return c;
  };
  return {finish(on_gamma), finish(uncond)};
}

/// E (sum_j v_j eta_{j,d})^2 <= sigma_{1,*} sum_j v_j^2, with a 3-SE allowance.
inline MomentCheck check_linear_form_bound(const DiagnosticsRun& run, std::span<const double> v) {
  const std::size_t d = run.layout.d;
  if (v.size() != d) throw std::invalid_argument("check_linear_form_bound: vector length must equal d");
  MeanAccumulator acc;
  for (const auto& s : run.samples) {
    double t = 0.0;
    for (std::size_t j = 0; j < d; ++j) t += v[j] * s.eta_jd[j];
    acc.add(t * t);
  }
  double norm = 0.0;
  for (double x : v) norm += x * x;
  MomentCheck c;
  c.lhs = acc.mean();
  c.lhs_se = run.samples.size() > 1 ? acc.std_error() : 0.0;
  c.rhs = run.bounds.upper * norm;
  c.holds = c.lhs - 3.0 * c.lhs_se <= c.rhs;
  return c;
}

struct NormComparisonCheck {
  double norm_sq = 0.0;             // ||f - g||^2
  double empirical_norm_sq = 0.0;   // ||f - g||_d^2
  double derivative_norm_sq = 0.0;  // ||f'||^2
  double continuous_bound = 0.0;    // (1+e)||.||_d^2 + (1+1/e)(b-a)^2 ||f'||^2 / d^2
  double empirical_bound = 0.0;     // (1+e)||.||^2 + same additive term
  bool holds_both = false;
};

/// Compares the continuous and grid norms of f - g for g piecewise constant
/// on the cells of the estimator's extension.
inline NormComparisonCheck check_norm_comparison(const Coefficient& f, std::span<const double> g_on_grid, double eps_tilde,
                                       double a, double b) {
  if (!(eps_tilde > 0.0)) throw std::invalid_argument("check_norm_comparison: eps_tilde must be positive");
  const std::size_t d = g_on_grid.size();
  NormComparisonCheck c;
  c.norm_sq = piecewise_l2_error(g_on_grid, cell_integrals(f.value, a, b, d));
  std::vector<double> diff(d);
  for (std::size_t l = 1; l <= d; ++l) {
    diff[l - 1] = f(a + static_cast<double>(l) * (b - a) / static_cast<double>(d)) - g_on_grid[l - 1];
  }
  c.empirical_norm_sq = empirical_norm_sq(diff, a, b);
  std::function<double(double)> df = f.derivative;
  if (!df) {
    const double step = 1e-6 * (b - a);
    df = [&f, step, a, b](double x) {
      const double lo = std::max(a, x - step);
      const double hi = std::min(b, x + step);
      return (f(hi) - f(lo)) / (hi - lo);
    };
  }
  c.derivative_norm_sq = l2_norm_sq(df, a, b);
  const double extra = (1.0 + 1.0 / eps_tilde) * c.derivative_norm_sq * (b - a) * (b - a) /
                       (static_cast<double>(d) * static_cast<double>(d));
  c.continuous_bound = (1.0 + eps_tilde) * c.empirical_norm_sq + extra;
  c.empirical_bound = (1.0 + eps_tilde) * c.norm_sq + extra;
  c.holds_both = c.norm_sq <= c.continuous_bound && c.empirical_norm_sq <= c.empirical_bound;
  return c;
}

}  // namespace seqar
