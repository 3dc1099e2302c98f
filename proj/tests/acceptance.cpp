// End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. Seeds and tolerances are fixed here.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "seqar/experiment.hpp"
#include "seqar/risk.hpp"

using namespace seqar;
namespace fs = std::filesystem;

namespace {

constexpr double kIdentityRelTol = 1e-9;
constexpr double kDecompositionTol = 1e-9;
constexpr double kGramTol = 1e-10;
constexpr double kMomentZ = 3.0;
constexpr double kOracleRatioBand = 3.14;
constexpr double kDominanceSe = 2.0;

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o, double seconds) {
  char time_buf[32];
  std::snprintf(time_buf, sizeof time_buf, "%.1fs", seconds);
  std::cout << "[" << (o.pass ? "PASS" : "FAIL") << "] " << id << " " << name << " (" << time_buf << "): " << o.detail
            << std::endl;
  if (!o.pass) ++failures;
}

template <class F>
void criterion(int id, const std::string& name, double budget_seconds, F&& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (secs > budget_seconds) {
    o.pass = false;
    o.detail += "; runtime over budget of " + format_real(budget_seconds) + "s";
  }
  report(id, name, o, secs);
}

std::string num(double x) {
  std::ostringstream ss;
  ss.precision(6);
  ss << x;
  return ss.str();
}

ModelSpec model(std::string_view s, std::size_t n, NoiseKind kind = NoiseKind::gaussian) {
  ModelSpec spec;
  spec.n = n;
  spec.S = make_coefficient(s);
  spec.noise.kind = kind;
  return spec;
}

PipelineConfig sine_pipeline() {
  PipelineConfig cfg;
  cfg.stability = {0.5, 2.0};
  if (const char* w = std::getenv("SEQAR_WORKERS")) cfg.workers = std::max(1, std::atoi(w));
  return cfg;
}

// Shared by criteria 1 and 3.
struct IdentityRun {
  std::size_t replications = 0;
  std::size_t gamma_l_points = 0;
  double worst_rel = 0.0;
  std::size_t gamma_replications = 0;
  std::size_t band_violations_on_gamma = 0;
  std::size_t band_checked_on_gamma = 0;
  std::size_t band_violations_on_points = 0;
  SigmaBounds bounds;
};

IdentityRun identity_run() {
  const ModelSpec spec = model("sine:0.3,1", 2000);
  const GridLayout g = grid_layout(spec);
  const auto seeds = replication_seeds(101, 1000);
  IdentityRun out;
  out.replications = seeds.size();
  out.bounds = sigma_bounds(g, 0.5);
  for (auto seed : seeds) {
    const Path p = simulate_path(spec, seed);
    const RegressionData data = build_regression(p, g, 0.5);
    for (const auto& r : data.point_results) {
      if (!r.gamma_ok) continue;
      ++out.gamma_l_points;
      const double y = p.y[r.tau - 1];
      const double lhs = r.a_before + r.kappa * r.kappa * y * y;
      out.worst_rel = std::max(out.worst_rel, std::abs(lhs - r.H) / r.H);
      if (r.sigma2 < out.bounds.lower || r.sigma2 > out.bounds.upper) ++out.band_violations_on_points;
    }
    if (data.gamma_all) {
      ++out.gamma_replications;
      for (double s2 : data.sigma2) {
        ++out.band_checked_on_gamma;
        if (s2 < out.bounds.lower || s2 > out.bounds.upper) ++out.band_violations_on_gamma;
      }
    }
  }
  return out;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string manifest_without_timestamp(const fs::path& p) {
  json m = json::parse(slurp(p));
  m.erase("timestamp");
  return m.dump();
}

}  // namespace

int main() {
  std::cout << "seqar acceptance run" << std::endl;

  IdentityRun ident;
  criterion(1, "stopping-rule identity", 60.0, [&] {
    ident = identity_run();
    Outcome o;
    o.pass = ident.gamma_l_points > 0 && ident.worst_rel <= kIdentityRelTol;
    o.detail = "max relative error " + num(ident.worst_rel) + " over " + std::to_string(ident.gamma_l_points) +
               " Gamma_l points in " + std::to_string(ident.replications) + " replications (tol 1e-9)";
    return o;
  });

  criterion(2, "eta moments", 600.0, [] {
    const ModelSpec spec = model("zero", 10000);
    const auto run = collect_diagnostics(spec, sine_pipeline(), replication_seeds(102, 2000));
    const double m_check = eta_fourth_moment_constant(spec.noise.varsigma);
    std::size_t bad_mean = 0;
    std::size_t bad_var = 0;
    std::size_t bad_fourth = 0;
    double worst_mean = 0.0;
    double worst_var = 0.0;
    double worst_fourth = 0.0;
    for (std::size_t l = 0; l < run.layout.d; ++l) {
      MeanAccumulator mean;
      MeanAccumulator scaled;
      MeanAccumulator fourth;
      MeanAccumulator sigma4;
      for (const auto& s : run.samples) {
        mean.add(s.eta[l]);
        scaled.add(s.eta[l] * s.eta[l] / s.sigma2[l]);
        fourth.add(std::pow(s.eta[l], 4));
        sigma4.add(s.sigma2[l] * s.sigma2[l]);
      }
      const double zm = std::abs(mean.mean()) / mean.std_error();
      const double zv = std::abs(scaled.mean() - 1.0) / scaled.std_error();
      const double r4 = fourth.mean() / (m_check * sigma4.mean());
      worst_mean = std::max(worst_mean, zm);
      worst_var = std::max(worst_var, zv);
      worst_fourth = std::max(worst_fourth, r4);
      bad_mean += zm > kMomentZ ? 1 : 0;
      bad_var += zv > kMomentZ ? 1 : 0;
      bad_fourth += r4 > 1.0 ? 1 : 0;
    }
    Outcome o;
    o.pass = bad_mean == 0 && bad_var == 0 && bad_fourth == 0;
    o.detail = "d=" + std::to_string(run.layout.d) + ", points outside 3 SE: mean " + std::to_string(bad_mean) +
               " (max z " + num(worst_mean) + "), scaled variance " + std::to_string(bad_var) + " (max z " +
               num(worst_var) + "); fourth moment violations " + std::to_string(bad_fourth) +
               " (max E eta^4 / (m sigma^4) = " + num(worst_fourth) + ")";
    return o;
  });

  criterion(3, "sigma band on Gamma replications", 60.0, [&] {
    Outcome o;
    o.pass = ident.band_violations_on_gamma == 0;
    o.detail = "[" + num(ident.bounds.lower) + ", " + num(ident.bounds.upper) + "]: " +
               std::to_string(ident.band_violations_on_gamma) + " violations in " +
               std::to_string(ident.band_checked_on_gamma) + " comparisons";
    if (ident.gamma_replications == 0) {
      o.detail += " (vacuous: 0 of " + std::to_string(ident.replications) + " replications in Gamma)";
    }
    o.detail += "; informational: " + std::to_string(ident.band_violations_on_points) + " of " +
                std::to_string(ident.gamma_l_points) + " individual Gamma_l points fall outside the band";
    return o;
  });

  criterion(4, "basis orthonormality", 5.0, [] {
    double worst = 0.0;
    std::size_t worst_d = 0;
    for (std::size_t d = 3; d <= 200; ++d) {
      Basis b;
      try {
        b = build_basis(d, 0.0, 1.0);
      } catch (const std::logic_error&) {
        return Outcome{false, "basis construction rejected d = " + std::to_string(d)};
      }
      const double dev = gram_deviation(b);
      if (dev > worst) {
        worst = dev;
        worst_d = d;
      }
    }
    return Outcome{worst <= kGramTol, "max Gram deviation " + num(worst) + " at d = " + std::to_string(worst_d)};
  });

  criterion(5, "regression noise decomposition", 120.0, [] {
    const ModelSpec spec = model("sine:0.3,1", 2000);
    const PipelineConfig cfg = sine_pipeline();
    const GridLayout g = grid_layout(spec);
    const double Lh = cfg.stability.L * g.h;
    double worst_resid = 0.0;
    double worst_varpi1 = 0.0;
    std::size_t points = 0;
    std::size_t gamma_reps = 0;
    for (auto seed : replication_seeds(105, 200)) {
      const Path p = simulate_path(spec, seed);
      const RegressionData data = build_regression(p, g, cfg.stability.eps);
      NoiseDecomposition dec;
      try {
        dec = decompose_noise(p, g, data);
      } catch (const std::logic_error& e) {
        return Outcome{false, e.what()};
      }
      worst_resid = std::max(worst_resid, dec.max_residual);
      worst_varpi1 = std::max(worst_varpi1, dec.max_abs_varpi1);
      points += dec.points_checked;
      gamma_reps += data.gamma_all ? 1 : 0;
    }
    Outcome o;
    o.pass = points > 0 && worst_resid <= kDecompositionTol && worst_varpi1 <= Lh;
    o.detail = "checked on every Gamma_l point (" + std::to_string(points) + " points, " + std::to_string(gamma_reps) +
               " of 200 replications in Gamma): max residual " + num(worst_resid) + ", max |varpi1| " +
               num(worst_varpi1) + " <= L h = " + num(Lh);
    return o;
  });

  criterion(6, "oracle-ratio stability", 1800.0, [] {
    const auto seeds = replication_seeds(106, 200);
    std::vector<RiskReport> reps;
    for (std::size_t n : {500u, 2000u, 8000u}) reps.push_back(monte_carlo_risk(model("sine:0.3,1", n), sine_pipeline(), seeds).report);
    bool a = true;
    bool b = true;
    double prev_r = std::numeric_limits<double>::infinity();
    std::string detail;
    for (const auto& r : reps) {
      const double rn = std::max(0.0, r.oracle_ratio - kOracleRatioBand);
      a = a && r.selected_risk >= r.oracle_risk - kDominanceSe * r.combined_se();
      b = b && rn <= prev_r;
      prev_r = rn;
      detail += "n=" + std::to_string(r.n) + ": selected " + num(r.selected_risk) + ", oracle " + num(r.oracle_risk) +
                ", ratio " + num(r.oracle_ratio) + ", r(n) " + num(rn) + ", Gamma^c " + num(r.gamma_c_frequency) + "; ";
    }
    const bool c = reps.back().selected_risk < reps.front().selected_risk;
    Outcome o;
    o.pass = a && b && c;
    o.detail = detail + "(a) " + (a ? "ok" : "violated") + ", (b) " + (b ? "ok" : "violated") + ", (c) " +
               (c ? "ok" : "violated: selected risk does not decrease from n=500 to n=8000");
    return o;
  });

  criterion(7, "robust-risk dominance", 300.0, [] {
    const std::vector<NoiseDensity> densities{{NoiseKind::gaussian}, {NoiseKind::uniform_scaled}, {NoiseKind::rademacher}};
    const auto seeds = replication_seeds(107, 100);
    std::size_t comparisons = 0;
    std::size_t violations = 0;
    for (const auto& [s, n] : std::vector<std::pair<std::string, std::size_t>>{{"sine:0.3,1", 500}, {"sine:0.3,1", 2000}, {"cosine:0.3,1", 1000}, {"zero", 500}}) {
      const auto rob = robust_risk(model(s, n), densities, sine_pipeline(), seeds);
      for (const auto& m : rob.members) {
        for (std::size_t i = 0; i < m.report.per_lambda_risk.size(); ++i) {
          ++comparisons;
          violations += rob.robust.per_lambda_risk[i] >= m.report.per_lambda_risk[i] ? 0 : 1;
        }
        ++comparisons;
        violations += rob.robust.selected_risk >= m.report.selected_risk ? 0 : 1;
      }
    }
    return Outcome{violations == 0 && comparisons > 0,
                   std::to_string(violations) + " violations in " + std::to_string(comparisons) +
                       " componentwise comparisons over 4 fixtures"};
  });

  criterion(8, "quadratic- and linear-form moment bounds", 300.0, [] {
    const ModelSpec spec = model("sine:0.3,1", 2000);
    const auto run = collect_diagnostics(spec, sine_pipeline(), replication_seeds(108, 500));
    const std::size_t d = run.layout.d;
    const auto family = build_weight_family({0.0, spec.n, d});
    std::size_t quad_fail = 0;
    double worst_quad = 0.0;
    for (const auto& w : family.members) {
      const auto c = check_quadratic_form_bound(run, w.values);
      quad_fail += (c.on_gamma.holds && c.unconditional.holds) ? 0 : 1;
      if (c.unconditional.rhs > 0.0) worst_quad = std::max(worst_quad, c.unconditional.lhs / c.unconditional.rhs);
    }
    std::vector<std::vector<double>> vs;
    std::vector<double> e1(d, 0.0);
    e1[0] = 1.0;
    vs.push_back(e1);
    Engine engine(1108);
    std::normal_distribution<double> gauss;
    for (int k = 0; k < 5; ++k) {
      std::vector<double> v(d);
      double norm = 0.0;
      for (double& x : v) {
        x = gauss(engine);
        norm += x * x;
      }
      for (double& x : v) x /= std::sqrt(norm);
      vs.push_back(v);
    }
    std::size_t lin_fail = 0;
    double worst_lin = 0.0;
    for (const auto& v : vs) {
      const auto c = check_linear_form_bound(run, v);
      lin_fail += c.holds ? 0 : 1;
      worst_lin = std::max(worst_lin, (c.lhs - 3.0 * c.lhs_se) / c.rhs);
    }
    Outcome o;
    o.pass = quad_fail == 0 && lin_fail == 0;
    o.detail = "quadratic form: " + std::to_string(quad_fail) + " of " + std::to_string(family.size()) +
               " weight vectors fail (max lhs/rhs " + num(worst_quad) + "); linear form: " + std::to_string(lin_fail) +
               " of " + std::to_string(vs.size()) + " vectors fail (max (lhs - 3 SE)/rhs " + num(worst_lin) + ")";
    return o;
  });

  criterion(9, "Gamma-complement frequency decay", 300.0, [] {
    auto freq = [](std::size_t n) {
      const ModelSpec spec = model("sine:0.3,1", n);
      const GridLayout g = grid_layout(spec);
      std::size_t misses = 0;
      for (auto seed : replication_seeds(109, 500)) {
        misses += build_regression(simulate_path(spec, seed), g, 0.5).gamma_all ? 0 : 1;
      }
      return static_cast<double>(misses) / 500.0;
    };
    const double f500 = freq(500);
    const double f8000 = freq(8000);
    return Outcome{f8000 <= f500, "P(Gamma^c) at n=500: " + num(f500) + ", at n=8000: " + num(f8000)};
  });

  criterion(10, "CLI determinism", 300.0, [] {
    const fs::path root = fs::temp_directory_path() / "seqar_acceptance_cli";
    fs::remove_all(root);
    fs::create_directories(root);
    const fs::path cfg = root / "config.json";
    std::ofstream(cfg) << R"({
      "model": {"S": "sine:0.3,1", "noise": "gaussian"},
      "sizes": [500, 1000],
      "stability": {"eps": 0.5, "L": 2},
      "run": {"replications": 20, "seed": 110}
    })";
    std::size_t files = 0;
    std::string mismatches;
    for (const char* verb : {"simulate", "estimate", "select", "risk", "oracle-check", "diagnostics"}) {
      // Same command twice into the same directory; the first result is moved aside.
      const fs::path out = root / verb;
      const std::string cmd = std::string(SEQAR_CLI_PATH) + " " + verb + " --config " + cfg.string() + " --out " +
                              out.string() + " > /dev/null";
      const fs::path a = root / (std::string(verb) + "_first");
      const fs::path b = out;
      if (std::system(cmd.c_str()) != 0) return Outcome{false, std::string("'") + verb + "' exited non-zero"};
      fs::rename(out, a);
      if (std::system(cmd.c_str()) != 0) return Outcome{false, std::string("'") + verb + "' exited non-zero"};
      std::vector<std::string> names;
      for (const auto& e : fs::directory_iterator(a)) names.push_back(e.path().filename().string());
      std::size_t count_b = 0;
      for ([[maybe_unused]] const auto& e : fs::directory_iterator(b)) ++count_b;
      if (names.size() != count_b) mismatches += std::string(verb) + ":file-count ";
      for (const auto& name : names) {
        ++files;
        const bool same = name == "manifest.json"
                              ? manifest_without_timestamp(a / name) == manifest_without_timestamp(b / name)
                              : slurp(a / name) == slurp(b / name);
        if (!same) mismatches += std::string(verb) + "/" + name + " ";
      }
    }
    return Outcome{mismatches.empty(), std::to_string(files) + " artifacts over 6 modes compared" +
                                           (mismatches.empty() ? ", all identical" : ", differing: " + mismatches)};
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criterion(s) failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
