#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "seqar/process.hpp"
#include "seqar/seqkernel.hpp"

using namespace seqar;
using Catch::Approx;

namespace {

ModelSpec sine_spec(std::size_t n, std::string_view s = "sine:0.3,1") {
  ModelSpec spec;
  spec.n = n;
  spec.S = make_coefficient(s);
  return spec;
}

Window window(std::size_t k1, std::size_t iota, std::size_t k2) { return Window{k1, k2, iota}; }

}  // namespace

TEST_CASE("grid layout at n = 100") {
  const GridLayout g = grid_layout(0.0, 1.0, 100, 0.5);
  CHECK(g.d == 10);
  CHECK(g.h == Approx(0.05));
  CHECK(g.z_at(1) == Approx(0.1));
  CHECK(g.window(1).k1 == 6);
  CHECK(g.window(1).k2 == 15);
  CHECK(g.q == 2);
  CHECK(g.window(1).iota == 8);
  CHECK(g.window(10).k2 == 100);
  CHECK(g.eps_tilde == Approx(1.0 / (2.0 + std::log(100.0))));
}

TEST_CASE("windows are disjoint, ordered and contain their grid points") {
  for (std::size_t n : {50u, 100u, 257u, 1000u, 2000u, 9999u, 10000u}) {
    const GridLayout g = grid_layout(0.0, 1.0, n);
    for (std::size_t l = 1; l <= g.d; ++l) {
      const Window& w = g.window(l);
      CHECK(w.k1 <= w.iota);
      CHECK(w.iota + 1 < w.k2);
      CHECK(w.k2 <= n);
      if (l > 1) CHECK(g.window(l - 1).k2 < w.k1);
      // z_l itself lies in the kernel support.
      const std::size_t kz = n * l / g.d;
      if (l < g.d) CHECK(w.contains(kz));
      for (std::size_t j = 1; j <= n; ++j) {
        const double expected = w.contains(j) ? 1.0 : 0.0;
        if (kernel_weight(g, l, j) != expected) FAIL("kernel weight mismatch");
      }
    }
  }
}

TEST_CASE("grid layout rejects sizes without room for the sequential stage") {
  CHECK_THROWS_AS(grid_layout(0.0, 1.0, 8), std::invalid_argument);
  CHECK_THROWS_AS(grid_layout(0.0, 1.0, 25), std::invalid_argument);
  CHECK_THROWS_AS(grid_layout(1.0, 0.0, 100), std::invalid_argument);
  CHECK_NOTHROW(grid_layout(0.0, 1.0, 50));
}

TEST_CASE("pilot estimate and projection") {
  const std::size_t n = 55;
  const GridLayout g = grid_layout(0.0, 1.0, n);
  const std::vector<double> ones(n + 1, 1.0);
  const PilotEstimate p = pilot_estimate(ones, g.window(1), g.eps_tilde);
  CHECK(p.pilot == 1.0);
  CHECK(g.eps_tilde == Approx(0.16647).epsilon(1e-4));
  CHECK(p.pilot_proj == Approx(0.83353).epsilon(1e-4));

  CHECK(project_pilot(0.5, 0.1) == 0.5);
  CHECK(project_pilot(-2.0, 0.1) == Approx(-0.9));

  const std::vector<double> zeros(n + 1, 0.0);
  const PilotEstimate z = pilot_estimate(zeros, g.window(1), g.eps_tilde);
  CHECK(z.degenerate);
  CHECK(z.pilot_proj == 0.0);
}

TEST_CASE("threshold") {
  CHECK(threshold(20, 0.0, 0.1) == Approx(18.0));
  CHECK(threshold(20, 0.6, 0.1) == Approx(28.125));
  CHECK(threshold(10, 0.9, 0.1) == Approx(47.368421).epsilon(1e-8));
}

TEST_CASE("stopping rule on unit observations") {
  const std::vector<double> ones(40, 1.0);
  const Window w = window(1, 4, 30);
  SECTION("threshold hit exactly") {
    const StoppingOutcome s = sequential_stage(ones, w, 5.0);
    CHECK(s.tau == w.iota + 5);
    CHECK(s.a_before == 4.0);
    CHECK(s.kappa == 1.0);
    CHECK(s.gamma_ok);
  }
  SECTION("fractional correction") {
    const StoppingOutcome s = sequential_stage(ones, w, 4.5);
    CHECK(s.tau == w.iota + 5);
    CHECK(s.kappa == Approx(std::sqrt(0.5)));
    CHECK(s.raw_estimate == Approx((4.0 + std::sqrt(0.5)) / 4.5));
    CHECK(s.raw_estimate == Approx(1.046024).epsilon(1e-6));
  }
  SECTION("identity A + kappa^2 y^2 = H") {
    for (double H : {0.3, 1.0, 7.77, 12.5, 25.0}) {
      const StoppingOutcome s = sequential_stage(ones, w, H);
      CHECK(s.a_before + s.kappa * s.kappa == Approx(H).epsilon(1e-12));
    }
  }
}

TEST_CASE("stopping rule never reached") {
  const std::vector<double> zeros(40, 0.0);
  const Window w = window(1, 4, 30);
  const StoppingOutcome s = sequential_stage(zeros, w, 5.0);
  CHECK_FALSE(s.gamma_ok);
  CHECK(s.tau == w.k2);

  GridLayout g = grid_layout(0.0, 1.0, 100);
  const std::vector<double> y(101, 0.0);
  const auto r = run_point_procedure(y, g, 3);
  CHECK_FALSE(r.gamma_ok);
  CHECK(r.estimate == 0.0);
}

TEST_CASE("threshold reached only at the window end is outside Gamma_l") {
  std::vector<double> y(40, 1.0);
  const Window w = window(1, 4, 10);
  // A_{iota,k2-1} = 5 < H = 5.5 <= A_{iota,k2} = 6
  const StoppingOutcome s = sequential_stage(y, w, 5.5);
  CHECK(s.tau == w.k2);
  CHECK_FALSE(s.gamma_ok);
}

TEST_CASE("stopping identity holds on simulated paths") {
  const ModelSpec spec = sine_spec(2000);
  const GridLayout g = grid_layout(spec);
  std::size_t hits = 0;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) {
    const Path p = simulate_path(spec, seed);
    for (std::size_t l = 1; l <= g.d; ++l) {
      const auto r = run_point_procedure(p, g, l);
      if (!r.gamma_ok) continue;
      ++hits;
      const double y2 = p.y[r.tau - 1] * p.y[r.tau - 1];
      const double lhs = r.a_before + r.kappa * r.kappa * y2;
      if (std::abs(lhs - r.H) > 1e-9 * r.H) FAIL("identity violated at seed " << seed << " l " << l);
      if (!(r.kappa > 0.0 && r.kappa <= 1.0)) FAIL("kappa out of (0,1]");
      if (!(r.tau > r.iota && r.tau < r.k2)) FAIL("tau out of range");
    }
  }
  CHECK(hits > 0);
}

TEST_CASE("regression data and the Gamma indicator") {
  const ModelSpec spec = sine_spec(500);
  const GridLayout g = grid_layout(spec);
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const RegressionData data = build_regression(simulate_path(spec, seed), g, 0.1);
    bool all = true;
    for (const auto& r : data.point_results) all = all && r.gamma_ok;
    CHECK(data.gamma_all == all);
    for (std::size_t l = 0; l < g.d; ++l) {
      CHECK(data.sigma2[l] == 1.0 / data.point_results[l].H);
      CHECK(data.Y[l] == (all ? data.point_results[l].estimate : 0.0));
    }
  }
}

TEST_CASE("regression on a path with Gamma") {
  // Large, almost deterministic observations: every window reaches its threshold.
  ModelSpec spec = sine_spec(400, "const:0.5");
  spec.y0 = 10.0;
  const GridLayout g = grid_layout(spec);
  std::vector<double> noise(spec.n);
  for (std::size_t k = 0; k < spec.n; ++k) noise[k] = (k % 2 == 0 ? 3.0 : -2.0);
  const Path p = simulate_path_with_noise(spec, noise);
  const RegressionData data = build_regression(p, g, 0.1);
  REQUIRE(data.gamma_all);
  for (std::size_t l = 0; l < g.d; ++l) CHECK(data.Y[l] == data.point_results[l].estimate);

  // eta agrees with the martingale sum built from the actual stopping time.
  const auto etas = eta_variables(p, g);
  for (std::size_t l = 1; l <= g.d; ++l) {
    const auto& r = data.point_results[l - 1];
    double direct = 0.0;
    for (std::size_t j = r.iota + 1; j < r.tau; ++j) direct += p.y[j - 1] * p.xi[j];
    direct += r.kappa * p.y[r.tau - 1] * p.xi[r.tau];
    direct /= r.H;
    CHECK(etas[l - 1].eta == Approx(direct).epsilon(1e-12).margin(1e-15));
    CHECK(etas[l - 1].tau_check == r.tau);
  }
}

TEST_CASE("sigma bounds at n = 10^4") {
  const GridLayout g = grid_layout(0.0, 1.0, 10000);
  const SigmaBounds s = sigma_bounds(g, 0.1);
  CHECK(g.q == 7);
  CHECK(s.lower == Approx(0.0108696).epsilon(1e-5));
  CHECK(s.upper == Approx(0.0121993).epsilon(1e-5));
  CHECK(s.lower < s.upper);
}

TEST_CASE("eta vanishes without noise") {
  ModelSpec spec = sine_spec(900);
  spec.y0 = 1.0;
  const Path p = simulate_path_with_noise(spec, std::vector<double>(spec.n, 0.0));
  const GridLayout g = grid_layout(spec);
  for (const auto& e : eta_variables(p, g)) CHECK(e.eta == 0.0);
}

TEST_CASE("eta requires the noise record") {
  Path p = simulate_path(sine_spec(400), 3);
  p.xi.clear();
  CHECK_THROWS_AS(eta_variables(p, grid_layout(0.0, 1.0, 400)), std::invalid_argument);
}

TEST_CASE("modified stopping rule always terminates with kappa in (0,1]") {
  const ModelSpec spec = sine_spec(1000);
  const GridLayout g = grid_layout(spec);
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    const Path p = simulate_path(spec, seed);
    for (const auto& e : eta_variables(p, g)) {
      if (!(e.kappa_check > 0.0 && e.kappa_check <= 1.0)) FAIL("kappa check out of range");
    }
  }
}

TEST_CASE("upsilon statistic") {
  const std::vector<double> ones(20, 1.0);
  const std::vector<double> twos(20, 2.0);
  CHECK(upsilon_statistic(ones, 2, 10, 1.0) == 0.0);
  CHECK(upsilon_statistic(twos, 2, 10, 1.0) == 3.0);
  CHECK_THROWS_AS(upsilon_statistic(ones, 5, 5, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(upsilon_statistic(ones, 5, 20, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(upsilon_statistic(ones, 2, 10, 0.0), std::invalid_argument);
}

TEST_CASE("upsilon concentration for a constant coefficient") {
  // Stationary variance of the AR(1) with S = 0.5 is 1/0.75. Over a window of
  // length 100 the standard deviation of the statistic is about 0.245, so
  // |U| <= 0.15 holds in roughly 46% of replications; over length 5000 it
  // holds essentially always.
  const ModelSpec spec = sine_spec(10000, "const:0.5");
  std::size_t short_hits = 0;
  std::size_t long_hits = 0;
  const std::size_t reps = 500;
  for (std::uint64_t r = 0; r < reps; ++r) {
    const Path p = simulate_path(spec, stream_seed(77, r));
    short_hits += std::abs(upsilon_statistic(p.y, 5000, 5100, 0.75)) <= 0.15 ? 1 : 0;
    long_hits += std::abs(upsilon_statistic(p.y, 5000, 10000, 0.75)) <= 0.15 ? 1 : 0;
  }
  const double short_rate = static_cast<double>(short_hits) / reps;
  CHECK(short_rate > 0.38);
  CHECK(short_rate < 0.54);
  CHECK(static_cast<double>(long_hits) / reps >= 0.95);
}
