#pragma once

// Batch experiment driver: JSON configuration, validation with resolved
// defaults, and the artifact writers behind each CLI verb.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "seqar/process.hpp"
#include "seqar/risk.hpp"
#include "seqar/selection.hpp"
#include "seqar/seqkernel.hpp"
#include "seqar/weights.hpp"

namespace seqar {

inline constexpr std::string_view kVersion = "0.1.0";

using json = nlohmann::json;

/// Invalid configuration; `key` names the offending entry.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, const std::string& message)
      : std::runtime_error(key.empty() ? message : key + ": " + message), key_(std::move(key)) {}
  [[nodiscard]] const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

enum class Mode { simulate, estimate, select, risk, oracle_check, diagnostics };

inline std::string_view to_string(Mode m) {
  switch (m) {
    case Mode::simulate: return "simulate";
    case Mode::estimate: return "estimate";
    case Mode::select: return "select";
    case Mode::risk: return "risk";
    case Mode::oracle_check: return "oracle-check";
    case Mode::diagnostics: return "diagnostics";
  }
  return "unknown";
}

inline Mode parse_mode(std::string_view s) {
  for (Mode m : {Mode::simulate, Mode::estimate, Mode::select, Mode::risk, Mode::oracle_check, Mode::diagnostics}) {
    if (to_string(m) == s) return m;
  }
  throw ConfigError("mode", "unknown mode '" + std::string(s) + "'");
}

struct ExperimentConfig {
  // model
  std::string coefficient;
  NoiseDensity noise{};
  double a = 0.0;
  double b = 1.0;
  double y0 = 0.0;
  // sizes
  std::vector<std::size_t> sizes;
  // stability
  StabilityParams stability{};
  // procedure
  double mu0 = 0.5;
  double delta = kMaxPenaltyMultiplier;
  double k_star0 = 0.0;
  // run
  std::size_t replications = 200;
  std::uint64_t seed = 1;
  std::vector<NoiseDensity> densities{{NoiseKind::gaussian, 1.0}, {NoiseKind::uniform_scaled, 1.0},
                                      {NoiseKind::rademacher, 1.0}};
  std::string output = "out";
  std::size_t workers = 1;
  std::size_t query_points = 201;
  std::size_t linear_form_vectors = 3;
  Mode mode = Mode::simulate;

  [[nodiscard]] ModelSpec model(std::size_t n) const {
    ModelSpec spec;
    spec.a = a;
    spec.b = b;
    spec.n = n;
    spec.S = make_coefficient(coefficient);
    spec.noise = noise;
    spec.y0 = y0;
    return spec;
  }

  [[nodiscard]] PipelineConfig pipeline() const {
    PipelineConfig p;
    p.mu0 = mu0;
    p.delta = delta;
    p.k_star0 = k_star0;
    p.stability = stability;
    p.workers = workers;
    return p;
  }
};

namespace detail {

inline std::string line_column(const std::string& text, std::size_t byte) {
  std::size_t line = 1;
  std::size_t col = 1;
  for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

inline void reject_unknown(const json& obj, std::string_view where, std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ConfigError(std::string(where) + (where.empty() ? "" : ".") + key, "unknown key");
    }
  }
}

inline const json& require_object(const json& root, const std::string& key) {
  if (!root.contains(key)) throw ConfigError(key, "missing " + key);
  const json& v = root.at(key);
  if (!v.is_object()) throw ConfigError(key, "expected an object");
  return v;
}

inline double get_real(const json& obj, const std::string& where, const std::string& key, double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigError(where + "." + key, "expected a number");
  return v.get<double>();
}

inline std::uint64_t get_count(const json& obj, const std::string& where, const std::string& key,
                               std::uint64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer() || v.get<std::int64_t>() < 0) {
    throw ConfigError(where + "." + key, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

inline std::string get_string(const json& obj, const std::string& where, const std::string& key,
                              std::string fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_string()) throw ConfigError(where + "." + key, "expected a string");
  return v.get<std::string>();
}

}  // namespace detail

/// Parses and validates a configuration document. Throws ConfigError.
/// `mode` overrides the document's own mode key. Simulation accepts any
/// n >= 3; every other mode needs n >= 25 and a usable grid layout.
inline ExperimentConfig parse_config(const std::string& text, std::optional<Mode> mode = std::nullopt) {
  if (text.find_first_not_of(" \t\r\n") == std::string::npos) throw ConfigError("model", "missing model");
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", "parse error at " + detail::line_column(text, e.byte) + ": " + e.what());
  }
  if (!root.is_object()) throw ConfigError("", "configuration must be a JSON object");
  detail::reject_unknown(root, "", {"model", "sizes", "stability", "procedure", "run", "mode"});

  ExperimentConfig cfg;

  const json& model = detail::require_object(root, "model");
  detail::reject_unknown(model, "model", {"S", "noise", "varsigma", "a", "b", "y0"});
  if (!model.contains("S")) throw ConfigError("model.S", "missing coefficient function");
  cfg.coefficient = detail::get_string(model, "model", "S", "");
  try {
    (void)make_coefficient(cfg.coefficient);
  } catch (const std::invalid_argument& e) {
    throw ConfigError("model.S", e.what());
  }
  try {
    cfg.noise.kind = parse_noise_kind(detail::get_string(model, "model", "noise", "gaussian"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError("model.noise", e.what());
  }
  cfg.noise.varsigma = detail::get_real(model, "model", "varsigma", 1.0);
  if (!(cfg.noise.varsigma >= 1.0)) throw ConfigError("model.varsigma", "must be >= 1");
  cfg.a = detail::get_real(model, "model", "a", 0.0);
  cfg.b = detail::get_real(model, "model", "b", 1.0);
  if (!(cfg.a < cfg.b)) throw ConfigError("model.b", "interval requires a < b");
  cfg.y0 = detail::get_real(model, "model", "y0", 0.0);

  if (!root.contains("sizes")) throw ConfigError("sizes", "missing sizes");
  const json& sizes = root.at("sizes");
  if (!sizes.is_array() || sizes.empty()) throw ConfigError("sizes", "expected a non-empty array of sample sizes");
  for (const auto& s : sizes) {
    if (!s.is_number_integer() || s.get<std::int64_t>() < 3) {
      throw ConfigError("sizes", "every sample size must be an integer >= 3");
    }
    cfg.sizes.push_back(s.get<std::size_t>());
  }

  const json& stab = detail::require_object(root, "stability");
  detail::reject_unknown(stab, "stability", {"eps", "L"});
  if (!stab.contains("eps")) throw ConfigError("stability.eps", "missing eps");
  if (!stab.contains("L")) throw ConfigError("stability.L", "missing L");
  cfg.stability.eps = detail::get_real(stab, "stability", "eps", 0.0);
  cfg.stability.L = detail::get_real(stab, "stability", "L", 0.0);
  if (!(cfg.stability.eps > 0.0 && cfg.stability.eps < 1.0)) throw ConfigError("stability.eps", "must lie in (0, 1)");
  if (!(cfg.stability.L > 0.0)) throw ConfigError("stability.L", "must be positive");

  if (root.contains("procedure")) {
    const json& proc = detail::require_object(root, "procedure");
    detail::reject_unknown(proc, "procedure", {"mu0", "delta", "k_star0"});
    cfg.mu0 = detail::get_real(proc, "procedure", "mu0", cfg.mu0);
    cfg.delta = detail::get_real(proc, "procedure", "delta", cfg.delta);
    cfg.k_star0 = detail::get_real(proc, "procedure", "k_star0", cfg.k_star0);
  }
  if (!(cfg.mu0 > 0.0 && cfg.mu0 < 1.0)) throw ConfigError("procedure.mu0", "must lie in (0, 1)");
  if (!(cfg.delta > 0.0 && cfg.delta <= kMaxPenaltyMultiplier)) {
    throw ConfigError("procedure.delta", "must lie in the admissible interval (0, 1/12]");
  }
  if (!(cfg.k_star0 >= 0.0)) throw ConfigError("procedure.k_star0", "must be non-negative");

  if (root.contains("run")) {
    const json& run = detail::require_object(root, "run");
    detail::reject_unknown(run, "run",
                           {"replications", "seed", "densities", "output", "workers", "query_points", "linear_form_vectors"});
    cfg.replications = detail::get_count(run, "run", "replications", cfg.replications);
    cfg.seed = detail::get_count(run, "run", "seed", cfg.seed);
    cfg.output = detail::get_string(run, "run", "output", cfg.output);
    cfg.workers = detail::get_count(run, "run", "workers", cfg.workers);
    cfg.query_points = detail::get_count(run, "run", "query_points", cfg.query_points);
    cfg.linear_form_vectors = detail::get_count(run, "run", "linear_form_vectors", cfg.linear_form_vectors);
    if (run.contains("densities")) {
      const json& ds = run.at("densities");
      if (!ds.is_array() || ds.empty()) throw ConfigError("run.densities", "expected a non-empty array of noise kinds");
      cfg.densities.clear();
      for (const auto& k : ds) {
        if (!k.is_string()) throw ConfigError("run.densities", "expected noise kind names");
        try {
          cfg.densities.push_back({parse_noise_kind(k.get<std::string>()), cfg.noise.varsigma});
        } catch (const std::invalid_argument& e) {
          throw ConfigError("run.densities", e.what());
        }
      }
    }
  }
  for (auto& dens : cfg.densities) dens.varsigma = cfg.noise.varsigma;
  if (cfg.replications < 1) throw ConfigError("run.replications", "must be at least 1");
  if (cfg.workers < 1) throw ConfigError("run.workers", "must be at least 1");
  if (cfg.query_points < 2) throw ConfigError("run.query_points", "must be at least 2");

  if (root.contains("mode")) {
    if (!root.at("mode").is_string()) throw ConfigError("mode", "expected a string");
    cfg.mode = parse_mode(root.at("mode").get<std::string>());
  }
  if (mode) cfg.mode = *mode;

  if (cfg.mode == Mode::simulate) return cfg;
  for (std::size_t n : cfg.sizes) {
    if (n < 25) throw ConfigError("sizes", "every sample size must be >= 25 (got " + std::to_string(n) + ")");
    try {
      (void)grid_layout(cfg.a, cfg.b, n, cfg.mu0);
    } catch (const std::invalid_argument& e) {
      throw ConfigError("sizes", e.what());
    }
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::filesystem::path& file, std::optional<Mode> mode = std::nullopt) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("", "cannot read configuration file '" + file.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), mode);
}

/// Resolved configuration, including every default, as JSON.
inline json resolved_config(const ExperimentConfig& cfg) {
  json densities = json::array();
  for (const auto& d : cfg.densities) densities.push_back(std::string(to_string(d.kind)));
  return json{
      {"model",
       {{"S", cfg.coefficient},
        {"noise", std::string(to_string(cfg.noise.kind))},
        {"varsigma", cfg.noise.varsigma},
        {"a", cfg.a},
        {"b", cfg.b},
        {"y0", cfg.y0}}},
      {"sizes", cfg.sizes},
      {"stability", {{"eps", cfg.stability.eps}, {"L", cfg.stability.L}}},
      {"procedure", {{"mu0", cfg.mu0}, {"delta", cfg.delta}, {"k_star0", cfg.k_star0}}},
      {"run",
       {{"replications", cfg.replications},
        {"seed", cfg.seed},
        {"densities", densities},
        {"output", cfg.output},
        {"workers", cfg.workers},
        {"query_points", cfg.query_points},
        {"linear_form_vectors", cfg.linear_form_vectors}}},
      {"mode", std::string(to_string(cfg.mode))},
  };
}

// ---------------------------------------------------------------------------
// Writers

/// Shortest round-trip decimal form of x.
inline std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& file, std::initializer_list<std::string_view> header)
      : CsvWriter(file, std::vector<std::string>(header.begin(), header.end())) {}

  CsvWriter(const std::filesystem::path& file, const std::vector<std::string>& header) : out_(file, std::ios::binary) {
    if (!out_) throw std::runtime_error("cannot write '" + file.string() + "'");
    for (std::size_t i = 0; i < header.size(); ++i) out_ << (i ? "," : "") << header[i];
    out_ << '\n';
  }

  CsvWriter& cell(double x) { return raw(format_real(x)); }
  CsvWriter& cell(std::uint64_t x) { return raw(std::to_string(x)); }
  CsvWriter& cell(bool x) { return raw(x ? "1" : "0"); }
  CsvWriter& raw(const std::string& s) {
    out_ << (first_ ? "" : ",") << s;
    first_ = false;
    return *this;
  }
  void end_row() {
    out_ << '\n';
    first_ = true;
  }

 private:
  std::ofstream out_;
  bool first_ = true;
};

inline void write_json(const std::filesystem::path& file, const json& doc) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + file.string() + "'");
  out << doc.dump(2) << '\n';
}

/// FNV-1a 64-bit hash, hex encoded.
inline std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

inline std::string size_tag(std::size_t n) { return "_n" + std::to_string(n); }

inline json risk_report_json(const RiskReport& r) {
  return json{{"n", r.n},
              {"replications", r.replications},
              {"selected_risk", r.selected_risk},
              {"selected_se", r.selected_se},
              {"oracle_risk", r.oracle_risk},
              {"oracle_se", r.oracle_se},
              {"oracle_index", r.oracle_index},
              {"oracle_ratio", r.oracle_ratio},
              {"selected_risk_empirical", r.selected_risk_emp},
              {"oracle_risk_empirical", r.oracle_risk_emp},
              {"gamma_c_frequency", r.gamma_c_frequency},
              {"per_lambda_risk", r.per_lambda_risk},
              {"per_lambda_se", r.per_lambda_se}};
}

inline void write_replications_csv(const std::filesystem::path& file, const RiskRun& run) {
  std::vector<std::string> header{"seed", "gamma", "selected_index", "selected_risk"};
  const std::size_t nu = run.report.per_lambda_risk.size();
  for (std::size_t i = 0; i < nu; ++i) header.push_back("risk_" + std::to_string(i));
  CsvWriter csv(file, header);
  for (const auto& rec : run.records) {
    csv.cell(rec.seed).cell(rec.gamma).cell(static_cast<std::uint64_t>(rec.selected_index)).cell(rec.selected_risk);
    for (double v : rec.lambda_risk) csv.cell(v);
    csv.end_row();
  }
}

namespace detail {

inline void write_simulate(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                           std::vector<std::string>& artifacts) {
  for (std::size_t n : cfg.sizes) {
    const Path path = simulate_path(cfg.model(n), cfg.seed);
    const std::string name = "path" + size_tag(n) + ".csv";
    CsvWriter csv(dir / name, {"k", "x", "y"});
    for (std::size_t k = 0; k <= n; ++k) {
      csv.cell(static_cast<std::uint64_t>(k)).cell(path.spec.design_point(k)).cell(path.y[k]);
      csv.end_row();
    }
    artifacts.push_back(name);
  }
}

inline void write_estimate(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                           std::vector<std::string>& artifacts) {
  for (std::size_t n : cfg.sizes) {
    const ModelSpec spec = cfg.model(n);
    const Path path = simulate_path(spec, cfg.seed);
    const GridLayout g = grid_layout(spec, cfg.mu0);
    const RegressionData data = build_regression(path, g, cfg.stability.eps);

    const std::string points = "points" + size_tag(n) + ".csv";
    CsvWriter pc(dir / points,
                 {"l", "k1", "k2", "iota", "pilot", "pilot_proj", "H", "tau", "kappa", "estimate", "gamma_ok", "sigma2"});
    for (const auto& r : data.point_results) {
      pc.cell(static_cast<std::uint64_t>(r.l)).cell(static_cast<std::uint64_t>(r.k1))
          .cell(static_cast<std::uint64_t>(r.k2)).cell(static_cast<std::uint64_t>(r.iota))
          .cell(r.pilot).cell(r.pilot_proj).cell(r.H).cell(static_cast<std::uint64_t>(r.tau))
          .cell(r.kappa).cell(r.estimate).cell(r.gamma_ok).cell(r.sigma2);
      pc.end_row();
    }
    const std::string regression = "regression" + size_tag(n) + ".csv";
    CsvWriter rc(dir / regression, {"l", "z", "Y", "sigma2", "gamma_ok"});
    for (std::size_t l = 1; l <= g.d; ++l) {
      rc.cell(static_cast<std::uint64_t>(l)).cell(data.z[l - 1]).cell(data.Y[l - 1]).cell(data.sigma2[l - 1])
          .cell(data.point_results[l - 1].gamma_ok);
      rc.end_row();
    }
    const std::string summary = "regression" + size_tag(n) + ".json";
    write_json(dir / summary, json{{"n", n},
                                   {"d", g.d},
                                   {"h", g.h},
                                   {"q", g.q},
                                   {"eps_tilde", g.eps_tilde},
                                   {"gamma_all", data.gamma_all},
                                   {"sigma_lower", data.sigma_bounds.lower},
                                   {"sigma_upper", data.sigma_bounds.upper}});
    artifacts.insert(artifacts.end(), {points, regression, summary});
  }
}

inline void write_select(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                         std::vector<std::string>& artifacts) {
  for (std::size_t n : cfg.sizes) {
    const ModelSpec spec = cfg.model(n);
    const Path path = simulate_path(spec, cfg.seed);
    const GridLayout g = grid_layout(spec, cfg.mu0);
    const RegressionData data = build_regression(path, g, cfg.stability.eps);
    const Basis basis = build_basis(g.d, spec.a, spec.b);
    const FourierEstimates fe = fourier_estimates(data, basis);
    const WeightFamily family = build_weight_family({cfg.k_star0, n, g.d});
    const SelectionResult sel = select(fe, basis, family.vectors(), cfg.delta);
    const WeightVector& chosen = family.members[sel.lambda_index];
    const FamilyMetadata meta = family_metadata(family.vectors());

    json costs = json::array();
    for (std::size_t i = 0; i < family.size(); ++i) {
      const auto& m = family.members[i];
      costs.push_back(json{{"beta", m.beta}, {"l", m.l}, {"omega", m.omega}, {"cost", sel.costs[i]}});
    }
    const std::string name = "selection" + size_tag(n) + ".json";
    write_json(dir / name, json{{"n", n},
                                {"d", g.d},
                                {"gamma", data.gamma_all},
                                {"delta", sel.delta},
                                {"lambda_index", sel.lambda_index},
                                {"beta", chosen.beta},
                                {"l", chosen.l},
                                {"omega", chosen.omega},
                                {"lambda_hat", sel.lambda_hat},
                                {"nu", meta.nu},
                                {"nu_star", meta.nu_star},
                                {"j_star", family.j_star},
                                {"theta_hat", fe.theta_hat},
                                {"theta_tilde", fe.theta_tilde},
                                {"s", fe.s},
                                {"estimates_on_grid", sel.estimates_on_grid},
                                {"costs", costs}});
    const std::string est = "estimator" + size_tag(n) + ".csv";
    CsvWriter csv(dir / est, {"t", "S_hat"});
    const std::size_t m = cfg.query_points;
    for (std::size_t i = 0; i < m; ++i) {
      const double t = i + 1 == m ? spec.b : spec.a + static_cast<double>(i) * (spec.b - spec.a) / static_cast<double>(m - 1);
      csv.cell(t).cell(evaluate(sel, t));
      csv.end_row();
    }
    artifacts.insert(artifacts.end(), {name, est});
  }
}

inline json robust_json(const RobustRiskReport& rob) {
  json members = json::array();
  for (std::size_t i = 0; i < rob.members.size(); ++i) {
    json m = risk_report_json(rob.members[i].report);
    m["density"] = std::string(to_string(rob.densities[i].kind));
    members.push_back(m);
  }
  return json{{"robust", risk_report_json(rob.robust)}, {"members", members}};
}

inline void write_risk(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                       std::vector<std::string>& artifacts, bool oracle_check) {
  const auto seeds = replication_seeds(cfg.seed, cfg.replications);
  const PipelineConfig pipeline = cfg.pipeline();
  const double factor = oracle_bound_factor(cfg.delta);
  json sizes = json::array();
  std::vector<RiskReport> reports;
  for (std::size_t n : cfg.sizes) {
    const ModelSpec spec = cfg.model(n);
    const RiskRun run = monte_carlo_risk(spec, pipeline, seeds);
    const std::string rj = "risk" + size_tag(n) + ".json";
    json doc = risk_report_json(run.report);
    doc["noise"] = std::string(to_string(cfg.noise.kind));
    write_json(dir / rj, doc);
    const std::string rc = "replications" + size_tag(n) + ".csv";
    write_replications_csv(dir / rc, run);
    artifacts.insert(artifacts.end(), {rj, rc});
    if (!oracle_check && !cfg.densities.empty()) {
      const RobustRiskReport rob = robust_risk(spec, cfg.densities, pipeline, seeds);
      const std::string rr = "robust" + size_tag(n) + ".json";
      write_json(dir / rr, robust_json(rob));
      artifacts.push_back(rr);
    }
    reports.push_back(run.report);
  }
  if (!oracle_check) return;

  json rows = json::array();
  bool dominance = true;
  bool remainder_monotone = true;
  double prev_remainder = std::numeric_limits<double>::infinity();
  for (const auto& r : reports) {
    const double remainder = std::max(0.0, r.oracle_ratio - factor);
    const bool dom = r.selected_risk >= r.oracle_risk - 2.0 * r.combined_se();
    dominance = dominance && dom;
    remainder_monotone = remainder_monotone && remainder <= prev_remainder;
    prev_remainder = remainder;
    rows.push_back(json{{"n", r.n},
                        {"selected_risk", r.selected_risk},
                        {"oracle_risk", r.oracle_risk},
                        {"combined_se", r.combined_se()},
                        {"oracle_ratio", r.oracle_ratio},
                        {"remainder", remainder},
                        {"oracle_dominance", dom},
                        {"gamma_c_frequency", r.gamma_c_frequency}});
  }
  const bool decay = reports.size() < 2 || reports.back().selected_risk < reports.front().selected_risk;
  const std::string name = "oracle_check.json";
  write_json(dir / name, json{{"delta", cfg.delta},
                              {"bound_factor", factor},
                              {"sizes", rows},
                              {"oracle_dominance_all", dominance},
                              {"remainder_nonincreasing", remainder_monotone},
                              {"selected_risk_decreases", decay}});
  artifacts.push_back(name);
}

inline void write_diagnostics(const ExperimentConfig& cfg, const std::filesystem::path& dir,
                              std::vector<std::string>& artifacts) {
  const auto seeds = replication_seeds(cfg.seed, cfg.replications);
  const PipelineConfig pipeline = cfg.pipeline();
  for (std::size_t n : cfg.sizes) {
    const ModelSpec spec = cfg.model(n);
    const DiagnosticsRun run = collect_diagnostics(spec, pipeline, seeds);
    const std::size_t d = run.layout.d;

    const WeightFamily family = build_weight_family({cfg.k_star0, n, d});
    bool quadratic_holds = true;
    double quadratic_worst_ratio = 0.0;
    json quadratic_rows = json::array();
    for (const auto& m : family.members) {
      const QuadraticFormCheck c = check_quadratic_form_bound(run, m.values);
      quadratic_holds = quadratic_holds && c.on_gamma.holds && c.unconditional.holds;
      if (c.unconditional.rhs > 0.0) {
        quadratic_worst_ratio = std::max(quadratic_worst_ratio, c.unconditional.lhs / c.unconditional.rhs);
      }
      quadratic_rows.push_back(json{{"beta", m.beta},
                                {"l", m.l},
                                {"lhs_gamma", c.on_gamma.lhs},
                                {"lhs_unconditional", c.unconditional.lhs},
                                {"rhs", c.unconditional.rhs}});
    }

    json linear_rows = json::array();
    bool linear_holds = true;
    std::vector<std::vector<double>> vs;
    std::vector<double> e1(d, 0.0);
    e1[0] = 1.0;
    vs.push_back(e1);
    Engine engine(stream_seed(cfg.seed, 0xd1a6ULL));
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (std::size_t k = 0; k < cfg.linear_form_vectors; ++k) {
      std::vector<double> v(d);
      double norm = 0.0;
      for (double& x : v) {
        x = gauss(engine);
        norm += x * x;
      }
      for (double& x : v) x /= std::sqrt(norm);
      vs.push_back(std::move(v));
    }
    for (const auto& v : vs) {
      const MomentCheck c = check_linear_form_bound(run, v);
      linear_holds = linear_holds && c.holds;
      linear_rows.push_back(json{{"lhs", c.lhs}, {"lhs_se", c.lhs_se}, {"rhs", c.rhs}, {"holds", c.holds}});
    }

    // eta moments per grid point.
    double worst_mean_z = 0.0;
    double worst_var_z = 0.0;
    double worst_fourth_ratio = 0.0;
    const double m_check = eta_fourth_moment_constant(spec.noise.varsigma);
    for (std::size_t l = 0; l < d; ++l) {
      MeanAccumulator mean;
      MeanAccumulator scaled;
      MeanAccumulator fourth;
      for (const auto& s : run.samples) {
        mean.add(s.eta[l]);
        scaled.add(s.eta[l] * s.eta[l] / s.sigma2[l]);
        fourth.add(std::pow(s.eta[l] * s.eta[l] / s.sigma2[l], 2));
      }
      if (run.samples.size() > 1) {
        worst_mean_z = std::max(worst_mean_z, std::abs(mean.mean()) / mean.std_error());
        worst_var_z = std::max(worst_var_z, std::abs(scaled.mean() - 1.0) / scaled.std_error());
      }
      worst_fourth_ratio = std::max(worst_fourth_ratio, fourth.mean() / m_check);
    }

    // Decomposition and norm comparison.
    std::size_t gamma_count = 0;
    double max_resid = 0.0;
    double max_varpi1 = 0.0;
    MeanAccumulator u_d;
    for (const auto& s : run.samples) {
      gamma_count += s.gamma ? 1 : 0;
      max_resid = std::max(max_resid, s.decomposition.max_residual);
      max_varpi1 = std::max(max_varpi1, s.decomposition.max_abs_varpi1);
      u_d.add(s.decomposition.u_d);
    }
    const PipelineContext ctx(spec, pipeline);
    const PipelineOutput first = run_pipeline(ctx, simulate_path(spec, seeds.front()));
    const NormComparisonCheck norms =
        check_norm_comparison(spec.S, first.selection.estimates_on_grid, run.layout.eps_tilde, spec.a, spec.b);

    const std::string name = "diagnostics" + size_tag(n) + ".json";
    write_json(dir / name,
               json{{"n", n},
                    {"d", d},
                    {"replications", run.samples.size()},
                    {"gamma_frequency", static_cast<double>(gamma_count) / static_cast<double>(run.samples.size())},
                    {"sigma_lower", run.bounds.lower},
                    {"sigma_upper", run.bounds.upper},
                    {"eta", {{"max_mean_z", worst_mean_z},
                             {"max_scaled_variance_z", worst_var_z},
                             {"max_fourth_moment_ratio", worst_fourth_ratio},
                             {"m_check", m_check}}},
                    {"decomposition", {{"max_residual", max_resid},
                                       {"max_abs_varpi1", max_varpi1},
                                       {"L_h", cfg.stability.L * run.layout.h},
                                       {"mean_u_d", u_d.mean()}}},
                    {"quadratic_form", {{"holds", quadratic_holds}, {"max_lhs_over_rhs", quadratic_worst_ratio}, {"rows", quadratic_rows}}},
                    {"linear_form", {{"holds", linear_holds}, {"rows", linear_rows}}},
                    {"norm_comparison", {{"norm_sq", norms.norm_sq},
                                    {"empirical_norm_sq", norms.empirical_norm_sq},
                                    {"derivative_norm_sq", norms.derivative_norm_sq},
                                    {"continuous_bound", norms.continuous_bound},
                                    {"empirical_bound", norms.empirical_bound},
                                    {"holds_both", norms.holds_both}}}});
    artifacts.push_back(name);
  }
}

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream ss;
  ss << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return ss.str();
}

}  // namespace detail

/// Runs one experiment and writes its artifacts plus manifest.json into `dir`.
/// Returns the artifact names (manifest excluded).
inline std::vector<std::string> run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw std::runtime_error("cannot create output directory '" + dir.string() + "'");
  }
  std::vector<std::string> artifacts;
  switch (cfg.mode) {
    case Mode::simulate: detail::write_simulate(cfg, dir, artifacts); break;
    case Mode::estimate: detail::write_estimate(cfg, dir, artifacts); break;
    case Mode::select: detail::write_select(cfg, dir, artifacts); break;
    case Mode::risk: detail::write_risk(cfg, dir, artifacts, false); break;
    case Mode::oracle_check: detail::write_risk(cfg, dir, artifacts, true); break;
    case Mode::diagnostics: detail::write_diagnostics(cfg, dir, artifacts); break;
  }
  const json resolved = resolved_config(cfg);
  write_json(dir / "manifest.json", json{{"tool", "seqar"},
                                         {"version", std::string(kVersion)},
                                         {"mode", std::string(to_string(cfg.mode))},
                                         {"config_hash", fnv1a_hex(resolved.dump())},
                                         {"seed", cfg.seed},
                                         {"config", resolved},
                                         {"artifacts", artifacts},
                                         {"timestamp", detail::utc_timestamp()}});
  return artifacts;
}

}  // namespace seqar
