#include "igp/run.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <omp.h>

#include "igp/errors.hpp"
#include "json.hpp"

namespace igp {
namespace {

using nlohmann::ordered_json;

double parse_number(const std::string& text, const std::string& what) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(text, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != text.size() || !std::isfinite(v)) throw InputError("bad " + what + ": '" + text + "'");
  return v;
}

GiaParams parse_gamma_t0(const std::string& text) {
  GiaParams p;
  const auto at = text.find('@');
  p.gamma = parse_number(text.substr(0, at), "GIA rate");
  if (at != std::string::npos) p.t0 = parse_number(text.substr(at + 1), "GIA collection year");
  return p;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  return out;
}

std::string fnv1a_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::uint64_t h = 1469598103934665603ULL;
  char c;
  while (in.get(c)) {
    h ^= static_cast<unsigned char>(c);
    h *= 1099511628211ULL;
  }
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << h;
  return s.str();
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return s.str();
}

// NaN and infinity are not representable in JSON.
ordered_json number(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json priors_json(const Priors& p) {
  return {{"rho_beta", {p.rho.a, p.rho.b}},
          {"tau2_gamma_shape_rate", {p.tau2.shape, p.tau2.rate}},
          {"upsilon2_gamma_shape_rate", {p.upsilon2.shape, p.upsilon2.rate}},
          {"alpha_normal_mean_sd", {p.alpha.mean, p.alpha.sd}}};
}

ordered_json gia_json(const GiaAssignment& g) {
  ordered_json sites = ordered_json::object();
  for (const auto& [site, p] : g.by_site) sites[site] = {{"gamma", p.gamma}, {"t0", p.t0}};
  return {{"fallback", {{"gamma", g.fallback.gamma}, {"t0", g.fallback.t0}}}, {"sites", sites}};
}

struct ThreadScope {
  explicit ThreadScope(int n) : previous(omp_get_max_threads()) {
    if (n > 0) omp_set_num_threads(n);
  }
  ~ThreadScope() { omp_set_num_threads(previous); }
  int previous;
};

}  // namespace

GiaSpec parse_gia_spec(const std::string& text) {
  GiaSpec spec;
  if (text.empty() || text == "preset") return spec;
  spec.preset = false;
  if (text == "none") return spec;
  if (text.find('=') == std::string::npos) {
    spec.assignment.fallback = parse_gamma_t0(text);
    return spec;
  }
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos || eq == 0) throw InputError("bad GIA entry '" + item + "', expected site=gamma[@t0]");
    spec.assignment.by_site[item.substr(0, eq)] = parse_gamma_t0(item.substr(eq + 1));
  }
  return spec;
}

void RunConfig::validate() const {
  if (data.empty()) throw InputError("no data file given");
  if (eval_points < 2) throw InputError("need at least two evaluation points");
  if (threads < 0) throw InputError("thread count must be non-negative");
  if (!(settings.kappa > 0.0 && settings.kappa <= 2.0)) throw InputError("kappa must lie in (0, 2]");
  if (!(settings.years_per_unit > 0.0)) throw InputError("time scale must be positive");
  if (settings.quad_order < 2) throw InputError("quadrature order must be at least 2");
  if (settings.grid_m == 1) throw InputError("grid needs at least two nodes");
  settings.priors.validate();
  settings.chains.validate();
}

std::vector<ObservationRecord> load_records(const RunConfig& config) {
  return config.mode == ModelMode::SIGP ? ingest_instrumental(config.data) : ingest_proxy(config.data);
}

GiaAssignment resolve_gia(const RunConfig& config, const std::vector<ObservationRecord>& records) {
  if (!config.gia.preset) return config.gia.assignment;
  if (config.mode == ModelMode::SIGP) return GiaAssignment{};
  return proxy_site_gia(records);
}

FitReport fit_to_directory(const RunConfig& config) {
  config.validate();
  ThreadScope threads(config.threads);
  const auto records = load_records(config);
  const GiaAssignment gia = resolve_gia(config, records);
  FitSettings settings = config.settings;
  settings.mode = config.mode;

  FitReport report;
  if (config.gia.preset && config.mode == ModelMode::EIVIGP) {
    std::size_t unmatched = 0;
    for (const auto& r : records) unmatched += gia.by_site.count(r.site) ? 0 : 1;
    if (unmatched)
      report.warnings.push_back(std::to_string(unmatched) +
                                " records have no recognised site; no GIA correction applied to them");
  }

  const FitProblem problem = make_problem(records, gia, settings);
  report.chains = run_chains(problem, settings.chains);

  double first = records.front().age, last = records.front().age;
  for (const auto& r : records) {
    first = std::min(first, r.age);
    last = std::max(last, r.age);
  }
  const auto years = evaluation_grid(first, last, config.eval_points);
  report.rate = summarize_rate(report.chains, years, problem.ctx);
  report.level = summarize_level(report.chains, years, problem.ctx);
  report.diagnostics = compute_diagnostics(report.chains);
  for (const auto& d : report.diagnostics) {
    if (d.flagged) {
      report.flagged = true;
      report.warnings.push_back("R-hat for " + d.parameter + " is " + format6(d.rhat) + " (> 1.1)");
    }
  }

  std::filesystem::create_directories(config.out_dir);
  {
    auto out = open_output(config.out_dir / "draws.csv");
    write_draws(out, report.chains);
  }
  {
    auto out = open_output(config.out_dir / "diagnostics.csv");
    write_diagnostics(out, report.diagnostics);
  }
  {
    auto out = open_output(config.out_dir / "rate_summary.csv");
    write_summary(out, report.rate);
  }
  {
    auto out = open_output(config.out_dir / "level_summary.csv");
    write_summary(out, report.level);
  }

  ordered_json diag = ordered_json::array();
  for (const auto& d : report.diagnostics)
    diag.push_back({{"parameter", d.parameter},
                    {"geweke_z", number(d.geweke_z)},
                    {"rhat", number(d.rhat)},
                    {"ess", number(d.ess)},
                    {"flagged", d.flagged}});
  ordered_json blocks = ordered_json::array();
  for (const auto& c : report.chains)
    for (const auto& b : c.stats)
      blocks.push_back({{"chain", c.chain_index}, {"block", b.block}, {"accepted", b.accepted}, {"rejected", b.rejected},
                        {"evaluations", b.evaluations}});
  ordered_json chains = ordered_json::array();
  for (const auto& c : report.chains) chains.push_back({{"index", c.chain_index}, {"seed", c.seed}, {"draws", c.draws.size()}});

  const ChainConfig& cc = settings.chains;
  ordered_json manifest = {
      {"tool", "eivigp"},
      {"version", kVersion},
      {"timestamp", utc_timestamp()},
      {"mode", to_string(config.mode)},
      {"data", {{"path", config.data.string()}, {"fnv1a64", fnv1a_hex(config.data)}, {"records", records.size()}}},
      {"gia", gia_json(gia)},
      {"priors", priors_json(settings.priors)},
      {"kappa", settings.kappa},
      {"time_scale", {{"origin_year", problem.ctx.time.origin_year}, {"years_per_unit", problem.ctx.time.years_per_unit}}},
      {"grid", {{"m", problem.ctx.grid.size()},
                {"first_year", problem.ctx.time.to_year(problem.ctx.grid.front())},
                {"last_year", problem.ctx.time.to_year(problem.ctx.grid.back())}}},
      {"quadrature_order", settings.quad_order},
      {"chains", {{"iterations", cc.n_iterations}, {"burn_in", cc.burn_in}, {"thin", cc.thin},
                  {"n_chains", cc.n_chains}, {"adapt_window", cc.adapt_window}}},
      {"seed", cc.seed},
      {"threads", config.threads},
      {"evaluation_points", config.eval_points},
      {"chain_seeds", chains},
      {"diagnostics", diag},
      {"diagnostics_flagged", report.flagged},
      {"block_stats", blocks},
      {"warnings", report.warnings},
      {"outputs", {"draws.csv", "diagnostics.csv", "rate_summary.csv", "level_summary.csv"}},
  };
  auto out = open_output(config.out_dir / "manifest.json");
  out << manifest.dump(2) << '\n';
  return report;
}

std::vector<ScenarioResult> run_scenarios(const ScenarioRunOptions& options, const std::filesystem::path& out_dir) {
  auto specs = ScenarioSpec::presets(options.n_sims, options.seed);
  if (!options.labels.empty()) {
    for (const auto& l : options.labels)
      if (std::none_of(specs.begin(), specs.end(), [&](const auto& s) { return s.label == l; }))
        throw InputError("unknown scenario '" + l + "'");
    std::erase_if(specs, [&](const ScenarioSpec& s) {
      return std::find(options.labels.begin(), options.labels.end(), s.label) == options.labels.end();
    });
  }
  std::vector<ScenarioResult> results;
  for (const auto& spec : specs) results.push_back(run_scenario(spec, options.fit));

  std::filesystem::create_directories(out_dir);
  auto out = open_output(out_dir / "scenarios.csv");
  out << "scenario,sigma2_mean,sigma2_var,rho_mean,rho_var,coverage95,coverage68,mc_se95,mc_se68,completed,failed,"
         "reported95,reported68\n";
  for (std::size_t i = 0; i < specs.size(); ++i) {
    const auto& s = specs[i];
    const auto& r = results[i];
    out << s.label << ',' << format6(s.sigma2_mean) << ',' << format6(s.sigma2_var) << ',' << format6(s.rho_mean)
        << ',' << format6(s.rho_var) << ',' << format6(r.coverage95) << ',' << format6(r.coverage68) << ','
        << format6(r.mc_se95) << ',' << format6(r.mc_se68) << ',' << r.n_completed << ',' << r.n_failed << ','
        << format6(s.reported95) << ',' << format6(s.reported68) << '\n';
  }
  return results;
}

std::vector<CvRow> run_cv(const RunConfig& config, const CvRunOptions& options) {
  config.validate();
  ThreadScope threads(config.threads);
  const auto records = load_records(config);
  const GiaAssignment gia = resolve_gia(config, records);
  FitSettings settings = config.settings;
  settings.mode = config.mode;
  const std::uint64_t seed = settings.chains.seed;
  std::vector<CvRow> rows;
  rows.push_back({CvModel::LSR, kfold_cv(records, gia, CvModel::LSR, options.k, seed, settings, options.lsr_degree)});
  const CvModel igp_model = config.mode == ModelMode::SIGP ? CvModel::SIGP : CvModel::EIVIGP;
  rows.push_back({igp_model, kfold_cv(records, gia, igp_model, options.k, seed, settings, options.lsr_degree,
                                      options.n_paths)});
  return rows;
}

void write_cv_table(const std::filesystem::path& path, const std::vector<CvRow>& rows) {
  auto out = open_output(path);
  out << "model,coverage,avg_interval_width,avg_interval_score,n\n";
  for (const auto& r : rows)
    out << to_string(r.model) << ',' << format6(r.result.empirical_coverage) << ','
        << format6(r.result.avg_interval_width) << ',' << format6(r.result.avg_interval_score) << ','
        << r.result.n_points << '\n';
}

}  // namespace igp
