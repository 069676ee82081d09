#include "igp/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "igp/errors.hpp"

namespace igp {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\"");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\"");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_double(std::string_view field, double& value) {
  if (field.empty()) return false;
  if (field.front() == '+') field.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  return ec == std::errc() && ptr == field.data() + field.size() && std::isfinite(value);
}

// Calls row(fields, line_number) for each data line; the first non-blank line
// is treated as a header when its first field is not numeric.
template <class RowFn>
void for_each_row(std::istream& in, RowFn&& row) {
  std::string line;
  std::size_t line_no = 0;
  bool first = true;
  bool any = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    double probe;
    if (first && !parse_double(fields.front(), probe)) {
      first = false;
      continue;
    }
    first = false;
    any = true;
    row(fields, line_no);
  }
  if (!any) throw InputError("input contains no data rows");
}

double field_value(const std::vector<std::string_view>& fields, std::size_t i, std::size_t line_no) {
  double v;
  if (!parse_double(fields[i], v))
    throw ParseError(line_no, "field " + std::to_string(i + 1) + " is not a number: '" + std::string(fields[i]) + "'");
  return v;
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return in;
}

std::string shortest(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void check_site(const std::string& site) {
  if (site.find_first_of(",\"\n\r") != std::string::npos)
    throw InputError("site name cannot contain commas, quotes or line breaks: " + site);
}

}  // namespace

std::vector<ObservationRecord> parse_instrumental(std::istream& in) {
  std::vector<ObservationRecord> out;
  for_each_row(in, [&](const std::vector<std::string_view>& f, std::size_t line_no) {
    if (f.size() != 3) throw ParseError(line_no, "expected 3 fields, found " + std::to_string(f.size()));
    ObservationRecord r;
    r.age = field_value(f, 0, line_no);
    r.level = field_value(f, 1, line_no);
    r.level_sd = field_value(f, 2, line_no);
    if (!(r.level_sd > 0.0))
      throw ValidationError("line " + std::to_string(line_no) + ": level sigma must be positive");
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<ObservationRecord> parse_proxy(std::istream& in) {
  std::vector<ObservationRecord> out;
  for_each_row(in, [&](const std::vector<std::string_view>& f, std::size_t line_no) {
    if (f.size() != 4 && f.size() != 5)
      throw ParseError(line_no, "expected 4 or 5 fields, found " + std::to_string(f.size()));
    ObservationRecord r;
    r.level = field_value(f, 0, line_no);
    r.age = field_value(f, 1, line_no);
    r.level_sd = field_value(f, 2, line_no);
    const double age_2sd = field_value(f, 3, line_no);
    if (!(r.level_sd > 0.0))
      throw ValidationError("line " + std::to_string(line_no) + ": level sigma must be positive");
    if (age_2sd < 0.0)
      throw ValidationError("line " + std::to_string(line_no) + ": age error must be non-negative");
    r.age_sd = age_2sd / 2.0;
    if (f.size() == 5) r.site = std::string(f[4]);
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<ObservationRecord> ingest_instrumental(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_instrumental(in);
}

std::vector<ObservationRecord> ingest_proxy(const std::filesystem::path& path) {
  auto in = open_input(path);
  return parse_proxy(in);
}

void write_instrumental(std::ostream& out, std::span<const ObservationRecord> records) {
  out << "year,level_m,sigma_m\n";
  for (const auto& r : records) out << shortest(r.age) << ',' << shortest(r.level) << ',' << shortest(r.level_sd) << '\n';
}

void write_proxy(std::ostream& out, std::span<const ObservationRecord> records) {
  const bool sites = std::any_of(records.begin(), records.end(), [](const auto& r) { return !r.site.empty(); });
  out << "rsl_m,year_ad,rsl_sigma_m,age_2sigma_yr" << (sites ? ",site\n" : "\n");
  for (const auto& r : records) {
    out << shortest(r.level) << ',' << shortest(r.age) << ',' << shortest(r.level_sd) << ','
        << shortest(2.0 * r.age_sd);
    if (sites) {
      check_site(r.site);
      out << ',' << r.site;
    }
    out << '\n';
  }
}

std::string canonical_site(const std::string& site) {
  std::string out;
  for (unsigned char c : site)
    if (std::isalnum(c)) out.push_back(static_cast<char>(std::tolower(c)));
  return out;
}

GiaAssignment proxy_site_gia(std::span<const ObservationRecord> records, GiaParams fallback) {
  GiaAssignment gia;
  gia.fallback = fallback;
  for (const auto& r : records) {
    const std::string key = canonical_site(r.site);
    if (key == "tumppoint") gia.by_site[r.site] = GiaParams{0.9, fallback.t0};
    else if (key == "sandpoint") gia.by_site[r.site] = GiaParams{1.0, fallback.t0};
  }
  return gia;
}

std::string format6(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

void write_summary(std::ostream& out, const CurveSummary& s) {
  out << "time,mean,lo68,hi68,lo95,hi95,mc_se\n";
  for (std::size_t j = 0; j < s.size(); ++j)
    out << format6(s.eval_times[j]) << ',' << format6(s.mean[j]) << ',' << format6(s.lower68[j]) << ','
        << format6(s.upper68[j]) << ',' << format6(s.lower95[j]) << ',' << format6(s.upper95[j]) << ','
        << format6(s.mc_se[j]) << '\n';
}

void write_draws(std::ostream& out, std::span<const ChainOutput> chains) {
  out << "chain,draw,alpha,tau2,upsilon2,rho,log_posterior\n";
  for (const auto& c : chains)
    for (std::size_t d = 0; d < c.draws.size(); ++d) {
      const LatentState& s = c.draws[d];
      out << c.chain_index << ',' << d << ',' << format6(s.alpha) << ',' << format6(s.tau2) << ','
          << format6(s.kernel.upsilon2) << ',' << format6(s.kernel.rho) << ',' << format6(c.log_posterior[d]) << '\n';
    }
}

std::vector<ParameterDiagnostics> compute_diagnostics(std::span<const ChainOutput> chains) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  struct Param {
    const char* name;
    double (*get)(const LatentState&);
  };
  static constexpr Param params[] = {
      {"alpha", [](const LatentState& s) { return s.alpha; }},
      {"tau2", [](const LatentState& s) { return s.tau2; }},
      {"upsilon2", [](const LatentState& s) { return s.kernel.upsilon2; }},
      {"rho", [](const LatentState& s) { return s.kernel.rho; }},
  };
  std::vector<ParameterDiagnostics> out;
  for (const auto& p : params) {
    ParameterDiagnostics d;
    d.parameter = p.name;
    std::vector<std::vector<double>> series;
    for (const auto& c : chains) {
      std::vector<double> v;
      v.reserve(c.draws.size());
      for (const auto& s : c.draws) v.push_back(p.get(s));
      series.push_back(std::move(v));
    }
    double worst = 0.0;
    bool geweke_ok = true;
    d.ess = 0.0;
    for (const auto& v : series) {
      try {
        const double z = geweke(v);
        if (!std::isfinite(z)) geweke_ok = false;
        else if (std::abs(z) > std::abs(worst)) worst = z;
      } catch (const UnsupportedInputError&) {
        geweke_ok = false;
      }
      try {
        d.ess += effective_sample_size(v);
      } catch (const UnsupportedInputError&) {
        d.ess = nan;
      }
    }
    d.geweke_z = geweke_ok ? worst : nan;
    try {
      d.rhat = gelman_rubin(series);
    } catch (const UnsupportedInputError&) {
      d.rhat = nan;
    }
    d.flagged = std::isfinite(d.rhat) && d.rhat > 1.1;
    out.push_back(std::move(d));
  }
  return out;
}

void write_diagnostics(std::ostream& out, std::span<const ParameterDiagnostics> diagnostics) {
  out << "parameter,geweke_z,rhat,ess,flagged\n";
  for (const auto& d : diagnostics)
    out << d.parameter << ',' << format6(d.geweke_z) << ',' << format6(d.rhat) << ',' << format6(d.ess) << ','
        << (d.flagged ? 1 : 0) << '\n';
}

}  // namespace igp
