#pragma once

// Comma-delimited ingestion of instrumental and proxy records, and the
// delimited-text writers used for run outputs.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "igp/diagnostics.hpp"
#include "igp/model.hpp"
#include "igp/posterior.hpp"
#include "igp/sampler.hpp"

namespace igp {

/// year, level_m, sigma_m. Header line optional. age_sd is 0 for every record.
std::vector<ObservationRecord> ingest_instrumental(const std::filesystem::path& path);
std::vector<ObservationRecord> parse_instrumental(std::istream& in);

/// rsl_m, year_ad, rsl_sigma_m, age_2sigma_yr[, site]. The 2-sigma age error
/// is halved on the way in.
std::vector<ObservationRecord> ingest_proxy(const std::filesystem::path& path);
std::vector<ObservationRecord> parse_proxy(std::istream& in);

/// Inverse of the parsers; shortest round-trip formatting, so
/// parse(write(records)) == records.
void write_instrumental(std::ostream& out, std::span<const ObservationRecord> records);
void write_proxy(std::ostream& out, std::span<const ObservationRecord> records);

/// Lower-case alphanumerics only: "Tump Point" and "tump_point" match.
std::string canonical_site(const std::string& site);

/// Published North Carolina GIA rates (mm/yr) keyed on the site names that
/// actually occur in `records`. Unrecognised sites fall back to `fallback`.
GiaAssignment proxy_site_gia(std::span<const ObservationRecord> records, GiaParams fallback = {});

/// Six significant digits.
std::string format6(double value);

/// time, mean, lo68, hi68, lo95, hi95, mc_se
void write_summary(std::ostream& out, const CurveSummary& summary);
/// chain, draw, alpha, tau2, upsilon2, rho, log_posterior
void write_draws(std::ostream& out, std::span<const ChainOutput> chains);

struct ParameterDiagnostics {
  std::string parameter;
  double geweke_z = 0.0;  // worst |z| across chains, signed
  double rhat = 0.0;      // NaN with a single chain
  double ess = 0.0;       // summed over chains
  bool flagged = false;   // rhat > 1.1
};

/// Geweke, R-hat and ESS for alpha, tau2, upsilon2 and rho. Short chains give
/// NaN entries instead of failing.
std::vector<ParameterDiagnostics> compute_diagnostics(std::span<const ChainOutput> chains);
void write_diagnostics(std::ostream& out, std::span<const ParameterDiagnostics> diagnostics);

}  // namespace igp
