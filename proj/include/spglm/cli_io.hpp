#pragma once

// File formats and the command-line front end.
//
// Input CSV: a header row, one response column named `y`, the remaining
// columns covariates in order; an intercept column is prepended unless
// disabled. With a built-in design only `y` is read and the covariates are
// generated from the time index.
//
// Fit reports are written twice: a human-readable text file (key: value
// lines followed by CSV tables) and a JSON mirror that reload_report()
// reads back with every number bit-exact.

#include "spglm/data_model.hpp"
#include "spglm/diagnostics.hpp"
#include "spglm/inference.hpp"
#include "spglm/mele_fitter.hpp"
#include "spglm/parametric_models.hpp"

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace spglm {

/// Built-in covariate designs generated from the row index.
///   polio:      t = 1..n, t' = t - 73; t'/1000, cos/sin(2 pi t'/12), cos/sin(2 pi t'/6)
///   kingscross: t = 0..n-1; I(t >= 60), cos(2 pi t/12)
enum class Design { None, Polio, KingsCross };

Design parse_design(const std::string& name);
const char* to_string(Design d) noexcept;

/// Covariate columns (no intercept) of a built-in design for n rows.
Eigen::MatrixXd design_covariates(Design d, std::size_t n, std::vector<std::string>& labels);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// RFC-4180 style reader (quoted fields, CRLF). Throws InputError.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

/// Builds a TimeSeries from a CSV table; see the file comment for layout.
TimeSeries series_from_csv(const CsvTable& table, Design design = Design::None, bool intercept = true);
TimeSeries load_series(const std::string& path, Design design = Design::None, bool intercept = true);

struct ParameterRow {
  std::string name;
  double estimate = 0.0;
  double se = 0.0;           // observed-information se (parametric), NaN otherwise
  double se_expected = 0.0;  // Fisher-scoring se (parametric mean parameters), NaN otherwise
  std::optional<LrtResult> lrt;
  std::string lrt_error;     // set when the LRT for this row failed
};

struct FitReport {
  FitMethod method = FitMethod::Poisson;
  std::string input;
  Design design = Design::None;
  bool intercept = true;
  MeanModelSpec spec;
  std::string gauge;  // semiparametric only
  std::vector<std::string> labels;
  std::vector<ParameterRow> parameters;  // flatten() order, alpha last for negbin
  double loglik = 0.0;
  double start_loglik = 0.0;
  bool converged = false;
  int iterations = 0;
  std::string message;
  double gauge_residual = 0.0;
  bool conditioning_warning = false;
  std::vector<double> y;
  FittedState state;
  std::vector<double> masses;  // semiparametric p-hat, one per observation

  ModelParams params() const;
  /// Predictive distributions reconstructed from the stored state.
  PredictiveModel predictive() const;
};

FitReport make_report(const ParametricFitResult& fit, const TimeSeries& ts, const MeanModelSpec& spec);
FitReport make_report(const SemiparametricFitResult& fit, const TimeSeries& ts, const MeanModelSpec& spec,
                      Gauge gauge);

void write_report_text(std::ostream& out, const FitReport& r);
std::string report_to_json(const FitReport& r);
FitReport report_from_json(const std::string& text);
FitReport reload_report(const std::string& json_path);

void write_histogram_csv(std::ostream& out, const PitHistogram& h);
/// Long-format pmf blocks: t (1-based), value, prob.
void write_pmf_csv(std::ostream& out, const std::vector<std::size_t>& times_one_based,
                   const std::vector<std::vector<PmfPoint>>& pmfs);
void write_series_csv(std::ostream& out, const TimeSeries& ts);

/// Exit codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 1;
inline constexpr int kExitNoConvergence = 2;

/// Entry point of the `spglm` executable.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace spglm
