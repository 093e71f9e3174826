#include "spglm/cli_io.hpp"

#include "parallel.hpp"
#include "spglm/simulation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <charconv>
#include <cmath>
#include <fstream>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>

namespace spglm {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Shortest representation that parses back to the same double.
std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

json jnum(double v) {
  if (std::isfinite(v)) return v;
  return num(v);
}

double from_jnum(const json& j) {
  if (j.is_number()) return j.get<double>();
  const std::string s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  if (s == "nan") return kNaN;
  throw InputError("malformed number '" + s + "' in report");
}

json jvec(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(jnum(x));
  return a;
}

std::vector<double> from_jvec(const json& j) {
  std::vector<double> v;
  for (const json& x : j) v.push_back(from_jnum(x));
  return v;
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

double parse_double(const std::string& cell, std::size_t row, const std::string& column) {
  const char* b = cell.data();
  const char* e = b + cell.size();
  while (b < e && *b == ' ') ++b;
  while (e > b && e[-1] == ' ') --e;
  double v = 0.0;
  const auto res = std::from_chars(b, e, v);
  if (res.ec != std::errc() || res.ptr != e)
    throw InputError("row " + std::to_string(row + 1) + ", column '" + column + "': cannot parse '" + cell + "'");
  return v;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open '" + path + "' for writing");
  return f;
}

std::string gauge_name(Gauge g) { return g == Gauge::Profile ? "profile" : "penalty"; }

}  // namespace

Design parse_design(const std::string& name) {
  if (name == "none" || name.empty()) return Design::None;
  if (name == "polio") return Design::Polio;
  if (name == "kingscross") return Design::KingsCross;
  throw InputError("unknown design '" + name + "' (expected none, polio or kingscross)");
}

const char* to_string(Design d) noexcept {
  switch (d) {
    case Design::None: return "none";
    case Design::Polio: return "polio";
    case Design::KingsCross: return "kingscross";
  }
  return "none";
}

Eigen::MatrixXd design_covariates(Design d, std::size_t n, std::vector<std::string>& labels) {
  const auto rows = static_cast<Eigen::Index>(n);
  const double two_pi = 2.0 * std::numbers::pi;
  switch (d) {
    case Design::None: labels.clear(); return Eigen::MatrixXd(rows, 0);
    case Design::Polio: {
      labels = {"Trend", "CosAnnual", "SinAnnual", "CosSemiAnnual", "SinSemiAnnual"};
      Eigen::MatrixXd x(rows, 5);
      for (Eigen::Index i = 0; i < rows; ++i) {
        const double tp = static_cast<double>(i + 1) - 73.0;
        x(i, 0) = tp / 1000.0;
        x(i, 1) = std::cos(two_pi * tp / 12.0);
        x(i, 2) = std::sin(two_pi * tp / 12.0);
        x(i, 3) = std::cos(two_pi * tp / 6.0);
        x(i, 4) = std::sin(two_pi * tp / 6.0);
      }
      return x;
    }
    case Design::KingsCross: {
      labels = {"Step", "CosAnnual"};
      Eigen::MatrixXd x(rows, 2);
      for (Eigen::Index i = 0; i < rows; ++i) {
        const auto t = static_cast<double>(i);
        x(i, 0) = t >= 60 ? 1.0 : 0.0;
        x(i, 1) = std::cos(two_pi * t / 12.0);
      }
      return x;
    }
  }
  return {};
}

CsvTable read_csv(std::istream& in) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> rec;
  std::string field;
  bool quoted = false, any = false;
  char c;
  auto end_field = [&] {
    rec.push_back(field);
    field.clear();
  };
  auto end_record = [&] {
    end_field();
    if (!(rec.size() == 1 && rec[0].empty())) records.push_back(rec);
    rec.clear();
  };
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\n') {
      end_record();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (quoted) throw InputError("unterminated quoted field in CSV");
  if (any && (!field.empty() || !rec.empty())) end_record();
  if (records.empty()) throw InputError("CSV input is empty");
  CsvTable t;
  t.header = records.front();
  for (std::size_t i = 1; i < records.size(); ++i) {
    if (records[i].size() != t.header.size())
      throw InputError("CSV row " + std::to_string(i) + " has " + std::to_string(records[i].size()) +
                       " fields, header has " + std::to_string(t.header.size()));
    t.rows.push_back(std::move(records[i]));
  }
  return t;
}

CsvTable read_csv_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot read '" + path + "'");
  return read_csv(f);
}

TimeSeries series_from_csv(const CsvTable& table, Design design, bool intercept) {
  std::size_t ycol = table.header.size();
  for (std::size_t j = 0; j < table.header.size(); ++j)
    if (table.header[j] == "y") ycol = j;
  if (ycol == table.header.size()) throw InputError("CSV has no response column named 'y'");
  if (table.rows.empty()) throw InputError("CSV has no data rows");
  const std::size_t n = table.rows.size();

  TimeSeries ts;
  ts.y.resize(n);
  for (std::size_t i = 0; i < n; ++i) ts.y[i] = parse_double(table.rows[i][ycol], i, "y");

  std::vector<std::string> labels;
  Eigen::MatrixXd cov;
  if (design != Design::None) {
    cov = design_covariates(design, n, labels);
  } else {
    std::vector<std::size_t> cols;
    for (std::size_t j = 0; j < table.header.size(); ++j)
      if (j != ycol) {
        cols.push_back(j);
        labels.push_back(table.header[j]);
      }
    cov.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cols.size()));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < cols.size(); ++k)
        cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
            parse_double(table.rows[i][cols[k]], i, table.header[cols[k]]);
  }
  const Eigen::Index off = intercept ? 1 : 0;
  ts.x.resize(static_cast<Eigen::Index>(n), cov.cols() + off);
  if (intercept) {
    ts.x.col(0).setOnes();
    ts.labels.push_back("Intercept");
  }
  ts.x.rightCols(cov.cols()) = cov;
  ts.labels.insert(ts.labels.end(), labels.begin(), labels.end());
  if (ts.x.cols() == 0) throw InputError("model has no covariates (no intercept and no covariate columns)");
  return ts;
}

TimeSeries load_series(const std::string& path, Design design, bool intercept) {
  return series_from_csv(read_csv_file(path), design, intercept);
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

ModelParams FitReport::params() const {
  std::vector<double> v;
  for (const ParameterRow& p : parameters) v.push_back(p.estimate);
  return ModelParams::unflatten(spec, v, method == FitMethod::NegBin);
}

PredictiveModel FitReport::predictive() const {
  switch (method) {
    case FitMethod::Poisson: return PredictiveModel::parametric(Family::Poisson, y, state.mu);
    case FitMethod::NegBin: return PredictiveModel::parametric(Family::NegBin, y, state.mu, *params().aux);
    case FitMethod::Semiparametric:
      return PredictiveModel::semiparametric(y, state.mu, AtomicDistribution(y, masses), state.theta, state.b);
  }
  throw InputError("unknown method in report");
}

FitReport make_report(const ParametricFitResult& fit, const TimeSeries& ts, const MeanModelSpec& spec) {
  FitReport r;
  r.method = fit.family == Family::NegBin ? FitMethod::NegBin : FitMethod::Poisson;
  r.spec = spec;
  r.labels = ts.labels;
  const bool nb = fit.family == Family::NegBin;
  const std::vector<std::string> names = parameter_names(spec, ts.labels, nb);
  const std::vector<double> est = fit.params.flatten();
  for (std::size_t i = 0; i < est.size(); ++i) {
    ParameterRow row;
    row.name = names[i];
    row.estimate = est[i];
    row.se = i < fit.se.size() ? fit.se[i] : kNaN;
    row.se_expected = i < fit.se_expected.size() ? fit.se_expected[i] : kNaN;
    r.parameters.push_back(row);
  }
  r.loglik = fit.loglik;
  r.start_loglik = fit.start_loglik;
  r.converged = fit.converged;
  r.iterations = fit.iterations;
  r.message = fit.message;
  r.conditioning_warning = fit.conditioning_warning;
  r.y = ts.y;
  r.state = fit.state;
  return r;
}

FitReport make_report(const SemiparametricFitResult& fit, const TimeSeries& ts, const MeanModelSpec& spec,
                      Gauge gauge) {
  FitReport r;
  r.method = FitMethod::Semiparametric;
  r.spec = spec;
  r.gauge = gauge_name(gauge);
  r.labels = ts.labels;
  const std::vector<std::string> names = parameter_names(spec, ts.labels, false);
  const std::vector<double> est = fit.params.flatten();
  for (std::size_t i = 0; i < est.size(); ++i) {
    ParameterRow row;
    row.name = names[i];
    row.estimate = est[i];
    row.se = kNaN;
    row.se_expected = kNaN;
    r.parameters.push_back(row);
  }
  r.loglik = fit.loglik;
  r.start_loglik = fit.start_loglik;
  r.converged = fit.converged;
  r.iterations = fit.iterations;
  r.message = fit.message;
  r.gauge_residual = fit.gauge_residual;
  r.y = ts.y;
  r.state = fit.state;
  r.masses = fit.dist.masses();
  return r;
}

void write_report_text(std::ostream& out, const FitReport& r) {
  out << "spglm fit report\n";
  out << "method: " << to_string(r.method) << "\n";
  out << "input: " << r.input << "\n";
  out << "design: " << to_string(r.design) << "\n";
  out << "intercept: " << (r.intercept ? "true" : "false") << "\n";
  out << "ar_lags: " << join(r.spec.ar_lags) << "\n";
  out << "ma_lags: " << join(r.spec.ma_lags) << "\n";
  out << "lambda: " << num(r.spec.lambda) << "\n";
  if (r.method == FitMethod::Semiparametric) out << "gauge: " << r.gauge << "\n";
  out << "observations: " << r.y.size() << "\n";
  out << "loglik: " << num(r.loglik) << "\n";
  out << "start_loglik: " << num(r.start_loglik) << "\n";
  out << "converged: " << (r.converged ? "true" : "false") << "\n";
  out << "iterations: " << r.iterations << "\n";
  out << "message: " << r.message << "\n";
  if (r.method == FitMethod::Semiparametric) out << "gauge_residual: " << num(r.gauge_residual) << "\n";
  if (r.conditioning_warning) out << "warning: ill-conditioned Hessian, standard errors unreliable\n";

  out << "\n[coefficients]\n";
  out << "parameter,estimate,se,se_expected,se_eq,lrt_stat,pvalue,ci_lo,ci_hi,lrt_note\n";
  for (const ParameterRow& p : r.parameters) {
    out << p.name << ',' << num(p.estimate) << ',' << num(p.se) << ',' << num(p.se_expected);
    if (p.lrt) {
      std::string note;
      if (p.lrt->clamped) note += "clamped;";
      if (p.lrt->restarted) note += "restarted;";
      if (p.lrt->p_floor_hit) note += "mass-floor;";
      out << ',' << num(p.lrt->se_eq) << ',' << num(p.lrt->lrt_stat) << ',' << num(p.lrt->pvalue) << ','
          << num(p.lrt->ci_lo) << ',' << num(p.lrt->ci_hi) << ',' << note;
    } else {
      out << ",nan,nan,nan,nan,nan," << (p.lrt_error.empty() ? "" : "failed");
    }
    out << '\n';
  }

  if (r.method == FitMethod::Semiparametric && !r.masses.empty()) {
    const AtomicDistribution dist(r.y, r.masses);
    double mean = 0.0, second = 0.0;
    const auto& v = dist.support_values();
    const auto& m = dist.support_masses();
    for (std::size_t k = 0; k < v.size(); ++k) {
      mean += m[k] * v[k];
      second += m[k] * v[k] * v[k];
    }
    out << "\n[distribution]\n";
    out << "base_mean: " << num(mean) << "\n";
    out << "base_variance: " << num(second - mean * mean) << "\n";
    out << "value,mass\n";
    for (std::size_t k = 0; k < v.size(); ++k) out << num(v[k]) << ',' << num(m[k]) << '\n';
  }

  out << "\n[state]\n";
  const bool tilts = !r.state.theta.empty();
  out << "t,y,W,Z,e,mu,var" << (tilts ? ",theta,b" : "") << '\n';
  for (std::size_t t = 0; t < r.state.size(); ++t) {
    out << t + 1 << ',' << num(r.y[t]) << ',' << num(r.state.W[t]) << ',' << num(r.state.Z[t]) << ','
        << num(r.state.e[t]) << ',' << num(r.state.mu[t]) << ',' << num(r.state.var[t]);
    if (tilts) out << ',' << num(r.state.theta[t]) << ',' << num(r.state.b[t]);
    out << '\n';
  }
}

std::string report_to_json(const FitReport& r) {
  json j;
  j["format"] = "spglm-fit-report";
  j["version"] = 1;
  j["method"] = to_string(r.method);
  j["input"] = r.input;
  j["design"] = to_string(r.design);
  j["intercept"] = r.intercept;
  j["model"] = {{"q", r.spec.q},
                {"ar_lags", r.spec.ar_lags},
                {"ma_lags", r.spec.ma_lags},
                {"lambda", r.spec.lambda},
                {"bounds",
                 {{"beta_abs", r.spec.bounds.beta_abs},
                  {"arma_abs", r.spec.bounds.arma_abs},
                  {"alpha_lo", r.spec.bounds.alpha_lo},
                  {"alpha_hi", r.spec.bounds.alpha_hi}}}};
  j["gauge"] = r.gauge;
  j["labels"] = r.labels;
  j["fit"] = {{"loglik", jnum(r.loglik)},
              {"start_loglik", jnum(r.start_loglik)},
              {"converged", r.converged},
              {"iterations", r.iterations},
              {"message", r.message},
              {"gauge_residual", jnum(r.gauge_residual)},
              {"conditioning_warning", r.conditioning_warning}};
  json params = json::array();
  for (const ParameterRow& p : r.parameters) {
    json jp = {{"name", p.name},
               {"estimate", jnum(p.estimate)},
               {"se", jnum(p.se)},
               {"se_expected", jnum(p.se_expected)},
               {"lrt_error", p.lrt_error}};
    if (p.lrt) {
      jp["lrt"] = {{"lrt_stat", jnum(p.lrt->lrt_stat)}, {"pvalue", jnum(p.lrt->pvalue)},
                   {"estimate", jnum(p.lrt->estimate)}, {"null_value", jnum(p.lrt->null_value)},
                   {"se_eq", jnum(p.lrt->se_eq)},       {"ci_lo", jnum(p.lrt->ci_lo)},
                   {"ci_hi", jnum(p.lrt->ci_hi)},       {"level", jnum(p.lrt->level)},
                   {"clamped", p.lrt->clamped},         {"restarted", p.lrt->restarted},
                   {"p_floor_hit", p.lrt->p_floor_hit}};
    } else {
      jp["lrt"] = nullptr;
    }
    params.push_back(jp);
  }
  j["parameters"] = params;
  j["series"] = {{"y", jvec(r.y)}};
  j["state"] = {{"W", jvec(r.state.W)},   {"Z", jvec(r.state.Z)},         {"e", jvec(r.state.e)},
                {"mu", jvec(r.state.mu)}, {"var", jvec(r.state.var)},     {"theta", jvec(r.state.theta)},
                {"b", jvec(r.state.b)}};
  j["distribution"] = {{"masses", jvec(r.masses)}};
  return j.dump(1) + "\n";
}

FitReport report_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed fit report: ") + e.what());
  }
  try {
    if (j.at("format") != "spglm-fit-report") throw InputError("not an spglm fit report");
    FitReport r;
    r.method = parse_fit_method(j.at("method").get<std::string>());
    r.input = j.at("input").get<std::string>();
    r.design = parse_design(j.at("design").get<std::string>());
    r.intercept = j.at("intercept").get<bool>();
    const json& m = j.at("model");
    r.spec.q = m.at("q").get<std::size_t>();
    r.spec.ar_lags = m.at("ar_lags").get<std::vector<int>>();
    r.spec.ma_lags = m.at("ma_lags").get<std::vector<int>>();
    r.spec.lambda = m.at("lambda").get<double>();
    const json& b = m.at("bounds");
    r.spec.bounds.beta_abs = b.at("beta_abs").get<double>();
    r.spec.bounds.arma_abs = b.at("arma_abs").get<double>();
    r.spec.bounds.alpha_lo = b.at("alpha_lo").get<double>();
    r.spec.bounds.alpha_hi = b.at("alpha_hi").get<double>();
    r.gauge = j.at("gauge").get<std::string>();
    r.labels = j.at("labels").get<std::vector<std::string>>();
    const json& f = j.at("fit");
    r.loglik = from_jnum(f.at("loglik"));
    r.start_loglik = from_jnum(f.at("start_loglik"));
    r.converged = f.at("converged").get<bool>();
    r.iterations = f.at("iterations").get<int>();
    r.message = f.at("message").get<std::string>();
    r.gauge_residual = from_jnum(f.at("gauge_residual"));
    r.conditioning_warning = f.at("conditioning_warning").get<bool>();
    for (const json& jp : j.at("parameters")) {
      ParameterRow p;
      p.name = jp.at("name").get<std::string>();
      p.estimate = from_jnum(jp.at("estimate"));
      p.se = from_jnum(jp.at("se"));
      p.se_expected = from_jnum(jp.at("se_expected"));
      p.lrt_error = jp.at("lrt_error").get<std::string>();
      if (!jp.at("lrt").is_null()) {
        const json& l = jp.at("lrt");
        LrtResult lr;
        lr.lrt_stat = from_jnum(l.at("lrt_stat"));
        lr.pvalue = from_jnum(l.at("pvalue"));
        lr.estimate = from_jnum(l.at("estimate"));
        lr.null_value = from_jnum(l.at("null_value"));
        lr.se_eq = from_jnum(l.at("se_eq"));
        lr.ci_lo = from_jnum(l.at("ci_lo"));
        lr.ci_hi = from_jnum(l.at("ci_hi"));
        lr.level = from_jnum(l.at("level"));
        lr.clamped = l.at("clamped").get<bool>();
        lr.restarted = l.at("restarted").get<bool>();
        lr.p_floor_hit = l.at("p_floor_hit").get<bool>();
        p.lrt = lr;
      }
      r.parameters.push_back(p);
    }
    r.y = from_jvec(j.at("series").at("y"));
    const json& s = j.at("state");
    r.state.W = from_jvec(s.at("W"));
    r.state.Z = from_jvec(s.at("Z"));
    r.state.e = from_jvec(s.at("e"));
    r.state.mu = from_jvec(s.at("mu"));
    r.state.var = from_jvec(s.at("var"));
    r.state.theta = from_jvec(s.at("theta"));
    r.state.b = from_jvec(s.at("b"));
    r.masses = from_jvec(j.at("distribution").at("masses"));
    const std::size_t expected = r.spec.mean_param_count() + (r.method == FitMethod::NegBin ? 1 : 0);
    if (r.parameters.size() != expected) throw InputError("fit report parameter count does not match its model");
    if (r.state.mu.size() != r.y.size()) throw InputError("fit report state length does not match its series");
    return r;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed fit report: ") + e.what());
  }
}

FitReport reload_report(const std::string& json_path) {
  std::ifstream f(json_path, std::ios::binary);
  if (!f) throw InputError("cannot read fit report '" + json_path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return report_from_json(ss.str());
}

void write_histogram_csv(std::ostream& out, const PitHistogram& h) {
  out << "bin,lower,upper,height\n";
  for (std::size_t i = 0; i < h.bins; ++i)
    out << i + 1 << ',' << num(h.grid[i]) << ',' << num(h.grid[i + 1]) << ',' << num(h.heights[i]) << '\n';
}

void write_pmf_csv(std::ostream& out, const std::vector<std::size_t>& times, const std::vector<std::vector<PmfPoint>>& pmfs) {
  out << "t,value,prob\n";
  for (std::size_t k = 0; k < times.size(); ++k)
    for (const PmfPoint& p : pmfs[k]) out << times[k] << ',' << num(p.value) << ',' << num(p.prob) << '\n';
}

void write_series_csv(std::ostream& out, const TimeSeries& ts) {
  std::vector<Eigen::Index> cols;
  out << 'y';
  for (Eigen::Index j = 0; j < ts.x.cols(); ++j) {
    const auto uj = static_cast<std::size_t>(j);
    if (uj < ts.labels.size() && ts.labels[uj] == "Intercept") continue;
    cols.push_back(j);
    out << ',' << (uj < ts.labels.size() ? ts.labels[uj] : "x" + std::to_string(j + 1));
  }
  out << '\n';
  for (std::size_t t = 0; t < ts.y.size(); ++t) {
    out << num(ts.y[t]);
    for (Eigen::Index j : cols) out << ',' << num(ts.x(static_cast<Eigen::Index>(t), j));
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Command line
// ---------------------------------------------------------------------------

namespace {

struct FitConfig {
  std::string input;
  std::string design = "none";
  bool no_intercept = false;
  std::vector<int> ma, ar;
  double lambda = 0.5;
  std::string method = "semiparametric";
  std::string gauge = "profile";
  bool infer = false;
  double level = 0.05;
  int max_iter = 0;
  double ftol = 0.0, gtol = 0.0;
  ParamBounds bounds{};
  unsigned threads = 0;
};

void add_fit_options(CLI::App* app, FitConfig& c, bool input_required) {
  auto* in = app->add_option("--input", c.input, "CSV file with a 'y' column and covariate columns");
  if (input_required) in->required();
  app->add_option("--design", c.design, "built-in covariates: none, polio, kingscross")
      ->check(CLI::IsMember({"none", "polio", "kingscross"}));
  app->add_flag("--no-intercept", c.no_intercept, "do not prepend an intercept column");
  app->add_option("--ma", c.ma, "MA lags, comma separated")->delimiter(',');
  app->add_option("--ar", c.ar, "AR lags, comma separated")->delimiter(',');
  app->add_option("--lambda", c.lambda, "residual scaling exponent (0.5 Pearson, 1 score)");
  app->add_option("--method", c.method, "poisson, negbin or semiparametric")
      ->check(CLI::IsMember({"poisson", "negbin", "semiparametric"}));
  app->add_option("--gauge", c.gauge, "semiparametric identifiability handling: profile or penalty")
      ->check(CLI::IsMember({"profile", "penalty"}));
  app->add_option("--max-iter", c.max_iter, "optimizer iteration cap")->check(CLI::PositiveNumber);
  app->add_option("--ftol", c.ftol, "relative objective tolerance")->check(CLI::PositiveNumber);
  app->add_option("--gtol", c.gtol, "gradient sup-norm tolerance")->check(CLI::PositiveNumber);
  app->add_option("--beta-bound", c.bounds.beta_abs, "box bound |beta_k| <= B")->check(CLI::PositiveNumber);
  app->add_option("--arma-bound", c.bounds.arma_abs, "box bound |phi|, |psi| < B")->check(CLI::Range(0.0, 1.0));
  app->add_option("--alpha-min", c.bounds.alpha_lo, "lower bound for the negbin alpha")->check(CLI::PositiveNumber);
  app->add_option("--alpha-max", c.bounds.alpha_hi, "upper bound for the negbin alpha")->check(CLI::PositiveNumber);
  app->add_option("--threads", c.threads, "worker threads (default: SPGLM_THREADS or 1)");
}

optim::Options optimizer_options(const FitConfig& c, optim::Options base) {
  if (c.max_iter > 0) base.max_iterations = c.max_iter;
  if (c.ftol > 0) base.ftol = c.ftol;
  if (c.gtol > 0) base.gtol = c.gtol;
  return base;
}

struct FitOutcome {
  FitReport report;
  bool ok = true;  // fit converged and every requested LRT succeeded
};

FitOutcome run_fit(const FitConfig& c, bool infer) {
  const FitMethod method = parse_fit_method(c.method);
  if (method == FitMethod::NegBin && c.lambda != 0.5)
    throw InputError("method negbin uses Pearson residuals; --lambda must be 0.5");
  if (!(c.bounds.alpha_lo < c.bounds.alpha_hi)) throw InputError("--alpha-min must be below --alpha-max");
  const Design design = parse_design(c.design);
  TimeSeries ts = load_series(c.input, design, !c.no_intercept);

  MeanModelSpec spec;
  spec.q = static_cast<std::size_t>(ts.x.cols());
  spec.ar_lags = c.ar;
  spec.ma_lags = c.ma;
  spec.lambda = c.lambda;
  spec.bounds = c.bounds;
  spec.validate();
  ts = validate_dataset(ts, spec, ResponseKind::Count);

  const unsigned threads = c.threads ? c.threads : default_thread_count();
  LrtOptions lo;
  lo.level = c.level;
  FitOutcome out;
  if (method == FitMethod::Semiparametric) {
    MeleOptions mo;
    mo.gauge = c.gauge == "penalty" ? Gauge::Penalty : Gauge::Profile;
    mo.optimizer = optimizer_options(c, mo.optimizer);
    const SemiparametricFitResult fit = fit_semiparametric(ts, spec, mo);
    out.report = make_report(fit, ts, spec, mo.gauge);
    lo.mele = mo;
    if (infer && fit.converged) {
      detail::parallel_for(spec.mean_param_count(), threads, [&](std::size_t i) {
        try {
          out.report.parameters[i].lrt = lrt_single(ts, spec, fit, i, 0.0, lo);
        } catch (const Error& e) {
          out.report.parameters[i].lrt_error = e.what();
        }
      });
    }
  } else {
    ParametricOptions po;
    po.optimizer = optimizer_options(c, po.optimizer);
    const ParametricFitResult fit =
        fit_parametric(method == FitMethod::NegBin ? Family::NegBin : Family::Poisson, ts, spec, po);
    out.report = make_report(fit, ts, spec);
    lo.parametric = po;
    if (infer && fit.converged) {
      detail::parallel_for(spec.mean_param_count(), threads, [&](std::size_t i) {
        try {
          out.report.parameters[i].lrt = lrt_single(ts, spec, fit, i, 0.0, lo);
        } catch (const Error& e) {
          out.report.parameters[i].lrt_error = e.what();
        }
      });
    }
  }
  out.report.input = c.input;
  out.report.design = design;
  out.report.intercept = !c.no_intercept;
  out.ok = out.report.converged;
  for (const ParameterRow& p : out.report.parameters)
    if (!p.lrt_error.empty()) out.ok = false;
  return out;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Semiparametric and parametric GLARMA models for count time series", "spglm"};
  app.require_subcommand(1);
  app.set_config("--config", "", "read options from an INI/TOML file");
  app.allow_config_extras(CLI::config_extras_mode::error);

  // fit
  FitConfig fc;
  std::string fit_output;
  auto* fit_cmd = app.add_subcommand("fit", "fit a model to a count series");
  add_fit_options(fit_cmd, fc, true);
  fit_cmd->add_flag("--infer", fc.infer, "likelihood-ratio test and se_eq for every mean parameter");
  fit_cmd->add_option("--level", fc.level, "LRT / interval level alpha")->check(CLI::Range(1e-12, 1.0 - 1e-12));
  fit_cmd->add_option("--output", fit_output, "text report path; a JSON mirror is written to <path>.json");

  // simulate
  std::string sim_model = "M1", sim_output, est_output, sim_fit;
  std::size_t sim_n = 250, burn_in = 100, reps = 0;
  std::uint64_t seed = 0;
  std::vector<double> sim_beta, sim_phi, sim_psi;
  double sim_alpha = 0.0;
  unsigned sim_threads = 0;
  bool no_intervals = false;
  std::vector<std::size_t> lrt_params;
  auto* sim_cmd = app.add_subcommand("simulate", "simulate a series or run a Monte Carlo experiment");
  sim_cmd->add_option("--model", sim_model, "M1, M1p, M1pp, M2 or M3")
      ->check(CLI::IsMember({"M1", "M1p", "M1pp", "M2", "M3"}));
  sim_cmd->add_option("--n", sim_n, "series length")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--burn-in", burn_in, "discarded initial draws");
  sim_cmd->add_option("--seed", seed, "64-bit seed");
  sim_cmd->add_option("--beta", sim_beta, "true regression coefficients")->delimiter(',');
  sim_cmd->add_option("--phi", sim_phi, "true AR coefficients")->delimiter(',');
  sim_cmd->add_option("--psi", sim_psi, "true MA coefficients")->delimiter(',');
  sim_cmd->add_option("--alpha", sim_alpha, "true negbin dispersion (M3)")->check(CLI::PositiveNumber);
  sim_cmd->add_option("--reps", reps, "replications; runs an experiment when given");
  sim_cmd->add_option("--fit", sim_fit, "methods for the experiment, comma separated");
  sim_cmd->add_option("--estimates", est_output, "experiment: write raw estimates CSV here");
  sim_cmd->add_flag("--no-intervals", no_intervals, "experiment: skip standard errors and intervals");
  sim_cmd->add_option("--lrt-params", lrt_params, "experiment: 0-based parameter indices for semiparametric LRTs")
      ->delimiter(',');
  sim_cmd->add_option("--threads", sim_threads, "worker threads (default: SPGLM_THREADS or 1)");
  sim_cmd->add_option("--output", sim_output, "output CSV path (default: stdout)");

  // pit
  FitConfig pc;
  std::string report_path, pit_output, pmf_output;
  std::size_t bins = 10;
  std::vector<std::size_t> pmf_at;
  auto* pit_cmd = app.add_subcommand("pit", "PIT histogram and conditional pmfs of a fit");
  add_fit_options(pit_cmd, pc, false);
  pit_cmd->add_option("--report", report_path, "JSON fit report written by 'fit'");
  pit_cmd->add_option("--bins", bins, "number of histogram bins")->check(CLI::PositiveNumber);
  pit_cmd->add_option("--pmf-at", pmf_at, "1-based time indices for conditional pmf export")->delimiter(',');
  pit_cmd->add_option("--output", pit_output, "histogram CSV path (default: stdout)");
  pit_cmd->add_option("--pmf-output", pmf_output, "pmf CSV path (default: after the histogram)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\nrun with --help for usage\n";
    return kExitInput;
  }

  try {
    if (fit_cmd->parsed()) {
      const FitOutcome res = run_fit(fc, fc.infer);
      if (fit_output.empty()) {
        write_report_text(out, res.report);
      } else {
        std::ofstream txt = open_output(fit_output);
        write_report_text(txt, res.report);
        std::ofstream js = open_output(fit_output + ".json");
        js << report_to_json(res.report);
        out << "wrote " << fit_output << " and " << fit_output << ".json\n";
      }
      if (!res.report.converged) err << "fit did not converge: " << res.report.message << "\n";
      for (const ParameterRow& p : res.report.parameters)
        if (!p.lrt_error.empty()) err << "LRT for " << p.name << " failed: " << p.lrt_error << "\n";
      return res.ok ? kExitOk : kExitNoConvergence;
    }

    if (sim_cmd->parsed()) {
      const SimModel model = parse_sim_model(sim_model);
      SimSpec spec = default_sim_spec(model, sim_n, seed);
      spec.burn_in = burn_in;
      if (!sim_beta.empty()) spec.true_params.beta = sim_beta;
      if (!sim_phi.empty()) spec.true_params.phi = sim_phi;
      if (!sim_psi.empty()) spec.true_params.psi = sim_psi;
      if (sim_alpha > 0) {
        if (model != SimModel::M3) throw InputError("--alpha applies to model M3 only");
        spec.true_params.aux = sim_alpha;
      }
      spec.validate();
      std::ofstream file;
      std::ostream* os = &out;
      if (!sim_output.empty()) {
        file = open_output(sim_output);
        os = &file;
      }
      if (reps == 0) {
        if (!sim_fit.empty()) throw InputError("--fit requires --reps");
        write_series_csv(*os, simulate(spec));
        return kExitOk;
      }
      std::vector<FitMethod> methods;
      std::stringstream ss(sim_fit.empty() ? "poisson,semiparametric" : sim_fit);
      for (std::string m; std::getline(ss, m, ',');) methods.push_back(parse_fit_method(m));
      ExperimentOptions eo;
      eo.threads = sim_threads ? sim_threads : default_thread_count();
      eo.intervals = !no_intervals;
      eo.lrt_params = lrt_params;
      const ExperimentResult res = run_experiment(spec, reps, methods, seed, eo);
      *os << "method,parameter,truth,mean_estimate,bias,se_emp,se_bar,coverage,rep_count,failure_count\n";
      for (const CoverageReport& rep : res.reports)
        for (const CoverageRow& row : rep.rows)
          *os << to_string(rep.method) << ',' << row.parameter << ',' << num(row.truth) << ','
              << num(row.mean_estimate) << ',' << num(row.mean_estimate - row.truth) << ',' << num(row.se_emp)
              << ',' << num(row.se_bar) << ',' << num(row.coverage) << ',' << row.rep_count << ','
              << row.failure_count << '\n';
      for (const CoverageReport& rep : res.reports)
        if (rep.failure_flag)
          err << "warning: " << to_string(rep.method) << " failed in " << rep.failures << " of " << rep.reps
              << " replications\n";
      if (!est_output.empty()) {
        std::ofstream ef = open_output(est_output);
        ef << "method,rep,seed";
        for (const std::string& name : res.parameter_names) ef << ',' << name << ',' << "se " << name;
        ef << '\n';
        for (std::size_t k = 0; k < methods.size(); ++k)
          for (std::size_t r = 0; r < reps; ++r) {
            ef << to_string(methods[k]) << ',' << r + 1 << ',' << replication_seed(seed, r);
            for (std::size_t i = 0; i < res.parameter_names.size(); ++i)
              ef << ',' << num(res.estimates[k][r][i]) << ',' << num(res.standard_errors[k][r][i]);
            ef << '\n';
          }
      }
      return kExitOk;
    }

    if (pit_cmd->parsed()) {
      FitReport report;
      if (!report_path.empty()) {
        if (!pc.input.empty()) throw InputError("give either --report or --input, not both");
        report = reload_report(report_path);
      } else if (!pc.input.empty()) {
        const FitOutcome res = run_fit(pc, false);
        if (!res.report.converged) {
          err << "fit did not converge: " << res.report.message << "\n";
          return kExitNoConvergence;
        }
        report = res.report;
      } else {
        throw InputError("pit needs a fit: pass --report or --input");
      }
      const PredictiveModel pred = report.predictive();
      std::vector<std::vector<PmfPoint>> pmfs;
      for (std::size_t t : pmf_at) {
        if (t < 1 || t > pred.size())
          throw InputError("--pmf-at index " + std::to_string(t) + " outside 1.." + std::to_string(pred.size()));
        pmfs.push_back(conditional_pmf(pred, t - 1));
      }
      const PitHistogram h = pit_histogram(pred, bins);
      std::ofstream hf;
      std::ostream* hos = &out;
      if (!pit_output.empty()) {
        hf = open_output(pit_output);
        hos = &hf;
      }
      write_histogram_csv(*hos, h);
      if (h.degenerate) err << "warning: " << h.degenerate << " observations have zero predictive mass\n";
      if (!pmf_at.empty()) {
        if (pmf_output.empty()) {
          *hos << '\n';
          write_pmf_csv(*hos, pmf_at, pmfs);
        } else {
          std::ofstream pf = open_output(pmf_output);
          write_pmf_csv(pf, pmf_at, pmfs);
        }
      }
      return kExitOk;
    }
  } catch (const InputError& e) {
    err << "input error: " << e.what() << "\n";
    return kExitInput;
  } catch (const Error& e) {
    err << "fit failed: " << e.what() << "\n";
    return kExitNoConvergence;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}

}  // namespace spglm
