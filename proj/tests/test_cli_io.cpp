#include "support.hpp"

#include "spglm/cli_io.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace spglm;
namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out, err;
};

CliRun cli(std::vector<std::string> args) {
  args.insert(args.begin(), "spglm");
  std::vector<const char*> argv;
  for (const std::string& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

fs::path scratch_dir() {
  const fs::path p = fs::temp_directory_path() / "spglm_cli_tests";
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream f(p, std::ios::binary);
  f << text;
}

std::vector<std::string> section(const std::string& text, const std::string& name) {
  std::istringstream in(text);
  std::vector<std::string> lines;
  std::string line;
  bool inside = false;
  while (std::getline(in, line)) {
    if (line == "[" + name + "]") {
      inside = true;
      continue;
    }
    if (inside && line.empty()) break;
    if (inside) lines.push_back(line);
  }
  return lines;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::istringstream in(text);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

}  // namespace

TEST_CASE("CSV reader handles quotes and CRLF") {
  std::istringstream in("\"y\",x\r\n1,\"2.5\"\r\n3,4\r\n");
  const CsvTable t = read_csv(in);
  CHECK(t.header == std::vector<std::string>{"y", "x"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0][1] == "2.5");
  const TimeSeries ts = series_from_csv(t);
  CHECK(ts.labels == std::vector<std::string>{"Intercept", "x"});
  CHECK(ts.x(1, 1) == 4.0);
  std::istringstream ragged("y,x\n1\n");
  CHECK_THROWS_AS(read_csv(ragged), InputError);
  std::istringstream noy("a,b\n1,2\n");
  CHECK_THROWS_AS(series_from_csv(read_csv(noy)), InputError);
}

TEST_CASE("built-in Polio design reproduces the shipped covariates") {
  const TimeSeries shipped = test::polio();
  const CsvTable t = read_csv_file(test::data_path("polio.csv"));
  const TimeSeries generated = series_from_csv(t, Design::Polio);
  REQUIRE(generated.x.cols() == shipped.x.cols());
  CHECK((generated.x - shipped.x).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("fit command: semiparametric Polio report with inference") {
  const fs::path out = scratch_dir() / "polio_sp.txt";
  const CliRun r = cli({"fit", "--input", test::data_path("polio.csv"), "--method", "semiparametric", "--ma", "1,2,5",
                        "--infer", "--output", out.string()});
  CHECK(r.code == 0);
  const std::string text = slurp(out);
  const auto rows = section(text, "coefficients");
  REQUIRE(rows.size() == 10);  // header + 9 coefficients
  CHECK(rows[7].rfind("MA lag 1,", 0) == 0);

  const FitReport rep = reload_report(out.string() + ".json");
  CHECK(rep.parameters.size() == 9);
  REQUIRE(rep.parameters[6].lrt.has_value());
  CHECK(std::abs(rep.parameters[6].lrt->se_eq - 0.109) < 0.03);
  CHECK(report_to_json(rep) == slurp(out.string() + ".json"));
}

TEST_CASE("fit report round trip is bit-exact") {
  const fs::path out = scratch_dir() / "polio_pois.txt";
  const CliRun r = cli({"fit", "--input", test::data_path("polio.csv"), "--method", "poisson", "--ma", "1,2,5",
                        "--output", out.string()});
  REQUIRE(r.code == 0);
  const FitReport rep = reload_report(out.string() + ".json");
  const ParametricFitResult fit = fit_poisson(test::polio(), test::polio_spec());
  const std::vector<double> est = fit.params.flatten();
  REQUIRE(rep.parameters.size() == est.size());
  for (std::size_t i = 0; i < est.size(); ++i) {
    CHECK(rep.parameters[i].estimate == est[i]);
    CHECK(rep.parameters[i].se == fit.se[i]);
  }
  CHECK(rep.loglik == fit.loglik);
  CHECK(rep.state.W == fit.state.W);
  CHECK(rep.params().flatten() == est);
}

TEST_CASE("fit command with the Kings Cross design has five rows") {
  std::ostringstream csv;
  csv << "y\n";
  for (int t = 0; t < 69; ++t) csv << (t < 60 ? 3 + (t * 5) % 4 : 1 + t % 2) << "\n";
  const fs::path in = scratch_dir() / "kx.csv";
  write_file(in, csv.str());
  const CliRun r = cli({"fit", "--input", in.string(), "--design", "kingscross", "--method", "poisson", "--ma", "1,2"});
  CHECK(r.code == 0);
  const auto rows = section(r.out, "coefficients");
  REQUIRE(rows.size() == 6);
  CHECK(rows[2].rfind("Step,", 0) == 0);
}

TEST_CASE("fit command exit codes") {
  CHECK(cli({"fit", "--method", "poisson"}).code == 1);
  CHECK(cli({"fit", "--input", "/nonexistent/file.csv"}).code == 1);
  CHECK(cli({"fit", "--input", test::data_path("polio.csv"), "--method", "negbin", "--lambda", "1"}).code == 1);
  CHECK(cli({"fit", "--input", test::data_path("polio.csv"), "--ma", "0"}).code == 1);
  CHECK(cli({"bogus"}).code == 1);
  CHECK(cli({"--help"}).code == 0);

  const fs::path bad = scratch_dir() / "bad.csv";
  write_file(bad, "y\n1\n2.5\n3\n");
  const CliRun r = cli({"fit", "--input", bad.string(), "--method", "poisson"});
  CHECK(r.code == 1);
  CHECK(r.err.find("non-integer count") != std::string::npos);

  // Underdispersed counts push the negative-binomial fit to the Poisson limit.
  std::ostringstream csv;
  csv << "y\n";
  for (int i = 0; i < 120; ++i) csv << i % 3 << "\n";
  const fs::path under = scratch_dir() / "under.csv";
  write_file(under, csv.str());
  CHECK(cli({"fit", "--input", under.string(), "--method", "negbin"}).code == 2);

  const fs::path cfg = scratch_dir() / "bad.toml";
  write_file(cfg, "[fit]\nunknown_key = 3\n");
  CHECK(cli({"--config", cfg.string(), "fit", "--input", test::data_path("polio.csv")}).code == 1);
  const fs::path good = scratch_dir() / "good.toml";
  write_file(good, "[fit]\ninput = \"" + test::data_path("polio.csv") + "\"\nmethod = \"poisson\"\nma = [1, 2, 5]\n");
  const CliRun g = cli({"--config", good.string(), "fit"});
  CHECK(g.code == 0);
  CHECK(section(g.out, "coefficients").size() == 10);
}

TEST_CASE("simulate command writes deterministic series") {
  const CliRun a = cli({"simulate", "--model", "M1", "--n", "250", "--seed", "7"});
  CHECK(a.code == 0);
  CHECK(lines_of(a.out).size() == 251);
  CHECK(lines_of(a.out)[0] == "y");
  const CliRun b = cli({"simulate", "--model", "M1", "--n", "250", "--seed", "7"});
  CHECK(a.out == b.out);
  const CliRun c = cli({"simulate", "--model", "M2", "--n", "20", "--seed", "7"});
  CHECK(lines_of(c.out)[0] == "y,Trend");
  CHECK(cli({"simulate", "--model", "M9"}).code == 1);
  CHECK(cli({"simulate", "--model", "M1", "--alpha", "2"}).code == 1);
}

TEST_CASE("simulate command runs a coverage experiment") {
  const fs::path o1 = scratch_dir() / "cov1.csv", o2 = scratch_dir() / "cov2.csv", e1 = scratch_dir() / "est.csv";
  const std::vector<std::string> args = {"simulate", "--model", "M3", "--n", "150", "--reps", "10", "--seed", "3",
                                         "--fit", "poisson,negbin,semiparametric", "--lrt-params", "4"};
  auto with = [&](std::vector<std::string> extra) {
    std::vector<std::string> a = args;
    a.insert(a.end(), extra.begin(), extra.end());
    return a;
  };
  CHECK(cli(with({"--output", o1.string(), "--estimates", e1.string()})).code == 0);
  CHECK(cli(with({"--output", o2.string()})).code == 0);
  const std::string report = slurp(o1);
  CHECK(report == slurp(o2));
  const auto lines = lines_of(report);
  REQUIRE(lines.size() == 16);  // header + 5 parameters x 3 methods
  CHECK(lines[0].rfind("method,parameter,truth", 0) == 0);
  std::set<std::string> methods;
  for (std::size_t i = 1; i < lines.size(); ++i) methods.insert(lines[i].substr(0, lines[i].find(',')));
  CHECK(methods == std::set<std::string>{"poisson", "negbin", "semiparametric"});
  CHECK(lines_of(slurp(e1)).size() == 31);
}

TEST_CASE("pit command from a stored report") {
  const fs::path out = scratch_dir() / "polio_sp_pit.txt";
  REQUIRE(cli({"fit", "--input", test::data_path("polio.csv"), "--ma", "1,2,5", "--output", out.string()}).code == 0);
  const fs::path pmf = scratch_dir() / "pmf.csv";
  const CliRun r = cli({"pit", "--report", out.string() + ".json", "--bins", "10", "--pmf-at", "12,36,121",
                        "--pmf-output", pmf.string()});
  CHECK(r.code == 0);
  const auto hist = lines_of(r.out);
  REQUIRE(hist.size() == 11);
  double total = 0.0;
  for (std::size_t i = 1; i < hist.size(); ++i) total += std::stod(hist[i].substr(hist[i].rfind(',') + 1));
  CHECK(total / 10 == doctest::Approx(1.0).epsilon(1e-10));

  std::set<std::string> blocks;
  for (const std::string& l : lines_of(slurp(pmf))) blocks.insert(l.substr(0, l.find(',')));
  CHECK(blocks == std::set<std::string>{"t", "12", "36", "121"});

  CHECK(cli({"pit", "--report", out.string() + ".json", "--bins", "0"}).code == 1);
  CHECK(cli({"pit", "--bins", "10"}).code == 1);
  CHECK(cli({"pit", "--report", out.string() + ".json", "--pmf-at", "169"}).code == 1);
  CHECK(cli({"pit", "--report", (scratch_dir() / "missing.json").string()}).code == 1);

  const CliRun refit = cli({"pit", "--input", test::data_path("polio.csv"), "--method", "poisson", "--ma", "1,2,5"});
  CHECK(refit.code == 0);
  CHECK(lines_of(refit.out).size() == 11);
}
