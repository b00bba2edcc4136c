#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

struct CliResult {
  int code = -1;
  std::string out;
  std::string err;
};

fs::path fresh_dir(const std::string& tag) {
  static int counter = 0;
  const fs::path dir = fs::temp_directory_path() /
                       ("dcp_cli_" + tag + "_" + std::to_string(::getpid()) + "_" +
                        std::to_string(counter++));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

CliResult run_cli(const std::string& args) {
  const fs::path dir = fresh_dir("io");
  const fs::path out = dir / "out.txt";
  const fs::path err = dir / "err.txt";
  const std::string cmd = std::string("'") + DCP_CLI_PATH + "' " + args + " > '" +
                          out.string() + "' 2> '" + err.string() + "'";
  const int rc = std::system(cmd.c_str());
  CliResult res;
  res.code = WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
  res.out = slurp(out);
  res.err = slurp(err);
  return res;
}

// Tiny but valid training table: y depends on x1 only.
void write_train_csv(const fs::path& p, int rows = 12) {
  std::ofstream f(p);
  f << "x1,x2,y\n";
  for (int i = 0; i < rows; ++i) {
    const double x1 = (i % 5) - 2.0;
    const double x2 = (i % 3) - 1.0;
    f << x1 << ',' << x2 << ',' << 2.0 * x1 + 0.1 * i << "\n";
  }
}

int line_count(const std::string& text) {
  int lines = 0;
  for (char ch : text)
    if (ch == '\n') ++lines;
  return lines;
}

}  // namespace

TEST_CASE("simulate writes the pinned summary layout") {
  const fs::path dir = fresh_dir("sim");
  const CliResult res = run_cli(
      "simulate --n 15 --p 10 --M 3 --trials 5 --methods oracle,cpdm --timing off --out '" +
      dir.string() + "'");
  CAPTURE(res.err);
  REQUIRE(res.code == 0);
  const std::string csv = slurp(dir / "results.csv");
  REQUIRE(!csv.empty());
  const std::string header = csv.substr(0, csv.find('\n'));
  CHECK(header ==
        "method,n,p,M,trials,coverage,coverage_se,mean_length,length_se,"
        "clipped_fraction,mean_fit_count,wall_time_s");
  CHECK(line_count(csv) == 3);  // header + oracle + cpdm
  CHECK(csv.find("oracle,15,10,3,5,") != std::string::npos);
  CHECK(csv.find("cpdm,15,10,3,5,") != std::string::npos);
  CHECK(res.out.find("results.csv") != std::string::npos);
}

TEST_CASE("simulate output is byte-identical across reruns and threads") {
  const fs::path d1 = fresh_dir("det1");
  const fs::path d2 = fresh_dir("det2");
  const std::string common =
      " --n 14 --p 10 --M 3,4 --trials 6 --methods oracle,approximate,cpdd,cpdm "
      "--seed 7 --timing off --per-trial --out '";
  const CliResult r1 = run_cli("simulate --threads 1" + common + d1.string() + "'");
  const CliResult r2 = run_cli("simulate --threads 2" + common + d2.string() + "'");
  REQUIRE(r1.code == 0);
  REQUIRE(r2.code == 0);
  CHECK(slurp(d1 / "results.csv") == slurp(d2 / "results.csv"));
  CHECK(slurp(d1 / "trials.csv") == slurp(d2 / "trials.csv"));
  CHECK(!slurp(d1 / "trials.csv").empty());
}

TEST_CASE("command line flags override the config file") {
  const fs::path dir = fresh_dir("cfg");
  {
    std::ofstream f(dir / "run.ini");
    f << "n=12\np=10\ntrials=4\nM=3\nmethods=oracle\ntiming=off\n";
  }
  const CliResult res = run_cli("simulate --config '" + (dir / "run.ini").string() +
                                "' --trials 6 --out '" + dir.string() + "'");
  CAPTURE(res.err);
  REQUIRE(res.code == 0);
  CHECK(res.out.find("6 trials") != std::string::npos);  // flag beats config
  const std::string csv = slurp(dir / "results.csv");
  CHECK(csv.find("oracle,12,10,3,6,") != std::string::npos);  // config n carried through
}

TEST_CASE("usage errors exit with status 2") {
  CHECK(run_cli("simulate --n 15 --p 10 --trials 0").code == 2);
  CHECK(run_cli("simulate --n 15 --p 10 --methods bogus").code == 2);
  CHECK(run_cli("").code == 2);            // a subcommand is required
  CHECK(run_cli("simulate --no-such-flag").code == 2);
  CHECK(run_cli("predict --train a.csv").code == 2);  // --x is required
}

TEST_CASE("predict prints intervals and a hull") {
  const fs::path dir = fresh_dir("pred");
  write_train_csv(dir / "train.csv");
  const CliResult res = run_cli("predict --train '" + (dir / "train.csv").string() +
                                "' --x 1.0,0.5 --method cpdm --M 8 --alpha 0.2");
  CAPTURE(res.err);
  REQUIRE(res.code == 0);
  CHECK(res.out.find("method: cpdm") != std::string::npos);
  CHECK(res.out.find("intervals:") != std::string::npos);
  CHECK(res.out.find("hull:") != std::string::npos);
}

TEST_CASE("predict emits machine-readable json") {
  const fs::path dir = fresh_dir("json");
  write_train_csv(dir / "train.csv");
  const CliResult res = run_cli("predict --train '" + (dir / "train.csv").string() +
                                "' --x 0.0,0.0 --method approximate --M 6 --json");
  CAPTURE(res.err);
  REQUIRE(res.code == 0);
  const nlohmann::json doc = nlohmann::json::parse(res.out);
  REQUIRE(doc.contains("intervals"));
  REQUIRE(doc.contains("hull"));
  CHECK(doc["method"] == "approximate");
  CHECK(doc["alpha"].get<double>() == Catch::Approx(0.1));
  CHECK(doc["intervals"].is_array());
  if (!doc["hull"].is_null()) {
    REQUIRE(doc["hull"].size() == 2);
    CHECK(doc["hull"][0].is_number());
  }
}

TEST_CASE("an uninformative sample yields the whole line") {
  const fs::path dir = fresh_dir("wide");
  {
    std::ofstream f(dir / "one.csv");
    f << "x1,y\n0.5,1.0\n";
  }
  const CliResult text = run_cli("predict --train '" + (dir / "one.csv").string() +
                                 "' --x 0.5 --method cpdd --M 4");
  CAPTURE(text.err);
  REQUIRE(text.code == 0);
  CHECK(text.out.find("hull: (-inf,inf)") != std::string::npos);

  const CliResult as_json = run_cli("predict --train '" + (dir / "one.csv").string() +
                                    "' --x 0.5 --method cpdd --M 4 --json");
  REQUIRE(as_json.code == 0);
  const nlohmann::json doc = nlohmann::json::parse(as_json.out);
  REQUIRE(doc["hull"].size() == 2);
  CHECK(doc["hull"][0] == "-inf");
  CHECK(doc["hull"][1] == "inf");
}

TEST_CASE("data errors exit with status 1 and point at the problem") {
  const fs::path dir = fresh_dir("bad");

  {
    std::ofstream f(dir / "mangled.csv");
    f << "x1,x2,y\n1,2,3\n1,oops,3\n";
  }
  const CliResult bad_cell = run_cli("predict --train '" + (dir / "mangled.csv").string() +
                                     "' --x 1.0,2.0");
  CHECK(bad_cell.code == 1);
  CHECK(bad_cell.err.find("line 3") != std::string::npos);

  {
    std::ofstream f(dir / "head.csv");
    f << "a,b,c\n1,2,3\n";
  }
  const CliResult bad_head = run_cli("predict --train '" + (dir / "head.csv").string() +
                                     "' --x 1.0,2.0");
  CHECK(bad_head.code == 1);
  CHECK(bad_head.err.find("header") != std::string::npos);

  write_train_csv(dir / "train.csv");
  const CliResult mismatch = run_cli("predict --train '" + (dir / "train.csv").string() +
                                     "' --x 1.0,2.0,3.0");
  CHECK(mismatch.code == 1);
  CHECK(mismatch.err.find("dimension mismatch") != std::string::npos);

  const CliResult missing = run_cli("predict --train '" + (dir / "nope.csv").string() +
                                    "' --x 1.0");
  CHECK(missing.code == 1);
  CHECK(missing.err.find("could not open") != std::string::npos);
}

TEST_CASE("plot flag writes the two svg files") {
  const fs::path dir = fresh_dir("plot");
  const CliResult res = run_cli(
      "simulate --n 14 --p 10 --M 3 --trials 4 --methods oracle,cpdm --timing off --plot "
      "--out '" + dir.string() + "'");
  CAPTURE(res.err);
  REQUIRE(res.code == 0);
  CHECK(fs::exists(dir / "coverage.svg"));
  CHECK(fs::exists(dir / "length.svg"));
  const std::string svg = slurp(dir / "coverage.svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find("oracle") != std::string::npos);
}
