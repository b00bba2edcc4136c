#include <CLI11.hpp>
#include <dcp/dcp.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

std::string format_endpoint(double v) {
  if (v == dcp::kInf) return "inf";
  if (v == -dcp::kInf) return "-inf";
  return dcp::format_double(v, "%.6g");
}

std::string format_interval(const dcp::Interval& iv) {
  std::string s;
  s += iv.lo_open ? '(' : '[';
  s += format_endpoint(iv.lo);
  s += ',';
  s += format_endpoint(iv.hi);
  s += iv.hi_open ? ')' : ']';
  return s;
}

json endpoint_json(double v) {
  if (v == dcp::kInf) return json("inf");
  if (v == -dcp::kInf) return json("-inf");
  return json(v);
}

// Validator for probabilities that must stay strictly inside (0,1).
CLI::Validator strict_unit_interval() {
  return CLI::Validator(
      [](std::string& s) -> std::string {
        double v = 0.0;
        if (!dcp::try_parse_double(s, v) || !(v > 0.0 && v < 1.0))
          return "value must lie strictly in (0,1)";
        return {};
      },
      "FLOAT in (0,1)", "StrictUnit");
}

struct SimulateArgs {
  dcp::ExperimentConfig cfg;
  std::vector<std::string> method_names = {"oracle", "parametric", "approximate", "cpdd",
                                           "cpdm"};
  std::string discretizer = "nearest";
  std::string warm = "on";
  std::string timing = "on";
  std::string out_dir = ".";
  std::string config_path;
  bool plot = false;
  bool per_trial = false;
};

CLI::App* add_simulate(CLI::App& app, SimulateArgs& a) {
  CLI::App* sc = app.add_subcommand("simulate", "run the coverage/length experiment");
  sc->add_option("--config", a.config_path,
                 "config file with key=value lines; explicit flags take precedence")
      ->check(CLI::ExistingFile);
  sc->add_option("--n", a.cfg.n, "training rows per trial")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sc->add_option("--p", a.cfg.p, "covariate dimension")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sc->add_option("--sigma", a.cfg.sigma, "noise standard deviation")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sc->add_option("--alpha", a.cfg.alpha, "target miscoverage")
      ->check(strict_unit_interval())
      ->capture_default_str();
  sc->add_option("--M", a.cfg.grid_sizes, "grid sizes, comma separated")
      ->delimiter(',')
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sc->add_option("--methods", a.method_names, "methods to run, comma separated")
      ->delimiter(',')
      ->check(CLI::IsMember({"oracle", "parametric", "approximate", "cpdd", "cpdm", "split"}))
      ->capture_default_str();
  sc->add_option("--trials", a.cfg.trials, "Monte Carlo trials")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sc->add_option("--seed", a.cfg.seed, "master seed")->capture_default_str();
  sc->add_option("--threads", a.cfg.threads, "worker threads, 0 = hardware")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sc->add_option("--discretizer", a.discretizer, "rounding scheme")
      ->check(CLI::IsMember({"nearest", "randomized"}))
      ->capture_default_str();
  sc->add_option("--warm-start", a.warm, "reuse solutions along the grid")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  sc->add_option("--timing", a.timing, "measure wall time (off writes zeros)")
      ->check(CLI::IsMember({"on", "off"}))
      ->capture_default_str();
  sc->add_option("--out", a.out_dir, "output directory")->capture_default_str();
  sc->add_flag("--plot", a.plot, "also write coverage.svg and length.svg");
  sc->add_flag("--per-trial", a.per_trial, "also write trials.csv");
  return sc;
}

int parse_config_int(const std::string& key, const std::string& value) {
  double v = 0.0;
  if (!dcp::try_parse_double(value, v) || v != std::floor(v))
    throw std::runtime_error("config: " + key + " must be an integer, got '" + value + "'");
  return static_cast<int>(v);
}

bool parse_config_bool(const std::string& key, const std::string& value) {
  if (value == "on" || value == "true" || value == "1" || value == "yes") return true;
  if (value == "off" || value == "false" || value == "0" || value == "no") return false;
  throw std::runtime_error("config: " + key + " must be on/off, got '" + value + "'");
}

// key=value lines, # comments, blank lines ignored. Values only apply to
// options the command line left untouched.
void apply_config_file(const CLI::App* sc, SimulateArgs& a) {
  std::ifstream in(a.config_path);
  if (!in) throw std::runtime_error("could not open " + a.config_path);
  const auto untouched = [&](const char* flag) { return sc->count(flag) == 0; };

  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string text = dcp::trim(line);
    if (text.empty() || text[0] == '#') continue;
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected key=value, got '" + text + "'");
    const std::string key = dcp::trim(text.substr(0, eq));
    const std::string value = dcp::trim(text.substr(eq + 1));

    if (key == "n") {
      if (untouched("--n")) a.cfg.n = parse_config_int(key, value);
    } else if (key == "p") {
      if (untouched("--p")) a.cfg.p = parse_config_int(key, value);
    } else if (key == "sigma") {
      if (untouched("--sigma") && !dcp::try_parse_double(value, a.cfg.sigma))
        throw std::runtime_error("config: sigma must be a number, got '" + value + "'");
    } else if (key == "alpha") {
      if (untouched("--alpha") && !dcp::try_parse_double(value, a.cfg.alpha))
        throw std::runtime_error("config: alpha must be a number, got '" + value + "'");
    } else if (key == "M") {
      if (untouched("--M")) {
        a.cfg.grid_sizes.clear();
        for (const std::string& f : dcp::split_fields(value))
          a.cfg.grid_sizes.push_back(parse_config_int(key, dcp::trim(f)));
      }
    } else if (key == "methods") {
      if (untouched("--methods")) {
        a.method_names.clear();
        for (const std::string& f : dcp::split_fields(value))
          a.method_names.push_back(dcp::trim(f));
      }
    } else if (key == "trials") {
      if (untouched("--trials")) a.cfg.trials = parse_config_int(key, value);
    } else if (key == "seed") {
      if (untouched("--seed"))
        a.cfg.seed = static_cast<std::uint64_t>(std::stoull(value));
    } else if (key == "threads") {
      if (untouched("--threads")) a.cfg.threads = parse_config_int(key, value);
    } else if (key == "discretizer") {
      if (untouched("--discretizer")) a.discretizer = value;
    } else if (key == "warm-start") {
      if (untouched("--warm-start")) a.warm = value;
    } else if (key == "timing") {
      if (untouched("--timing")) a.timing = value;
    } else if (key == "out") {
      if (untouched("--out")) a.out_dir = value;
    } else if (key == "plot") {
      if (untouched("--plot")) a.plot = parse_config_bool(key, value);
    } else if (key == "per-trial") {
      if (untouched("--per-trial")) a.per_trial = parse_config_bool(key, value);
    } else {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": unknown key '" +
                               key + "'");
    }
  }

  // Values that bypassed the flag validators get checked here instead.
  if (!(a.cfg.sigma > 0.0))
    throw std::runtime_error("config: sigma must be positive");
  if (!(a.cfg.alpha > 0.0 && a.cfg.alpha < 1.0))
    throw std::runtime_error("config: alpha must lie strictly in (0,1)");
  for (const std::string& d : {a.discretizer})
    if (d != "nearest" && d != "randomized")
      throw std::runtime_error("config: discretizer must be nearest or randomized");
  for (const std::string& w : {a.warm, a.timing})
    if (w != "on" && w != "off")
      throw std::runtime_error("config: warm-start and timing must be on or off");
}

int run_simulate(const CLI::App* sc, SimulateArgs& a) {
  if (!a.config_path.empty()) apply_config_file(sc, a);
  a.cfg.methods.clear();
  for (const std::string& name : a.method_names) {
    const dcp::Method m = dcp::parse_method(name);
    if (std::find(a.cfg.methods.begin(), a.cfg.methods.end(), m) == a.cfg.methods.end())
      a.cfg.methods.push_back(m);
  }
  a.cfg.rounding = a.discretizer == "randomized" ? dcp::RoundingMode::kRandomized
                                                 : dcp::RoundingMode::kNearest;
  a.cfg.warm_start = a.warm == "on";
  a.cfg.measure_time = a.timing == "on";
  a.cfg.validate();

  const dcp::ExperimentResult result = dcp::run_experiment(a.cfg);

  namespace fs = std::filesystem;
  fs::create_directories(a.out_dir);
  const fs::path out(a.out_dir);
  {
    std::ofstream f(out / "results.csv");
    if (!f) throw std::runtime_error("could not write " + (out / "results.csv").string());
    dcp::write_summary_csv(f, result, a.cfg);
  }
  if (a.per_trial) {
    std::ofstream f(out / "trials.csv");
    if (!f) throw std::runtime_error("could not write " + (out / "trials.csv").string());
    dcp::write_trials_csv(f, result);
  }
  if (a.plot) {
    std::vector<std::string> ticks;
    for (int g : a.cfg.grid_sizes) ticks.push_back(std::to_string(g));
    std::vector<dcp::PlotSeries> cov, len;
    for (dcp::Method m : dcp::all_methods()) {
      if (std::find(a.cfg.methods.begin(), a.cfg.methods.end(), m) == a.cfg.methods.end())
        continue;
      dcp::PlotSeries c{dcp::method_name(m), {}, {}};
      dcp::PlotSeries l{dcp::method_name(m), {}, {}};
      for (int g : a.cfg.grid_sizes)
        for (const dcp::SummaryRow& row : result.summary)
          if (row.method == m && row.grid_size == g) {
            c.values.push_back(row.coverage);
            c.errors.push_back(row.coverage_se);
            l.values.push_back(row.mean_length);
            l.errors.push_back(row.length_se);
          }
      cov.push_back(std::move(c));
      len.push_back(std::move(l));
    }
    {
      std::ofstream f(out / "coverage.svg");
      dcp::write_errorbar_svg(f, "empirical coverage", "coverage", ticks, cov,
                              1.0 - a.cfg.alpha);
    }
    {
      std::ofstream f(out / "length.svg");
      dcp::write_errorbar_svg(f, "mean interval length", "length", ticks, len);
    }
  }

  std::cout << "wrote " << (out / "results.csv").string() << " (" << result.summary.size()
            << " rows, " << a.cfg.trials << " trials)\n";
  if (result.failed_records > 0)
    std::cerr << "warning: " << result.failed_records
              << " method runs failed and were excluded; rerun with --per-trial for details\n";
  return 0;
}

struct PredictArgs {
  std::string train_path;
  std::string x_text;
  std::string method = "cpdm";
  double alpha = 0.1;
  int grid_size = 40;
  std::uint64_t seed = 1;
  std::string discretizer = "nearest";
  double lambda = -1.0;  // negative = plug-in default
  bool as_json = false;
};

void add_predict(CLI::App& app, PredictArgs& a) {
  CLI::App* sc = app.add_subcommand("predict", "prediction set for one test point");
  sc->add_option("--train", a.train_path, "training csv with header x1,...,xp,y")->required();
  sc->add_option("--x", a.x_text, "test covariates: comma list or csv file")->required();
  sc->add_option("--method", a.method, "prediction method")
      ->check(CLI::IsMember({"approximate", "cpdd", "cpdm", "split"}))
      ->capture_default_str();
  sc->add_option("--alpha", a.alpha, "target miscoverage")
      ->check(strict_unit_interval())
      ->capture_default_str();
  sc->add_option("--M", a.grid_size, "grid size")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sc->add_option("--seed", a.seed, "seed for rounding and the split")->capture_default_str();
  sc->add_option("--discretizer", a.discretizer, "rounding scheme")
      ->check(CLI::IsMember({"nearest", "randomized"}))
      ->capture_default_str();
  sc->add_option("--lambda", a.lambda, "Lasso penalty (default sd(y)*sqrt(log(p)/(2n)))");
  sc->add_flag("--json", a.as_json, "print the result as JSON");
}

int run_predict(const PredictArgs& a) {
  std::ifstream train_file(a.train_path);
  if (!train_file) throw std::runtime_error("could not open " + a.train_path);
  const dcp::Dataset train = dcp::read_training_csv(train_file);

  Eigen::VectorXd x_new;
  if (std::filesystem::exists(a.x_text)) {
    std::ifstream xf(a.x_text);
    if (!xf) throw std::runtime_error("could not open " + a.x_text);
    x_new = dcp::read_covariates_csv(xf);
  } else {
    const std::vector<double> vals = dcp::parse_double_list(a.x_text);
    x_new = Eigen::Map<const Eigen::VectorXd>(vals.data(),
                                              static_cast<Eigen::Index>(vals.size()));
  }
  if (x_new.size() != train.p())
    throw std::runtime_error("dimension mismatch: training data has p = " +
                             std::to_string(train.p()) + " but --x has " +
                             std::to_string(x_new.size()) + " values");

  dcp::FitterSpec fitter;
  fitter.kind = dcp::FitterKind::kLasso;
  if (a.lambda >= 0.0) {
    fitter.lambda = a.lambda;
  } else {
    const auto n = static_cast<double>(train.n());
    const double mean = train.responses.mean();
    const double sd = train.n() > 1
                          ? std::sqrt((train.responses.array() - mean).square().sum() / (n - 1.0))
                          : 1.0;
    fitter.lambda = sd * std::sqrt(std::log(static_cast<double>(train.p())) / (2.0 * n));
  }

  dcp::PredictionSet set;
  if (a.method == "split") {
    set = dcp::split_conformal(train, x_new, a.alpha, fitter, a.seed);
  } else {
    const dcp::RoundingMode mode = a.discretizer == "randomized"
                                       ? dcp::RoundingMode::kRandomized
                                       : dcp::RoundingMode::kNearest;
    const dcp::GridSetup gs =
        dcp::data_range_grid(train.responses, a.grid_size, mode, a.seed);
    dcp::ConformalConfig cc(a.alpha, fitter, gs.discretizer);
    if (a.method == "approximate")
      set = dcp::approximate_conformal(train, x_new, cc);
    else if (a.method == "cpdd")
      set = dcp::cpdd(train, x_new, cc);
    else
      set = dcp::cpdm(train, x_new, cc);
  }
  const dcp::PredictionSet hull = set.hull();

  if (a.as_json) {
    json doc;
    doc["intervals"] = json::array();
    for (const dcp::Interval& iv : set.intervals())
      doc["intervals"].push_back(json::array({endpoint_json(iv.lo), endpoint_json(iv.hi)}));
    if (hull.empty())
      doc["hull"] = nullptr;
    else
      doc["hull"] = json::array({endpoint_json(hull.intervals()[0].lo),
                                 endpoint_json(hull.intervals()[0].hi)});
    doc["method"] = a.method;
    doc["alpha"] = a.alpha;
    std::cout << doc.dump() << "\n";
    return 0;
  }

  std::cout << "method: " << a.method << "  alpha: " << dcp::format_double(a.alpha, "%.4g")
            << "\n";
  if (set.empty()) {
    std::cout << "intervals: (empty)\nhull: (empty)\n";
    return 0;
  }
  std::cout << "intervals:";
  for (const dcp::Interval& iv : set.intervals()) std::cout << ' ' << format_interval(iv);
  std::cout << "\nhull: " << format_interval(hull.intervals()[0]) << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"discretized conformal prediction toolkit"};
  app.require_subcommand(1);
  SimulateArgs sim;
  PredictArgs pred;
  const CLI::App* sim_cmd = add_simulate(app, sim);
  add_predict(app, pred);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand("simulate")) return run_simulate(sim_cmd, sim);
    return run_predict(pred);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
