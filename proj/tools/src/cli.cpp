#include "mkme_cli/cli.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>

#include "mkme/density.hpp"
#include "mkme/errors.hpp"
#include "mkme/estimators.hpp"
#include "mkme/hsic.hpp"
#include "mkme/kernels.hpp"
#include "mkme/mmd.hpp"
#include "mkme/rng.hpp"
#include "mkme/synth.hpp"

#ifndef MKME_VERSION
#define MKME_VERSION "unknown"
#endif

namespace mkme::cli {
namespace {

using json = nlohmann::json;

std::vector<std::string> split_cells(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::optional<double> parse_number(const std::string& cell) {
  const std::string t = trim(cell);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

// CSV with 17 significant digits so identical runs are byte-identical.
class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path) : os_(path) {
    if (!os_) throw std::runtime_error("cannot write " + path.string());
    os_ << std::setprecision(17);
  }

  template <typename... Ts>
  void row(const Ts&... cells) {
    std::size_t k = 0;
    ((os_ << (k++ ? "," : "") << cells), ...);
    os_ << '\n';
  }

 private:
  std::ofstream os_;
};

struct Common {
  std::uint64_t seed = 0;
  std::string out = "out";
  std::string estimators = "kme,skmse,fkmse,mkme,mmkme";
};

struct InputOpts {
  std::string path;
  bool header = false;
  std::optional<std::size_t> label_col;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--seed", c.seed, "Master seed")->capture_default_str();
  sub->add_option("--out", c.out, "Output directory")->capture_default_str();
  sub->add_option("--estimators", c.estimators, "Comma-separated estimator list")->capture_default_str();
}

void add_input(CLI::App* sub, InputOpts& in, const std::string& flag, bool required) {
  auto* o = sub->add_option(flag, in.path, "Input CSV")->check(CLI::ExistingFile);
  if (required) o->required();
  sub->add_flag("--header", in.header, "Input has a header row");
  sub->add_option("--label-col", in.label_col, "Zero-based label column to split off");
}

std::vector<EstimatorKind> estimators_or_usage(const std::string& list) {
  try {
    auto ks = parse_estimator_list(list);
    for (const auto& k : ks) k.validate();
    return ks;
  } catch (const InputError& e) {
    throw UsageError(std::string("--estimators: ") + e.what());
  }
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw UsageError(msg);
}

template <typename T>
json to_json_list(const std::vector<T>& v) {
  json j = json::array();
  for (const auto& x : v) j.push_back(x);
  return j;
}

}  // namespace

Dataset load_csv(const std::filesystem::path& path, bool has_header, std::optional<std::size_t> label_col) {
  std::ifstream is(path);
  if (!is) throw InputError("cannot open " + path.string());
  Dataset ds;
  ds.name = path.filename().string();
  ds.label_col = label_col;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  std::size_t width = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (has_header && line_no == 1) continue;
    if (trim(line).empty()) continue;
    const auto cells = split_cells(line);
    if (width == 0) {
      width = cells.size();
    } else if (cells.size() != width) {
      throw InputError(path.string() + ": line " + std::to_string(line_no) + " has " +
                       std::to_string(cells.size()) + " cells, expected " + std::to_string(width));
    }
    std::vector<double> values;
    values.reserve(cells.size());
    for (std::size_t j = 0; j < cells.size(); ++j) {
      const auto v = parse_number(cells[j]);
      if (!v) {
        throw InputError(path.string() + ": line " + std::to_string(line_no) + " column " + std::to_string(j + 1) +
                         " is not a finite number: '" + trim(cells[j]) + "'");
      }
      values.push_back(*v);
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) throw InputError(path.string() + ": no data rows");
  if (label_col && *label_col >= width) {
    throw InputError(path.string() + ": label column " + std::to_string(*label_col) + " out of range for " +
                     std::to_string(width) + " columns");
  }
  const std::size_t d = width - (label_col ? 1 : 0);
  if (d == 0) throw InputError(path.string() + ": no feature columns");
  ds.matrix.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::size_t k = 0;
    for (std::size_t j = 0; j < width; ++j) {
      if (label_col && j == *label_col) {
        ds.labels.push_back(rows[i][j]);
      } else {
        ds.matrix(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k++)) = rows[i][j];
      }
    }
  }
  return ds;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Marginalized kernel mean estimation experiments", "mkme"};
  app.set_config("--config", "", "Key-value config file; flags override it");
  app.require_subcommand(1, 1);

  Common common;
  InputOpts input;

  // estimate
  auto* estimate = app.add_subcommand("estimate", "Fit estimators to a CSV sample");
  add_common(estimate, common);
  add_input(estimate, input, "--input", true);
  std::optional<double> theta2;
  estimate->add_option("--theta2", theta2, "Kernel bandwidth theta^2 (default: median heuristic)")
      ->check(CLI::PositiveNumber);

  // synth-gauss
  auto* synth_gauss = app.add_subcommand("synth-gauss", "Risk of estimators on random Gaussian mixtures");
  add_common(synth_gauss, common);
  std::vector<std::size_t> dims{5};
  std::vector<std::size_t> ns{50};
  std::size_t copies = 30;
  std::vector<double> sigma2_grid;
  synth_gauss->add_option("--d", dims, "Dimensions")->delimiter(',')->capture_default_str();
  synth_gauss->add_option("--n", ns, "Sample sizes")->delimiter(',')->capture_default_str();
  synth_gauss->add_option("--copies", copies, "Independent distributions per cell")->capture_default_str();
  synth_gauss->add_option("--sigma2-grid", sigma2_grid,
                          "Sweep fixed isotropic corruption instead of fitting estimators")
      ->delimiter(',');

  // synth-t
  auto* synth_t = app.add_subcommand("synth-t", "Density estimation on multivariate t data");
  add_common(synth_t, common);
  double df = 3.0;
  std::size_t test_size = 1000;
  DensityOptions dens;
  synth_t->add_option("--d", dims, "Dimensions")->delimiter(',')->capture_default_str();
  synth_t->add_option("--n", ns, "Training sizes")->delimiter(',')->capture_default_str();
  synth_t->add_option("--copies", copies, "Independent distributions per cell")->capture_default_str();
  synth_t->add_option("--df", df, "Degrees of freedom")->capture_default_str();
  synth_t->add_option("--test-size", test_size, "Test points per distribution")->capture_default_str();
  synth_t->add_option("--prototypes", dens.prototypes, "Mixture prototypes")->capture_default_str();
  synth_t->add_option("--bw-grid", dens.bw_grid, "Bandwidth multipliers of the median heuristic")
      ->delimiter(',');

  // two-sample
  auto* two_sample = app.add_subcommand("two-sample", "Permutation two-sample test or power curve");
  add_common(two_sample, common);
  InputOpts input_b;
  std::size_t perms = 1000;
  double alpha = 0.05;
  std::size_t trials = 500;
  std::size_t power_n = 50;
  std::string generator = "mog-pair";
  double shift = 1.0;
  two_sample->add_option("--a", input.path, "First sample CSV")->check(CLI::ExistingFile);
  two_sample->add_option("--b", input_b.path, "Second sample CSV")->check(CLI::ExistingFile);
  two_sample->add_flag("--header", input.header, "Input files have a header row");
  two_sample->add_option("--perms", perms, "Permutations")->capture_default_str();
  two_sample->add_option("--alpha", alpha, "Significance level")->capture_default_str();
  two_sample->add_option("--d", dims, "Power mode: dimensions")->delimiter(',');
  two_sample->add_option("--n", power_n, "Power mode: points per sample")->capture_default_str();
  two_sample->add_option("--trials", trials, "Power mode: trials")->capture_default_str();
  two_sample->add_option("--generator", generator, "Power mode: mog-pair, mog-same or gauss-shift")
      ->check(CLI::IsMember({"mog-pair", "mog-same", "gauss-shift"}))
      ->capture_default_str();
  two_sample->add_option("--shift", shift, "gauss-shift: mean offset of the second sample")->capture_default_str();

  // hsic
  auto* hsic = app.add_subcommand("hsic", "HSIC permutation independence test or power study");
  add_common(hsic, common);
  add_input(hsic, input, "--input", true);
  std::size_t x_cols = 1;
  std::vector<double> etas;
  std::vector<double> alphas;
  std::size_t reps = 200;
  std::size_t hsic_perms = 2000;
  hsic->add_option("--x-cols", x_cols, "Leading feature columns forming X; the rest form Y")->capture_default_str();
  hsic->add_option("--perms", hsic_perms, "Permutations")->capture_default_str();
  hsic->add_option("--alpha", alphas, "Significance level(s)")->delimiter(',');
  hsic->add_option("--eta", etas, "Power mode: subsample fractions")->delimiter(',');
  hsic->add_option("--reps", reps, "Power mode: repetitions")->capture_default_str();

  // kde
  auto* kde = app.add_subcommand("kde", "Kernel density estimation by kernel mean matching");
  add_common(kde, common);
  add_input(kde, input, "--input", true);
  double test_fraction = 0.3;
  kde->add_option("--test-fraction", test_fraction, "Held-out fraction")->capture_default_str();
  kde->add_option("--prototypes", dens.prototypes, "Mixture prototypes")->capture_default_str();
  kde->add_option("--bw-grid", dens.bw_grid, "Bandwidth multipliers of the median heuristic")->delimiter(',');
  kde->add_option("--kmeans-iters", dens.kmeans_iters, "Lloyd iterations")->capture_default_str();

  try {
    // --config belongs to the top-level app; accept it after the subcommand too.
    std::vector<std::string> ordered;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < args.size(); ++i) {
      if (args[i] == "--config" && i + 1 < args.size()) {
        ordered.push_back(args[i]);
        ordered.push_back(args[++i]);
      } else if (args[i].rfind("--config=", 0) == 0) {
        ordered.push_back(args[i]);
      } else {
        rest.push_back(args[i]);
      }
    }
    ordered.insert(ordered.end(), rest.begin(), rest.end());
    std::vector<std::string> rev(ordered.rbegin(), ordered.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "mkme: " << e.what() << "\n";
    return 2;
  }

  const auto started = std::chrono::steady_clock::now();
  CLI::App* cmd = app.get_subcommands().front();
  const std::string name = cmd->get_name();
  json manifest;
  manifest["command"] = name;
  manifest["args"] = args;
  manifest["config"] = "[" + name + "]\n" + cmd->config_to_str(true, false);
  manifest["seed"] = common.seed;
  manifest["version"] = MKME_VERSION;
  manifest["eigen_version"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                              std::to_string(EIGEN_MINOR_VERSION);

  try {
    const auto kinds = estimators_or_usage(common.estimators);
    const std::filesystem::path dir(common.out);

    // Validation of every numeric field happens before any computation.
    if (name == "synth-gauss" || name == "synth-t") {
      require(!dims.empty() && std::all_of(dims.begin(), dims.end(), [](auto d) { return d >= 1; }),
              "--d: dimensions must be at least 1");
      require(!ns.empty() && std::all_of(ns.begin(), ns.end(), [](auto n) { return n >= 3; }),
              "--n: sample sizes must be at least 3");
      require(copies >= 1, "--copies must be at least 1");
      for (double s : sigma2_grid) require(s >= 0.0 && std::isfinite(s), "--sigma2-grid: values must be >= 0");
    }
    if (name == "synth-t") {
      require(df > 0.0 && std::isfinite(df), "--df must be positive");
      require(test_size >= 1, "--test-size must be at least 1");
    }
    if (name == "synth-t" || name == "kde") {
      require(dens.prototypes >= 1, "--prototypes must be at least 1");
      require(!dens.bw_grid.empty(), "--bw-grid must not be empty");
      for (double m : dens.bw_grid) require(m > 0.0 && std::isfinite(m), "--bw-grid: multipliers must be positive");
    }
    if (name == "kde") require(test_fraction > 0.0 && test_fraction < 1.0, "--test-fraction must lie in (0, 1)");
    if (name == "two-sample") {
      require(perms >= 1, "--perms must be at least 1");
      require(alpha > 0.0 && alpha < 1.0, "--alpha must lie in (0, 1)");
      const bool file_mode = !input.path.empty() || !input_b.path.empty();
      if (file_mode) {
        require(!input.path.empty() && !input_b.path.empty(), "two-sample: --a and --b must be given together");
      } else {
        require(!dims.empty(), "--d: dimensions required");
        for (auto d : dims) require(d >= 1, "--d: dimensions must be at least 1");
        require(power_n >= 3, "--n must be at least 3");
        require(trials >= 1, "--trials must be at least 1");
        require(std::isfinite(shift), "--shift must be finite");
      }
    }
    if (name == "hsic") {
      require(hsic_perms >= 1, "--perms must be at least 1");
      if (alphas.empty()) alphas = {0.05};
      for (double a : alphas) require(a > 0.0 && a < 1.0, "--alpha must lie in (0, 1)");
      for (double e : etas) require(e > 0.0 && e <= 1.0, "--eta: fractions must lie in (0, 1]");
      require(reps >= 1, "--reps must be at least 1");
      require(x_cols >= 1, "--x-cols must be at least 1");
      for (const auto& k : kinds)
        require(!k.is_linear(), "hsic: linear estimators are not supported (" + k.name() + ")");
    }

    std::filesystem::create_directories(dir);
    CsvWriter csv(dir / "results.csv");
    json results = json::array();

    if (name == "estimate") {
      const Dataset ds = load_csv(input.path, input.header, input.label_col);
      const Bandwidth bw = theta2 ? Bandwidth(*theta2) : median_heuristic(ds.matrix);
      csv.row("estimator", "n", "d", "theta2", "lambda", "selected_corruption", "beta_sum", "norm2");
      for (const auto& k : kinds) {
        const EstimatorParams p = select_params(ds.matrix, bw, k);
        const MeanEstimate est = fit_with_params(ds.matrix, bw, p);
        csv.row(k.name(), est.size(), est.dim(), bw.theta2(), p.lambda, p.cov.describe(), est.beta.sum(),
                inner_product(est, est));
      }
    } else if (name == "synth-gauss") {
      if (!sigma2_grid.empty()) {
        csv.row("d", "n", "sigma2", "copies", "mean_loss", "stderr");
        for (auto d : dims)
          for (auto n : ns)
            for (const auto& r : covariance_sweep(d, n, sigma2_grid, copies, derive_seed(common.seed, "synth-gauss")))
              csv.row(d, n, r.sigma2, copies, r.report.mean, r.report.std_error);
      } else {
        csv.row("d", "n", "estimator", "copies", "mean_loss", "stderr");
        for (const auto& r : risk_experiment(dims, ns, kinds, copies, derive_seed(common.seed, "synth-gauss")))
          csv.row(r.d, r.n, r.estimator, copies, r.report.mean, r.report.std_error);
      }
    } else if (name == "synth-t") {
      csv.row("d", "n", "estimator", "copies", "mean_nll", "stderr");
      for (const auto& r :
           t_nll_experiment(dims, ns, kinds, df, copies, test_size, dens, derive_seed(common.seed, "synth-t")))
        csv.row(r.d, r.n, r.estimator, copies, r.report.mean, r.report.std_error);
    } else if (name == "two-sample") {
      if (!input.path.empty()) {
        const Dataset a = load_csv(input.path, input.header);
        const Dataset b = load_csv(input_b.path, input.header);
        if (a.matrix.cols() != b.matrix.cols()) throw InputError("two-sample: samples have different dimensions");
        const Bandwidth bw = pooled_bandwidth(a.matrix, b.matrix);
        csv.row("estimator", "statistic", "p_value", "rejected", "alpha", "perms");
        for (const auto& k : kinds) {
          TwoSampleOptions o;
          o.permutations = perms;
          o.alpha = alpha;
          o.seed = derive_seed(common.seed, "two-sample");
          const TestResult r = two_sample_test(a.matrix, b.matrix, bw, k, o);
          csv.row(k.name(), r.statistic, r.p_value, r.rejected ? 1 : 0, r.alpha, perms);
          results.push_back({{"estimator", k.name()},
                             {"statistic", r.statistic},
                             {"p_value", r.p_value},
                             {"rejected", r.rejected},
                             {"alpha", r.alpha},
                             {"theta2", bw.theta2()}});
        }
      } else {
        const std::uint64_t gen_seed = derive_seed(common.seed, "two-sample-generator");
        auto mog = [gen_seed](std::string_view which) {
          return [gen_seed, which](std::size_t d, std::size_t n, Rng& rng) {
            return sample_mog(sample_mog_spec(d, derive_seed(gen_seed, which, d)), n, rng());
          };
        };
        auto gauss = [](double offset) {
          return [offset](std::size_t d, std::size_t n, Rng& rng) {
            std::normal_distribution<double> normal(0.0, 1.0);
            DataMatrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d));
            for (Eigen::Index i = 0; i < m.rows(); ++i)
              for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = normal(rng) + (j == 0 ? offset : 0.0);
            return m;
          };
        };
        SampleGenerator g1;
        SampleGenerator g2;
        if (generator == "gauss-shift") {
          g1 = gauss(0.0);
          g2 = gauss(shift);
        } else {
          g1 = mog("spec-a");
          g2 = generator == "mog-pair" ? SampleGenerator(mog("spec-b")) : g1;
        }
        PowerOptions o;
        o.n = power_n;
        o.trials = trials;
        o.permutations = perms;
        o.alpha = alpha;
        o.seed = derive_seed(common.seed, "two-sample");
        csv.row("d", "estimator", "power", "trials");
        for (const auto& r : power_curve(g1, g2, dims, kinds, o)) {
          csv.row(r.dim, r.estimator, r.power, r.trials);
          results.push_back({{"d", r.dim}, {"estimator", r.estimator}, {"power", r.power}, {"trials", r.trials}});
        }
      }
    } else if (name == "hsic") {
      const Dataset ds = load_csv(input.path, input.header, input.label_col);
      const auto d = static_cast<std::size_t>(ds.matrix.cols());
      if (x_cols >= d) throw UsageError("--x-cols must leave at least one column for Y");
      const auto xc = static_cast<Eigen::Index>(x_cols);
      const PairedSample p(ds.matrix.leftCols(xc), ds.matrix.rightCols(ds.matrix.cols() - xc));
      if (!etas.empty()) {
        HsicPowerOptions o;
        o.etas = etas;
        o.alphas = alphas;
        o.repetitions = reps;
        o.permutations = hsic_perms;
        o.seed = derive_seed(common.seed, "hsic");
        csv.row("alpha", "eta", "estimator", "power", "repetitions");
        for (const auto& r : power_study(p, kinds, o)) csv.row(r.alpha, r.eta, r.estimator, r.power, r.repetitions);
      } else {
        csv.row("estimator", "statistic", "p_value", "rejected", "alpha", "perms");
        for (const auto& k : kinds) {
          for (double a : alphas) {
            IndependenceOptions o;
            o.permutations = hsic_perms;
            o.alpha = a;
            o.seed = derive_seed(common.seed, "hsic");
            const TestResult r = independence_test(p, k, o);
            csv.row(k.name(), r.statistic, r.p_value, r.rejected ? 1 : 0, a, hsic_perms);
          }
        }
      }
    } else if (name == "kde") {
      const Dataset ds = load_csv(input.path, input.header, input.label_col);
      csv.row("estimator", "train_size", "test_size", "multiplier", "theta2", "test_nll");
      for (const auto& k : kinds) {
        const KdeResult r = kde_pipeline(ds.matrix, k, test_fraction, dens, derive_seed(common.seed, "kde"));
        csv.row(k.name(), r.train_size, r.test_size, r.fit.multiplier, r.fit.bandwidth.theta2(), r.test_nll);
      }
    }

    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    manifest["wall_time_seconds"] = secs;
    manifest["estimators"] = to_json_list(std::vector<std::string>([&] {
      std::vector<std::string> v;
      for (const auto& k : kinds) v.push_back(k.name());
      return v;
    }()));
    if (!results.empty()) manifest["results"] = results;
    std::ofstream mf(dir / "manifest.json");
    if (!mf) throw std::runtime_error("cannot write " + (dir / "manifest.json").string());
    mf << manifest.dump(2) << "\n";
    out << "wrote " << (dir / "results.csv").string() << "\n";
    return 0;
  } catch (const UsageError& e) {
    err << "mkme " << name << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "mkme " << name << ": " << e.what() << "\n";
    return 1;
  }
}

}  // namespace mkme::cli
