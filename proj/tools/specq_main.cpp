// Command line front end: load/timeout diagnostics, L(tau) curves, scheme
// sweeps, response-prediction comparisons, and fluid drain experiments.
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "specq/harness.hpp"

namespace {

using namespace specq;

double parse_number(const std::string& raw) {
  const auto first = raw.find_first_not_of(" \t");
  const auto last = raw.find_last_not_of(" \t");
  if (first == std::string::npos)
    throw std::invalid_argument("invalid number: '" + raw + "'");
  const std::string tok = raw.substr(first, last - first + 1);
  std::size_t used = 0;
  double v = 0;
  try {
    v = std::stod(tok, &used);
  } catch (const std::exception&) {
    throw std::invalid_argument("invalid number: '" + tok + "'");
  }
  if (used != tok.size())
    throw std::invalid_argument("invalid number: '" + tok + "'");
  return v;
}

std::vector<double> split_numbers(const std::string& text) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = text.find(',', pos);
    out.push_back(parse_number(
        text.substr(pos, comma == std::string::npos ? comma : comma - pos)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

// "log:lo:hi:n" or "lin:lo:hi:n" spacing, or an explicit comma list.
std::vector<double> parse_grid(const std::string& text) {
  const bool log_form = text.rfind("log:", 0) == 0;
  const bool lin_form = text.rfind("lin:", 0) == 0;
  if (!log_form && !lin_form) return split_numbers(text);

  std::vector<std::string> parts;
  std::stringstream ss(text);
  for (std::string part; std::getline(ss, part, ':');) parts.push_back(part);
  if (parts.size() != 4)
    throw std::invalid_argument("grid spec needs lo:hi:count after '" +
                                parts[0] + ":'");
  const double lo = parse_number(parts[1]);
  const double hi = parse_number(parts[2]);
  const int n = static_cast<int>(parse_number(parts[3]));
  if (n < 2 || hi <= lo || (log_form && lo <= 0))
    throw std::invalid_argument("grid spec needs 0 < lo < hi and count >= 2");
  std::vector<double> out(n);
  for (int k = 0; k < n; ++k) {
    const double f = static_cast<double>(k) / (n - 1);
    out[k] = log_form ? lo * std::pow(hi / lo, f) : lo + f * (hi - lo);
  }
  return out;
}

std::vector<Scheme> parse_scheme_list(const std::string& text) {
  std::vector<Scheme> out;
  std::size_t pos = 0;
  while (true) {
    const auto comma = text.find(',', pos);
    out.push_back(parse_scheme_label(
        text.substr(pos, comma == std::string::npos ? comma : comma - pos)));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

std::string plot_path_for(const std::string& csv_path) {
  if (csv_path.size() > 4 &&
      csv_path.compare(csv_path.size() - 4, 4, ".csv") == 0)
    return csv_path.substr(0, csv_path.size() - 4) + ".py";
  return csv_path + ".py";
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write file: " + path);
  out << text;
}

// Applies --tau to a spec: a number (or "inf") pins the timeout, "auto"
// re-enables the solver.
void apply_tau(ExperimentSpec& spec, const std::string& text) {
  if (text == "auto") {
    spec.auto_tau = true;
    return;
  }
  spec.auto_tau = false;
  spec.tau = parse_number(text);
  if (spec.tau <= 0) throw std::invalid_argument("timeout must be positive");
}

struct CliOptions {
  std::string model_file;
  std::string spec_file;
  std::string out;
  std::string tau = "auto";
  std::string grid;
  std::string schemes;
  double lambda = 1.0;
  double lambda_e = 0.5;
  double lo = 0;
  double hi = 0;
  double horizon = 0;
  double step = 0;
  int n_queues = 0;
  int reps = 0;
  std::uint64_t jobs = 0;
  std::uint64_t seed = 0;
  bool have_seed = false;
};

ExperimentSpec assemble_spec(const CLI::App* sub, const CliOptions& opt,
                             bool allow_schemes) {
  ExperimentSpec spec;
  if (!opt.spec_file.empty()) {
    spec = load_experiment(opt.spec_file);
    if (!opt.model_file.empty()) spec.model = load_model(opt.model_file);
  } else if (!opt.model_file.empty()) {
    spec.model = load_model(opt.model_file);
    spec.schemes = {Scheme::speculative()};
    spec.lambda_grid.clear();
  } else {
    throw std::invalid_argument("pass --spec-file or --model-file");
  }
  if (sub->count("--grid")) spec.lambda_grid = parse_grid(opt.grid);
  if (allow_schemes && sub->count("--schemes"))
    spec.schemes = parse_scheme_list(opt.schemes);
  if (sub->count("--tau")) apply_tau(spec, opt.tau);
  if (sub->count("--n-queues")) spec.n_queues = opt.n_queues;
  if (sub->count("--jobs")) spec.n_jobs = opt.jobs;
  if (sub->count("--reps")) spec.replications = opt.reps;
  if (opt.have_seed) spec.seed = opt.seed;
  if (spec.lambda_grid.empty())
    throw std::invalid_argument(
        "empty load grid; pass --grid or a spec file with lambda_grid");
  if (spec.n_queues < 1 || spec.replications < 1)
    throw std::invalid_argument("need at least one queue and one replication");
  return spec;
}

void add_model_option(CLI::App* sub, CliOptions& opt, bool required) {
  auto* o = sub->add_option("--model-file,--model", opt.model_file,
                            "model JSON file");
  if (required) o->required();
}

int run_cli(int argc, char** argv) {
  CLI::App app{
      "queueing toolkit for timeout-and-reroute dispatch: exact load and "
      "response formulas, discrete-event simulation, and fluid-limit drain "
      "checks"};
  app.require_subcommand(1);
  CliOptions opt;

  auto* load_cmd = app.add_subcommand(
      "load", "per-unit-rate load and stability report at a fixed timeout");
  add_model_option(load_cmd, opt, true);
  load_cmd->add_option("--tau", opt.tau, "kill timeout (number or 'inf')")
      ->required();
  load_cmd->callback([&] {
    const SXModel model = load_model(opt.model_file);
    const double tau = parse_number(opt.tau);
    print_load_report(std::cout, make_load_report(model, tau));
  });

  auto* timeout_cmd = app.add_subcommand(
      "timeout", "solve for the load-minimizing kill timeout");
  add_model_option(timeout_cmd, opt, true);
  timeout_cmd->add_option("--lambda", opt.lambda, "arrival intensity")
      ->default_val(1.0);
  timeout_cmd->add_option("--lo", opt.lo, "search interval lower end");
  timeout_cmd->add_option("--hi", opt.hi, "search interval upper end");
  timeout_cmd->callback([&] {
    const SXModel model = load_model(opt.model_file);
    const bool have_interval =
        timeout_cmd->count("--lo") && timeout_cmd->count("--hi");
    const TimeoutSolution sol =
        have_interval ? optimal_timeout(model, opt.lambda, opt.lo, opt.hi)
                      : optimal_timeout(model, opt.lambda);
    print_timeout_solution(std::cout, sol);
  });

  auto* lcurve_cmd = app.add_subcommand(
      "lcurve", "CSV of the load-reduction factor over a timeout grid");
  add_model_option(lcurve_cmd, opt, true);
  lcurve_cmd
      ->add_option("--grid", opt.grid,
                   "timeout grid: comma list, log:lo:hi:n, or lin:lo:hi:n")
      ->default_val("log:0.1:1000:50");
  lcurve_cmd->add_option("--out", opt.out, "CSV path (stdout when omitted)");
  lcurve_cmd->callback([&] {
    const SXModel model = load_model(opt.model_file);
    const auto grid = parse_grid(opt.grid);
    if (opt.out.empty()) {
      write_lcurve_csv(std::cout, model, grid);
    } else {
      std::ofstream file(opt.out);
      if (!file) throw std::invalid_argument("cannot write file: " + opt.out);
      write_lcurve_csv(file, model, grid);
    }
  });

  auto add_sweep_options = [&](CLI::App* sub, bool with_schemes) {
    add_model_option(sub, opt, false);
    sub->add_option("--spec-file", opt.spec_file, "experiment JSON file");
    sub->add_option("--grid", opt.grid,
                    "offered-load grid (comma list, log:/lin: forms)");
    if (with_schemes)
      sub->add_option("--schemes", opt.schemes,
                      "comma list of scheme labels, e.g. slb,rnd,coc-2");
    sub->add_option("--tau", opt.tau, "kill timeout: number, 'inf', or 'auto'");
    sub->add_option("--n-queues,--n", opt.n_queues, "number of queues");
    sub->add_option("--jobs", opt.jobs, "arrivals per replication");
    sub->add_option("--reps", opt.reps, "replications per point");
    sub->add_option("--seed", opt.seed, "base seed")
        ->each([&](const std::string&) { opt.have_seed = true; });
    sub->add_option("--out", opt.out,
                    "CSV path; also writes a companion .py plot script");
  };

  auto* sweep_cmd = app.add_subcommand(
      "sweep", "simulate schemes over an offered-load grid");
  add_sweep_options(sweep_cmd, true);
  sweep_cmd->callback([&] {
    const ExperimentSpec spec = assemble_spec(sweep_cmd, opt, true);
    const auto rows = run_sweep(spec);
    if (opt.out.empty()) {
      write_sweep_csv(std::cout, rows);
    } else {
      std::ofstream file(opt.out);
      if (!file) throw std::invalid_argument("cannot write file: " + opt.out);
      write_sweep_csv(file, rows);
      write_text_file(plot_path_for(opt.out), plot_script_for_sweep(opt.out));
    }
  });

  auto* conj_cmd = app.add_subcommand(
      "conjecture",
      "simulated vs predicted mean response for the timeout scheme");
  add_sweep_options(conj_cmd, false);
  conj_cmd->callback([&] {
    const ExperimentSpec spec = assemble_spec(conj_cmd, opt, false);
    const auto rows = run_conjecture(spec);
    if (opt.out.empty()) {
      write_conjecture_csv(std::cout, rows);
    } else {
      std::ofstream file(opt.out);
      if (!file) throw std::invalid_argument("cannot write file: " + opt.out);
      write_conjecture_csv(file, rows);
      write_text_file(plot_path_for(opt.out),
                      plot_script_for_conjecture(opt.out));
    }
  });

  auto* fluid_cmd = app.add_subcommand(
      "fluid", "integrate the fluid network and report whether it drains");
  add_model_option(fluid_cmd, opt, true);
  fluid_cmd->add_option("--n-queues,--n", opt.n_queues, "number of queues")
      ->default_val(10);
  fluid_cmd
      ->add_option("--lambda-e", opt.lambda_e,
                   "offered load per queue, lambda * E[first execution]")
      ->default_val(0.5);
  fluid_cmd->add_option("--tau", opt.tau,
                        "kill timeout: number, 'inf', or 'auto'");
  fluid_cmd->add_option("--horizon", opt.horizon,
                        "integration horizon (0 = drain bound)");
  fluid_cmd->add_option("--step", opt.step, "Euler step (0 = automatic)");
  fluid_cmd->add_option("--out", opt.out,
                        "trajectory CSV path (discarded when omitted)");
  fluid_cmd->callback([&] {
    const SXModel model = load_model(opt.model_file);
    const double tau = opt.tau == "auto" ? optimal_timeout(model).tau_star
                                         : parse_number(opt.tau);
    const double lambda = opt.lambda_e / eta1_mean(model);
    const auto cfg =
        make_symmetric_config(opt.n_queues, lambda, model, tau);
    FluidVerdict verdict;
    if (opt.out.empty()) {
      std::ostringstream discard;
      verdict = run_fluid_experiment(discard, cfg, opt.horizon, opt.step);
    } else {
      std::ofstream file(opt.out);
      if (!file) throw std::invalid_argument("cannot write file: " + opt.out);
      verdict = run_fluid_experiment(file, cfg, opt.horizon, opt.step);
    }
    print_fluid_verdict(std::cout, verdict);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run_cli(argc, argv);
  } catch (const std::domain_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;  // well-posed input, but the quantity does not exist
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;  // bad input: files, JSON, flags, malformed grids
  }
}
