#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "optvalue/bootstrap.hpp"
#include "optvalue/dgp.hpp"
#include "optvalue/estimator.hpp"
#include "optvalue/harness.hpp"
#include "optvalue/io.hpp"
#include "optvalue/npmle.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

std::uint64_t default_seed() {
  if (const char* env = std::getenv("OPTVALUE_SEED")) {
    try {
      std::size_t pos = 0;
      const unsigned long long v = std::stoull(env, &pos);
      if (pos == std::string(env).size()) return v;
    } catch (const std::exception&) {
    }
    throw CLI::ValidationError("OPTVALUE_SEED", "must be a non-negative integer");
  }
  return 0;
}

std::vector<optvalue::Method> parse_methods(const std::string& csv) {
  std::vector<optvalue::Method> methods;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) methods.push_back(optvalue::method_from_name(optvalue::io::trim(tok)));
  }
  if (methods.empty()) throw std::invalid_argument("no methods given");
  return methods;
}

std::vector<std::size_t> parse_m_grid(const std::string& csv) {
  std::vector<std::size_t> grid;
  std::stringstream ss(csv);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    const long v = std::stol(optvalue::io::trim(tok));
    if (v < 1) throw std::invalid_argument("m values must be >= 1");
    grid.push_back(static_cast<std::size_t>(v));
  }
  return grid;
}

void print_report(const optvalue::MonteCarloReport& rep) {
  std::printf("dgp %s  n %zu  initial block %zu  replicates %zu  mode %s  truth %.6f\n",
              optvalue::dgp_name(rep.dgp).c_str(), rep.n, rep.ell_n, rep.replicates,
              optvalue::mode_name(rep.mode).c_str(), rep.truth);
  std::printf("%-10s %4s %6s %14s %10s %10s %10s %10s\n", "method", "ok", "failed",
              "cover2 (se)", "cover1", "cover-da", "bias", "width");
  for (const auto& [m, s] : rep.methods) {
    std::printf("%-10s %4zu %6zu %6.4f (%.4f) %10.4f %10.4f %+10.5f %10.5f\n",
                optvalue::method_name(m).c_str(), s.n_ok, s.n_failed, s.coverage_two_sided,
                s.coverage_two_sided_se, s.coverage_lower, s.coverage_da, s.mean_bias,
                s.mean_width);
  }
}

void print_sweep(const optvalue::SweepReport& rep) {
  std::printf("dgp %s  n %zu  replicates %zu  draws %zu\n", optvalue::dgp_name(rep.dgp).c_str(),
              rep.n, rep.replicates, rep.draws);
  std::printf("online baseline: coverage %.4f (%.4f), mean width %.5f\n", rep.online_coverage,
              rep.online_coverage_se, rep.online_mean_width);
  std::printf("%8s %4s %6s %14s %10s %12s %12s\n", "m", "ok", "failed", "coverage (se)",
              "width", "width/online", "fallbacks");
  for (const optvalue::SweepRow& row : rep.rows) {
    std::printf("%8zu %4zu %6zu %6.4f (%.4f) %10.5f %12.3f %12.2f\n", row.m, row.n_ok,
                row.n_failed, row.coverage, row.coverage_se, row.mean_width,
                row.width_ratio_vs_online, row.mean_ill_defined);
  }
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw optvalue::DataError("cannot write '" + path.string() + "'");
  return out;
}

struct EstimateArgs {
  std::string input = "-";
  std::size_t ell = 0;  // 0: n/10 rounded, at least 10
  double alpha = 0.05;
  double sigma_floor = 1e-3;
  std::string learner = "auto";  // auto | npmle | kernel
  std::uint64_t seed = 0;
};

int run_estimate(const EstimateArgs& args) {
  optvalue::Dataset data;
  if (args.input == "-") {
    if (std::cin.peek() == std::char_traits<char>::eof()) {
      throw CLI::ValidationError("--input", "empty input");
    }
    data = optvalue::read_observations(std::cin);
  } else {
    std::ifstream probe(args.input, std::ios::binary);
    if (probe && probe.peek() == std::char_traits<char>::eof()) {
      throw CLI::ValidationError("--input", "empty input");
    }
    data = optvalue::read_observations_file(args.input);
  }
  const std::size_t n = data.size();
  std::string learner_name = args.learner;
  if (learner_name == "auto") {
    learner_name = data.covariate_kind == optvalue::CovariateKind::Discrete ? "npmle" : "kernel";
  }
  optvalue::NuisanceLearner learner;
  if (learner_name == "npmle") {
    if (data.covariate_kind != optvalue::CovariateKind::Discrete) {
      throw CLI::ValidationError("--learner", "npmle requires integer covariates");
    }
    learner = optvalue::npmle_learner();
  } else if (learner_name == "kernel") {
    if (data.covariate_kind != optvalue::CovariateKind::Continuous) {
      throw CLI::ValidationError("--learner", "kernel requires continuous covariates");
    }
    learner = optvalue::kernel_plug_in_learner(optvalue::BandwidthGrid::default_grid());
  } else {
    throw CLI::ValidationError("--learner", "expected auto, npmle, or kernel");
  }
  std::size_t ell = args.ell;
  if (ell == 0) ell = std::max<std::size_t>(10, n / 10);
  if (ell >= n) {
    throw optvalue::DataError("need more than " + std::to_string(ell) +
                              " observations for the initial learning block");
  }
  const optvalue::ChunkSchedule sched = optvalue::build_chunk_schedule(n, ell);
  optvalue::OnlineOptions opts;
  opts.sigma_floor = args.sigma_floor;
  opts.seed = args.seed;
  const optvalue::OnlineValueEstimate est = optvalue::online_one_step(data, sched, learner, opts);
  const optvalue::ConfidenceInterval ci = optvalue::two_sided_ci(est, args.alpha);
  const double lb = optvalue::lower_bound(est, args.alpha);
  std::cout << "n: " << est.n << "\n"
            << "initial_block: " << est.ell_n << "\n"
            << "refit_blocks: " << sched.refit_blocks() << "\n"
            << "learner: " << learner.name << "\n"
            << "estimate: " << optvalue::io::g17(est.psi_hat) << "\n"
            << "se: " << optvalue::io::g17(est.se) << "\n"
            << "ci_" << optvalue::io::g17((1.0 - args.alpha) * 100.0) << "pct: ["
            << optvalue::io::g17(ci.lower) << ", " << optvalue::io::g17(ci.upper) << "]\n"
            << "lower_bound_" << optvalue::io::g17((1.0 - args.alpha) * 100.0)
            << "pct: " << optvalue::io::g17(lb) << "\n";
  return kExitOk;
}

struct SimulateArgs {
  std::string dgp = "d-e";
  std::size_t n = 1000;
  std::size_t ell = 0;  // 0: DGP default (100 discrete, 25 continuous)
  std::size_t reps = 200;
  std::string methods = "online,classical";
  std::string mode = "default";
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::size_t draws = 500;
  std::string out_dir;
};

int run_simulate(const SimulateArgs& args) {
  optvalue::ExperimentConfig cfg;
  cfg.dgp = optvalue::dgp_from_name(args.dgp);
  cfg.n = args.n;
  cfg.ell_n = args.ell ? args.ell
                       : (cfg.dgp == optvalue::DgpKind::DiscreteExceptional ? 100 : 25);
  cfg.replicates = args.reps;
  cfg.methods = parse_methods(args.methods);
  cfg.seed = args.seed;
  cfg.threads = args.threads;
  cfg.bootstrap_draws = args.draws;
  if (args.mode == "fully-estimated") cfg.mode = optvalue::NuisanceMode::FullyEstimated;
  else if (args.mode == "oracle-nuisance") cfg.mode = optvalue::NuisanceMode::OracleNuisance;
  else if (args.mode != "default") {
    throw CLI::ValidationError("--mode", "expected default, fully-estimated, or oracle-nuisance");
  }
  cfg.validate();

  const auto [report, records] = optvalue::run_experiment(cfg);
  if (!args.out_dir.empty()) {
    const std::filesystem::path dir(args.out_dir);
    std::filesystem::create_directories(dir);
    auto summary = open_out(dir / "summary.csv");
    optvalue::write_summary(summary, report);
    auto reps = open_out(dir / "replicates.csv");
    optvalue::write_replicates(reps, cfg, report.truth, records);
  }
  print_report(report);
  return kExitOk;
}

struct SweepArgs {
  std::string dgp = "c-e";
  std::size_t n = 500;
  std::string m_grid;
  std::size_t reps = 100;
  std::size_t draws = 500;
  std::size_t ell = 25;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  bool no_chart = false;
  std::string out_dir;
};

int run_compare_bootstrap(const SweepArgs& args) {
  const optvalue::DgpKind dgp = optvalue::dgp_from_name(args.dgp);
  std::vector<std::size_t> grid =
      args.m_grid.empty() ? optvalue::default_m_grid(args.n) : parse_m_grid(args.m_grid);
  for (std::size_t m : grid) {
    if (m > args.n) throw CLI::ValidationError("--m-grid", "m cannot exceed n");
  }
  const optvalue::SweepReport report = optvalue::bootstrap_sweep(
      dgp, args.n, grid, args.reps, args.draws, 0.05, args.seed, args.ell, 1e-3, args.threads);
  if (!args.out_dir.empty()) {
    const std::filesystem::path dir(args.out_dir);
    std::filesystem::create_directories(dir);
    auto summary = open_out(dir / "summary.csv");
    optvalue::write_sweep_summary(summary, report);
    if (!args.no_chart) {
      auto chart = open_out(dir / "chart.svg");
      optvalue::write_sweep_chart(chart, report);
    }
  }
  print_sweep(report);
  return kExitOk;
}

struct SummarizeArgs {
  std::string input;
  std::string out_dir;
};

int run_summarize(const SummarizeArgs& args) {
  const optvalue::ReplicateFile file = optvalue::read_replicates_file(args.input);
  const optvalue::MonteCarloReport report =
      optvalue::aggregate_records(file.cfg, file.truth, file.records);
  if (!args.out_dir.empty()) {
    const std::filesystem::path dir(args.out_dir);
    std::filesystem::create_directories(dir);
    auto summary = open_out(dir / "summary.csv");
    optvalue::write_summary(summary, report);
  }
  print_report(report);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mean outcome under an estimated treatment rule: online one-step "
               "estimation, simulation harness, and bootstrap comparison"};
  app.require_subcommand(1);

  EstimateArgs est;
  SimulateArgs sim;
  SweepArgs sweep;
  SummarizeArgs summ;
  std::uint64_t seed = 0;

  try {
    seed = default_seed();
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  est.seed = sim.seed = sweep.seed = seed;

  auto* c_est = app.add_subcommand("estimate", "online one-step estimate from w,a,y CSV data");
  c_est->add_option("-i,--input", est.input, "input CSV path, '-' for stdin")
      ->capture_default_str();
  c_est->add_option("--ell", est.ell, "initial learning block size (default n/10, min 10)");
  c_est->add_option("--alpha", est.alpha, "two-sided miscoverage level")->capture_default_str();
  c_est->add_option("--sigma-floor", est.sigma_floor, "floor on the scaling variance")
      ->capture_default_str();
  c_est->add_option("--learner", est.learner, "auto, npmle, or kernel")->capture_default_str();
  c_est->add_option("--seed", est.seed, "RNG seed (default OPTVALUE_SEED or 0)");

  auto* c_sim = app.add_subcommand("simulate", "Monte Carlo coverage experiment");
  c_sim->add_option("--dgp", sim.dgp, "d-e, c-ne, or c-e")->capture_default_str();
  c_sim->add_option("--n", sim.n, "sample size per replicate")->capture_default_str();
  c_sim->add_option("--ell", sim.ell, "initial learning block size (default 100 for d-e, 25 otherwise)");
  c_sim->add_option("--reps", sim.reps, "number of replicates")->capture_default_str();
  c_sim->add_option("--methods", sim.methods, "comma list of online, classical, m-out-of-n")
      ->capture_default_str();
  c_sim->add_option("--mode", sim.mode, "default, fully-estimated, or oracle-nuisance")
      ->capture_default_str();
  c_sim->add_option("--draws", sim.draws, "bootstrap draws (m-out-of-n method only)")
      ->capture_default_str();
  c_sim->add_option("--seed", sim.seed, "RNG seed (default OPTVALUE_SEED or 0)");
  c_sim->add_option("--threads", sim.threads, "worker threads")->capture_default_str();
  c_sim->add_option("--out", sim.out_dir, "directory for summary.csv and replicates.csv");

  auto* c_cmp = app.add_subcommand("compare-bootstrap",
                                   "subsample bootstrap coverage/width sweep vs the online interval");
  c_cmp->add_option("--dgp", sweep.dgp, "d-e, c-ne, or c-e")->capture_default_str();
  c_cmp->add_option("--n", sweep.n, "sample size per replicate")->capture_default_str();
  c_cmp->add_option("--m-grid", sweep.m_grid, "comma list of subsample sizes (default n/10..n)");
  c_cmp->add_option("--reps", sweep.reps, "number of replicates")->capture_default_str();
  c_cmp->add_option("--draws", sweep.draws, "bootstrap draws per replicate")->capture_default_str();
  c_cmp->add_option("--ell", sweep.ell, "initial block size for the online baseline")
      ->capture_default_str();
  c_cmp->add_option("--seed", sweep.seed, "RNG seed (default OPTVALUE_SEED or 0)");
  c_cmp->add_option("--threads", sweep.threads, "worker threads")->capture_default_str();
  c_cmp->add_option("--out", sweep.out_dir, "directory for summary.csv and chart.svg");
  c_cmp->add_flag("--no-chart", sweep.no_chart, "skip chart.svg");

  auto* c_sum = app.add_subcommand("summarize", "re-aggregate a replicates.csv file");
  c_sum->add_option("-i,--input", summ.input, "replicates.csv path")->required();
  c_sum->add_option("--out", summ.out_dir, "directory for summary.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (app.got_subcommand(c_est)) return run_estimate(est);
    if (app.got_subcommand(c_sim)) return run_simulate(sim);
    if (app.got_subcommand(c_cmp)) return run_compare_bootstrap(sweep);
    if (app.got_subcommand(c_sum)) return run_summarize(summ);
    return kExitUsage;
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const optvalue::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumerical;
  }
}
