#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "slim/report.hpp"
#include "slim/run_log.hpp"
#include "slim/runner.hpp"

namespace {

struct RunArgs {
  std::string config_path;
  std::string workflow, dataset, pricing, out, stages, order;
  double tau_p = -1, tau_q = -1;
  int top_k = -1, probe_size = -1;
  double budget = -1;
  long long seed = -1;
  bool budget_strict = false;
};

int do_run(const RunArgs& args) {
  slim::RunConfig config;
  try {
    config = slim::load_run_config(args.config_path);
  } catch (const std::exception& ex) {
    std::cerr << "config error: " << ex.what() << '\n';
    return slim::exit_code::config;
  }

  if (!args.workflow.empty()) config.workflow_path = args.workflow;
  if (!args.dataset.empty()) config.dataset_path = args.dataset;
  if (!args.pricing.empty()) config.pricing_path = args.pricing;
  if (!args.out.empty()) config.out_dir = args.out;
  if (args.seed >= 0) {
    config.seed = static_cast<uint64_t>(args.seed);
    config.prune.seed = config.quantize.seed = config.seed;
    config.tuner.seed = config.seed + 1;
    config.seed_set = true;
  }
  if (args.tau_p >= 0) config.prune.tau = args.tau_p;
  if (args.tau_q >= 0) config.quantize.tau = args.tau_q;
  if (args.top_k > 0) config.prune.k = config.quantize.k = args.top_k;
  if (args.probe_size > 0) config.prune.probe_size = config.quantize.probe_size = args.probe_size;
  if (args.budget >= 0) config.budget = args.budget;
  if (args.budget_strict) config.budget_strict = true;
  if (!args.stages.empty()) {
    config.enable_prune = args.stages.find("prune") != std::string::npos;
    config.enable_quantize = args.stages.find("quantize") != std::string::npos;
    config.enable_tune = args.stages.find("tune") != std::string::npos;
  }
  if (!args.order.empty()) {
    if (args.order == "prune-first") {
      config.order = slim::StageOrder::prune_first;
    } else if (args.order == "quantize-first") {
      config.order = slim::StageOrder::quantize_first;
    } else {
      std::cerr << "config error: unknown order '" << args.order << "'\n";
      return slim::exit_code::config;
    }
  }
  return slim::execute_run(config, std::cerr);
}

int do_report(const std::string& scenarios_path, const std::string& pool_path,
              const std::string& out_dir) {
  try {
    std::filesystem::create_directories(out_dir);
    if (!scenarios_path.empty()) {
      slim::EconReport report = slim::econ_report(slim::load_scenarios(scenarios_path));
      std::string rendered = slim::render_econ_report(report);
      std::cout << rendered;
      std::ofstream out(std::filesystem::path(out_dir) / "econ_report.tsv");
      out << rendered;
    }
    if (!pool_path.empty()) {
      std::ifstream in(pool_path);
      if (!in) throw std::runtime_error("cannot open pool file '" + pool_path + "'");
      std::vector<slim::ScorePoint> points;
      std::string line;
      std::getline(in, line);  // header
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        slim::ScorePoint p;
        row >> p.score >> p.cost >> p.label;
        points.push_back(p);
      }
      std::ofstream out(std::filesystem::path(out_dir) / "pareto.tsv");
      for (const auto& p : slim::pareto_frontier(points)) {
        out << p.score << '\t' << p.cost << '\n';
        std::cout << p.score << '\t' << p.cost << '\n';
      }
    }
  } catch (const std::exception& ex) {
    std::cerr << "report error: " << ex.what() << '\n';
    return slim::exit_code::config;
  }
  return slim::exit_code::ok;
}

int do_audit(const std::string& log_path) {
  try {
    auto problems = slim::audit_run_log(slim::read_run_log(log_path));
    if (problems.empty()) {
      std::cout << "log chain ok\n";
      return 0;
    }
    for (const auto& p : problems) std::cerr << p << '\n';
    return 1;
  } catch (const std::exception& ex) {
    std::cerr << "audit error: " << ex.what() << '\n';
    return slim::exit_code::config;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slim: workflow graph compression via pruning, quantization and tuning"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "run the compression pipeline");
  run->add_option("--config", run_args.config_path, "run configuration file")->required();
  run->add_option("--workflow", run_args.workflow, "workflow document (overrides config)");
  run->add_option("--dataset", run_args.dataset, "dataset file (overrides config)");
  run->add_option("--pricing", run_args.pricing, "pricing table (overrides config)");
  run->add_option("--seed", run_args.seed, "random seed (overrides config)");
  run->add_option("--stages", run_args.stages, "comma list of prune,quantize,tune");
  run->add_option("--order", run_args.order, "prune-first | quantize-first");
  run->add_option("--tau-p", run_args.tau_p, "pruning acceptance threshold");
  run->add_option("--tau-q", run_args.tau_q, "quantization acceptance threshold");
  run->add_option("--top-k", run_args.top_k, "top-k trial size");
  run->add_option("--probe-size", run_args.probe_size, "probe slice size");
  run->add_option("--budget", run_args.budget, "cost budget in USD per problem");
  run->add_flag("--budget-strict", run_args.budget_strict,
                "treat a budget violation as an error exit");
  run->add_option("--out", run_args.out, "output directory (overrides config)");

  std::string scenarios_path, pool_path, report_out = "out";
  CLI::App* report = app.add_subcommand("report", "economic report and Pareto frontier");
  report->add_option("--scenarios", scenarios_path, "scenario table (JSON)");
  report->add_option("--pool", pool_path, "pool.tsv from a run");
  report->add_option("--out", report_out, "output directory");

  std::string log_path;
  CLI::App* audit = app.add_subcommand("audit", "verify run log digest chain");
  audit->add_option("--log", log_path, "runlog.jsonl path")->required();

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) return do_run(run_args);
  if (report->parsed()) return do_report(scenarios_path, pool_path, report_out);
  if (audit->parsed()) return do_audit(log_path);
  return 0;
}
