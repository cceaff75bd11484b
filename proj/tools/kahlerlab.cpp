#include <iostream>

#include "CLI11.hpp"
#include "kahlerlab/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Numerical verification of Kahler and almost-Kahler surface identities"};
  app.require_subcommand(1);

  kl::CliOptions opt;
  std::optional<double> tol;
  std::optional<int> samples;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<int> threads;
  int order = 4;
  auto common = [&](CLI::App* sub) {
    sub->add_option("--tol", tol, "identity tolerance override")->check(CLI::PositiveNumber);
    sub->add_option("--samples", samples, "samples per box")->check(CLI::Range(17, 1000000));
    sub->add_option("--seed", seed, "sampling seed (default from the scenario or " + std::string(kl::kSeedEnv) + ")");
    sub->add_option("--out", out, "output path");
    sub->add_option("--threads", threads, "worker threads, 0 for all cores")->check(CLI::Range(0, 1024));
    sub->add_option("--order", order, "jet order for scan")->check(CLI::Range(2, 4));
  };

  std::string scenario;
  std::vector<std::string> fields;

  auto* verify = app.add_subcommand("verify", "run the scenario's check suites");
  verify->add_option("scenario", scenario, "scenario file")->required();
  common(verify);

  auto* scan = app.add_subcommand("scan", "tabulate fields over the sample points");
  scan->add_option("scenario", scenario, "scenario file")->required();
  scan->add_option("--fields", fields, "fields to tabulate")->delimiter(',');
  common(scan);

  auto* cls = app.add_subcommand("classify", "weakly selfdual classification on the sampled domain");
  cls->add_option("scenario", scenario, "scenario file")->required();
  common(cls);

  kl::TableParams tp;
  std::optional<int> k;
  std::optional<double> eps, kb;
  auto* table = app.add_subcommand("table", "extremal Calabi profile coefficients and flags");
  table->add_option("--a", tp.a, "smaller class parameter")->required();
  table->add_option("--b", tp.b, "larger class parameter")->required();
  table->add_option("--k", k, "Hirzebruch index");
  table->add_option("--eps", eps, "base curvature for the boundary-condition formula");
  table->add_option("--kb", kb, "boundary constant for the boundary-condition formula");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kl::kExitConfig;
  }

  opt.tol = tol;
  opt.samples = samples;
  opt.seed = seed;
  opt.out = out;
  opt.threads = threads;
  opt.order = order;

  if (verify->parsed()) return kl::cmd_verify(scenario, opt, std::cout, std::cerr);
  if (scan->parsed()) return kl::cmd_scan(scenario, fields, opt, std::cout, std::cerr);
  if (cls->parsed()) return kl::cmd_classify(scenario, opt, std::cout, std::cerr);
  tp.k = k;
  tp.eps = eps;
  tp.kb = kb;
  return kl::cmd_table(tp, std::cout, std::cerr);
}
