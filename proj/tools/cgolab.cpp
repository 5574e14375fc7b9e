#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>

#include "cgolab/commands.hpp"

namespace {

int threads_from_env() {
  const char* v = std::getenv("CGOLAB_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1 || n > 1024) throw cgolab::ValidationError("CGOLAB_THREADS must be a positive integer");
  return static_cast<int>(n);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inverse boundary problems for the convected Helmholtz operator"};
  app.set_version_flag("--version", cgolab::kToolVersion);
  app.require_subcommand(1);

  std::string scenario_path, out_dir, command;
  int threads = 0;
  std::int64_t seed = -1;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"forward", "Assemble coefficients per frequency and solve a Dirichlet problem"},
      {"dtn", "Assemble the DtN map and its gauge-transformed counterpart"},
      {"cgo-diagnose", "Build complex geometric optics solutions over the h ladder"},
      {"reconstruct", "Recover the Fourier slice and curl of the potential difference"},
      {"boundary", "Recover boundary traces of the potential from localized probes"},
      {"fluids", "Extract fluid parameters from multifrequency coefficients"},
      {"verify", "Run the invariant suite on the scenario grid"}};
  for (auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("--scenario", scenario_path, "Scenario YAML file")->required();
    sub->add_option("--out", out_dir, "Output directory (default: scenario 'output')");
    sub->add_option("--threads", threads, "Worker threads (default: CGOLAB_THREADS or 1)")->check(CLI::Range(1, 1024));
    sub->add_option("--seed", seed, "Override the scenario seed")->check(CLI::NonNegativeNumber);
    sub->callback([&command, name = name] { command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    cgolab::Scenario s = cgolab::load_scenario(scenario_path);
    if (seed >= 0) s.seed = static_cast<std::uint64_t>(seed);
    cgolab::RunOptions opt;
    opt.command = command;
    opt.out = out_dir.empty() ? s.output : out_dir;
    opt.threads = threads > 0 ? threads : threads_from_env();
    auto res = cgolab::run_command(s, opt);
    for (auto& c : res.checks)
      std::cout << (c.pass ? "PASS " : "FAIL ") << c.name << " value=" << c.value << " threshold=" << c.threshold << '\n';
    std::cout << command << ": " << (res.ok ? "ok" : "failed") << " (" << opt.out.string() << ")\n";
    return res.ok ? 0 : 2;
  } catch (const cgolab::ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const cgolab::FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  } catch (const cgolab::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const cgolab::NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
