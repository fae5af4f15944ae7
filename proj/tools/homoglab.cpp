#include "homoglab/config.hpp"
#include "homoglab/errors.hpp"
#include "homoglab/experiments.hpp"
#include "homoglab/parallel.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"homoglab: stochastic homogenization numerical lab"};
  app.require_subcommand(1);

  std::string config_path, out_dir = ".";
  int threads = 0;
  homoglab::RunOptions opt;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"sweep", "energy gap and L^p distance of quenched minimizers vs eps"},
      {"diagram", "regularization diagram over (eps, delta)"},
      {"nonergodic", "periodized ensemble: per-realization limits and clustering"},
      {"quenched-vs-mean", "quenched and mean pairings against the limit pairing"},
      {"cell", "effective integrand from RVE cell problems"},
      {"solve", "minimal energies of the oscillating problem"},
      {"pair", "pairing vectors of minimizers with the test dictionary"},
      {"young", "empirical Young-measure report"},
      {"degenerate", "growth constants and weight moment check"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "INI config file")->required();
    sub->add_option("--out", out_dir, "output directory");
    sub->add_option("--threads", threads, "worker threads (0: OpenMP default)")->check(CLI::NonNegativeNumber);
    sub->add_flag("--force", opt.force, "run even when the mesh does not resolve eps");
    sub->add_flag("--timing", opt.timing, "fill wall_ms columns");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    if (threads > 0) homoglab::par::set_threads(threads);
    const homoglab::ExperimentConfig cfg = homoglab::load_config(config_path);
    return homoglab::run_command(command, cfg, out_dir, opt);
  } catch (const homoglab::ValidationError& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return 1;
  } catch (const homoglab::IoError& e) {
    std::cerr << "i/o error: " << e.what() << "\n";
    return 3;
  } catch (const homoglab::SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
