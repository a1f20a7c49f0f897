// Calibrates the final-n KS threshold of the default convergence study:
// runs the n = 1250 cell under 20 master seeds and reports
// median + 3 MAD of the KS statistic as JSON.
//
//   calibrate_ks [--seeds 20] [--first-seed 1001] [--threads 4] [--out file.json]

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "cbpsim/diagnostics.hpp"

int main(int argc, char** argv) {
  CLI::App app{"KS threshold calibration for the default convergence study"};
  std::size_t seeds = 20;
  std::uint64_t first_seed = 1001;
  std::size_t threads = 1;
  std::string out_path;
  app.add_option("--seeds", seeds, "number of master seeds");
  app.add_option("--first-seed", first_seed, "first master seed; the rest follow consecutively");
  app.add_option("--threads", threads, "worker threads");
  app.add_option("--out", out_path, "write the JSON here as well as to stdout");
  CLI11_PARSE(app, argc, argv);

  using namespace cbpsim;
  const CbpModel model(OffspringLaw::poisson(1.0), ControlLaw::poisson_immigration(1.0),
                       InitialLaw::fixed(0));
  std::vector<double> values;
  std::vector<std::uint64_t> used;
  for (std::size_t s = 0; s < seeds; ++s) {
    ConvergenceStudy study(model);
    study.n_values = {1250};
    study.t_checkpoints = {1.0};
    study.horizon = 1.0;
    study.replicates = 10000;
    study.reference_factor = 10;
    study.master_seed = first_seed + s;
    study.threads = threads;
    const auto report = marginal_convergence(study);
    values.push_back(report.ks_rows.front().ks);
    used.push_back(study.master_seed);
    std::cerr << "seed " << study.master_seed << ": ks = " << values.back() << '\n';
  }
  const double med = median(values);
  const double spread = mad(values);
  nlohmann::json j{{"preset", "poisson-immigration"},
                   {"alpha", 1.0},
                   {"z0", 0},
                   {"n", 1250},
                   {"t", 1.0},
                   {"replicates", 10000},
                   {"reference_factor", 10},
                   {"seeds", used},
                   {"ks", values},
                   {"median", med},
                   {"mad", spread},
                   {"threshold", med + 3.0 * spread}};
  std::cout << j.dump(2) << '\n';
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << j.dump(2) << '\n';
  }
  return 0;
}
