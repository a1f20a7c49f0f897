// Simulates one critical path, rescales it and compares its endpoint with
// draws from the limiting diffusion.

#include <iostream>

#include "cbpsim/diagnostics.hpp"

int main() {
  using namespace cbpsim;
  const CbpModel model(OffspringLaw::poisson(1.0), ControlLaw::poisson_immigration(1.0),
                       InitialLaw::fixed(0));
  const std::size_t n = 500;
  const Trajectory traj = simulate(model, n, 42);
  const StepPath w = scale_trajectory(traj, n, 1.0);
  std::cout << "W_n(1) = " << w(1.0) << "  (tau(100) = " << tau(100, model)
            << ", " << to_string(classify(model)) << ")\n";

  Stream rng(7);
  const auto params = DiffusionParams::from_model(model);
  const auto draws = marginal_sample(1.0, 0.0, params, rng, 5);
  std::cout << "W(1) draws:";
  for (double x : draws) std::cout << ' ' << x;
  std::cout << '\n';
}
