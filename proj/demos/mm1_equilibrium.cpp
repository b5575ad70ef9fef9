// Compares exact finite-horizon values, a long-run simulation average and the
// closed-form equilibrium value of E exp(-N) for an M/M/1 queue.

#include <cmath>
#include <cstdio>

#include "qnet/qnet.hpp"

int main() {
  using namespace qnet;
  const Network base = fixture_network("mm1");
  std::printf("%6s %10s %10s %10s %12s\n", "theta", "phi_20", "phi_200", "long-run", "equilibrium");
  for (double theta : {0.5, 1.0, 1.5}) {
    const Network net = base.with_theta({theta});
    const double rho = theta / net.beta(1);
    const double closed = (1 - rho) / (1 - rho / std::exp(1.0));
    const auto sim = long_run_average(net, 200000, 5000, 20, 1.0, CounterStream(1));
    std::printf("%6.2f %10.6f %10.6f %10.6f %12.6f\n", theta, phi_exact(net, 20), phi_exact(net, 200), sim.mean,
                closed);
  }
}
