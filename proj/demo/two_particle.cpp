// Two particles of mass 1/2 at distance 0.1: empirical merge probability at
// t = 0.01 against the reflection-principle value.
#include <cstdio>

#include "arratia/arratia.hpp"

int main() {
  using namespace arratia;
  const TwoParticleSpec spec{0.5, 0.5, 0.1, 0.0};
  MonteCarlo mc;
  mc.run.replicates = 20000;
  mc.stepper.dt = 1e-5;
  const auto rep = check_two_particle(spec, 0.01, mc);
  const auto oracle = two_particle_oracle(spec, 0.01);
  for (const auto& m : rep.metrics) {
    std::printf("%-18s %.5f  ci [%.5f, %.5f]  %s\n", m.name.c_str(), m.value, m.ci_lo, m.ci_hi, to_string(m.verdict));
  }
  std::printf("oracle: P = %.5f, E m = %.5f\n", oracle.merge_probability, oracle.mean_mass);
  return rep.verdict == Verdict::fail ? 1 : 0;
}
