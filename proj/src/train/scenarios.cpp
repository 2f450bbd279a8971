#include <random>

#include "dcopt/error.hpp"
#include "dcopt/train.hpp"

namespace dcopt {

ScenarioFile generate_scenarios(const NetworkModel& net, std::size_t n, double sigma, std::uint64_t seed) {
  if (n == 0) throw Error(Errc::InvalidConfig, "scenario count must be at least 1");
  if (!(sigma >= 0.0)) throw Error(Errc::InvalidConfig, "sigma must be nonnegative");
  ScenarioFile file;
  file.case_id = net.name;
  file.seed = seed;
  file.sigma = sigma;
  file.num_buses = net.num_buses();
  file.scenarios.reserve(n);

  const Vector pd0 = net.nominal_pd();
  const Vector qd0 = net.nominal_qd();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> factor(1.0, sigma);
  for (std::size_t k = 0; k < n; ++k) {
    Scenario s{static_cast<int>(k + 1), pd0, qd0};
    for (Eigen::Index i = 0; i < pd0.size(); ++i) {
      if (pd0[i] == 0.0 && qd0[i] == 0.0) continue;
      double f = factor(rng);
      while (f <= 0.0) f = factor(rng);
      s.pd[i] = f * pd0[i];
      s.qd[i] = f * qd0[i];
    }
    file.scenarios.push_back(std::move(s));
  }
  return file;
}

}  // namespace dcopt
