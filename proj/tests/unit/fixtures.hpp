#pragma once

#include <string>

#include "dcopt/caseio.hpp"
#include "dcopt/grid.hpp"

namespace fixtures {

inline std::string case_path(const std::string& file) { return std::string(DCOPT_CASE_DIR) + "/" + file; }

inline dcopt::NetworkModel make_network(std::size_t num_buses) {
  dcopt::NetworkModel net;
  net.name = "fixture" + std::to_string(num_buses);
  for (std::size_t i = 0; i < num_buses; ++i) {
    dcopt::Bus bus;
    bus.id = static_cast<int>(i + 1);
    bus.type = i == 0 ? 3 : 1;
    bus.is_reference = i == 0;
    net.bus_ids.push_back(bus.id);
    net.index_of_id[bus.id] = i;
    net.buses.push_back(bus);
  }
  return net;
}

inline void add_branch(dcopt::NetworkModel& net, std::size_t from, std::size_t to, double r, double x,
                       double rating = 100.0) {
  dcopt::Branch br;
  br.from = from;
  br.to = to;
  br.r = r;
  br.x = x;
  br.rating = rating;
  net.branches.push_back(br);
}

inline void add_generator(dcopt::NetworkModel& net, std::size_t bus, double pmin, double pmax, double c2, double c1,
                          double c0 = 0.0) {
  dcopt::Generator g;
  g.bus = bus;
  g.pmin = pmin;
  g.pmax = pmax;
  g.qmin = -5.0;
  g.qmax = 5.0;
  g.c2 = c2;
  g.c1 = c1;
  g.c0 = c0;
  net.generators.push_back(g);
}

/// Bus 1 (reference, one machine) feeds a 1.0 p.u. load at bus 2 over x = 0.1.
inline dcopt::NetworkModel two_bus(double r = 0.0) {
  auto net = make_network(2);
  net.buses[1].pd = 1.0;
  add_branch(net, 0, 1, r, 0.1);
  add_generator(net, 0, 0.0, 2.0, 1.0, 10.0);
  return net;
}

/// Triangle with a cheap machine at bus 1, an expensive one at bus 3 and a
/// 1.5 p.u. load at bus 3. The 1-3 line (rating 0.6) binds.
inline dcopt::NetworkModel three_bus_congested() {
  auto net = make_network(3);
  net.buses[2].pd = 1.5;
  net.buses[2].qd = 0.3;
  add_branch(net, 0, 1, 0.0, 0.1, 100.0);
  add_branch(net, 1, 2, 0.0, 0.1, 100.0);
  add_branch(net, 0, 2, 0.0, 0.1, 0.6);
  add_generator(net, 0, 0.0, 2.0, 1.0, 10.0);
  add_generator(net, 2, 0.0, 2.0, 2.0, 30.0);
  return net;
}

inline dcopt::Demand nominal_demand(const dcopt::NetworkModel& net) { return {net.nominal_pd(), net.nominal_qd()}; }

}  // namespace fixtures

#include <filesystem>
#include <unistd.h>

namespace fixtures {

/// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag)
      : path_(std::filesystem::temp_directory_path() / ("dcopt_" + tag + "_" + std::to_string(::getpid()))) {
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace fixtures
