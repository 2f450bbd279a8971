#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <unordered_set>

#include "dcopt/caseio.hpp"
#include "dcopt/error.hpp"
#include "textio.hpp"

namespace dcopt {
namespace {

// Column positions in the MATPOWER tables.
namespace bus_col {
constexpr std::size_t id = 0, type = 1, pd = 2, qd = 3, gs = 4, bs = 5, vm = 7, va = 8, vmax = 11, vmin = 12;
}
namespace gen_col {
constexpr std::size_t bus = 0, pg = 1, qg = 2, qmax = 3, qmin = 4, vg = 5, status = 7, pmax = 8, pmin = 9;
}
namespace branch_col {
constexpr std::size_t from = 0, to = 1, r = 2, x = 3, b = 4, rate_a = 5, ratio = 8, angle = 9, status = 10,
                      angmin = 11, angmax = 12;
}

constexpr std::size_t kMinBusCols = 13;
constexpr std::size_t kMinGenCols = 10;
constexpr std::size_t kMinBranchCols = 11;
constexpr std::size_t kMinGencostCols = 4;

std::string strip_comments(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      out.push_back(c);
      if (c == '\'' || c == '\n') in_string = false;
      continue;
    }
    if (c == '%') {
      while (i < text.size() && text[i] != '\n') ++i;
      out.push_back('\n');
      continue;
    }
    if (c == '\'') in_string = true;
    out.push_back(c);
  }
  return out;
}

bool parse_number(std::string_view tok, double& value) {
  std::string lower(tok);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "inf" || lower == "+inf") {
    value = std::numeric_limits<double>::infinity();
    return true;
  }
  if (lower == "-inf") {
    value = -std::numeric_limits<double>::infinity();
    return true;
  }
  if (lower == "nan") {
    value = std::numeric_limits<double>::quiet_NaN();
    return true;
  }
  return textio::parse_double(tok, value);
}

std::vector<Row> parse_matrix(std::string_view table, std::string_view body) {
  std::vector<Row> rows;
  std::string cleaned(body);
  for (std::size_t pos = cleaned.find("..."); pos != std::string::npos; pos = cleaned.find("...", pos))
    cleaned.replace(pos, 3, "   ");
  std::size_t line_start = 0;
  while (line_start <= cleaned.size()) {
    std::size_t end = cleaned.find_first_of(";\n", line_start);
    if (end == std::string::npos) end = cleaned.size();
    std::string_view line(cleaned.data() + line_start, end - line_start);
    Row row;
    std::size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (std::isspace(static_cast<unsigned char>(line[i])) || line[i] == ',')) ++i;
      if (i >= line.size()) break;
      std::size_t j = i;
      while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j])) && line[j] != ',') ++j;
      double v = 0.0;
      if (!parse_number(line.substr(i, j - i), v))
        throw Error(Errc::MalformedRow, std::string(table) + " row " + std::to_string(rows.size() + 1) +
                                            ": non-numeric entry '" + std::string(line.substr(i, j - i)) + "'");
      row.push_back(v);
      i = j;
    }
    if (!row.empty()) {
      if (!rows.empty() && row.size() != rows.front().size())
        throw Error(Errc::MalformedRow, std::string(table) + " row " + std::to_string(rows.size() + 1) + " has " +
                                            std::to_string(row.size()) + " columns, expected " +
                                            std::to_string(rows.front().size()));
      rows.push_back(std::move(row));
    }
    line_start = end + 1;
  }
  return rows;
}

void require_arity(std::string_view table, const std::vector<Row>& rows, std::size_t min_cols) {
  if (!rows.empty() && rows.front().size() < min_cols)
    throw Error(Errc::MalformedRow, std::string(table) + " has " + std::to_string(rows.front().size()) +
                                        " columns, need at least " + std::to_string(min_cols));
}

int as_id(double v, std::string_view what) {
  if (v != std::floor(v) || std::abs(v) > 2e9)
    throw Error(Errc::MalformedRow, std::string(what) + " is not an integer id");
  return static_cast<int>(v);
}

}  // namespace

RawCase parse_matpower(std::string_view text) {
  const std::string src = strip_comments(text);
  RawCase raw;
  bool have_base = false, have_bus = false, have_gen = false, have_branch = false, have_gencost = false;

  if (auto fpos = src.find("function"); fpos != std::string::npos) {
    auto eq = src.find('=', fpos);
    auto nl = src.find('\n', fpos);
    if (eq != std::string::npos && eq < nl) {
      std::string name = src.substr(eq + 1, nl - eq - 1);
      name.erase(std::remove_if(name.begin(), name.end(), [](unsigned char c) { return std::isspace(c); }),
                 name.end());
      raw.name = name;
    }
  }

  std::size_t pos = 0;
  while ((pos = src.find("mpc.", pos)) != std::string::npos) {
    std::size_t p = pos + 4;
    std::size_t name_end = p;
    while (name_end < src.size() && (std::isalnum(static_cast<unsigned char>(src[name_end])) || src[name_end] == '_'))
      ++name_end;
    const std::string field = src.substr(p, name_end - p);
    std::size_t q = name_end;
    while (q < src.size() && (src[q] == ' ' || src[q] == '\t')) ++q;
    if (q >= src.size() || src[q] != '=') {
      pos = name_end;
      continue;
    }
    ++q;
    while (q < src.size() && std::isspace(static_cast<unsigned char>(src[q]))) ++q;
    if (q < src.size() && src[q] == '[') {
      const auto close = src.find(']', q);
      if (close == std::string::npos) throw Error(Errc::MalformedRow, "unterminated matrix mpc." + field);
      const std::string_view body(src.data() + q + 1, close - q - 1);
      if (field == "bus") {
        raw.bus = parse_matrix(field, body);
        have_bus = true;
      } else if (field == "gen") {
        raw.gen = parse_matrix(field, body);
        have_gen = true;
      } else if (field == "branch") {
        raw.branch = parse_matrix(field, body);
        have_branch = true;
      } else if (field == "gencost") {
        raw.gencost = parse_matrix(field, body);
        have_gencost = true;
      }
      pos = close + 1;
    } else if (q < src.size() && src[q] == '{') {
      const auto close = src.find('}', q);
      pos = close == std::string::npos ? src.size() : close + 1;
    } else {
      auto end = src.find_first_of(";\n", q);
      if (end == std::string::npos) end = src.size();
      if (field == "baseMVA") {
        std::string tok = src.substr(q, end - q);
        tok.erase(std::remove_if(tok.begin(), tok.end(), [](unsigned char c) { return std::isspace(c); }), tok.end());
        if (!parse_number(tok, raw.base_mva)) throw Error(Errc::MalformedRow, "baseMVA is not numeric");
        have_base = true;
      }
      pos = end;
    }
  }

  if (!have_base) throw Error(Errc::MissingTable, "baseMVA");
  if (!have_bus) throw Error(Errc::MissingTable, "bus");
  if (!have_gen) throw Error(Errc::MissingTable, "gen");
  if (!have_branch) throw Error(Errc::MissingTable, "branch");
  if (!have_gencost) throw Error(Errc::MissingTable, "gencost");
  if (!(raw.base_mva > 0.0)) throw Error(Errc::InvalidCase, "baseMVA must be positive");

  require_arity("bus", raw.bus, kMinBusCols);
  require_arity("gen", raw.gen, kMinGenCols);
  require_arity("branch", raw.branch, kMinBranchCols);
  require_arity("gencost", raw.gencost, kMinGencostCols);

  std::unordered_set<int> ids;
  for (const auto& row : raw.bus) {
    const int id = as_id(row[bus_col::id], "bus id");
    if (!ids.insert(id).second) throw Error(Errc::DuplicateBusId, "bus id " + std::to_string(id));
  }
  for (std::size_t k = 0; k < raw.branch.size(); ++k) {
    for (auto col : {branch_col::from, branch_col::to}) {
      const int id = as_id(raw.branch[k][col], "branch bus");
      if (!ids.contains(id))
        throw Error(Errc::UnknownBus, "branch row " + std::to_string(k + 1) + " references bus " + std::to_string(id));
    }
  }
  for (std::size_t k = 0; k < raw.gen.size(); ++k) {
    const int id = as_id(raw.gen[k][gen_col::bus], "gen bus");
    if (!ids.contains(id))
      throw Error(Errc::UnknownBus, "gen row " + std::to_string(k + 1) + " references bus " + std::to_string(id));
  }
  return raw;
}

RawCase read_matpower(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::FileNotFound, path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_matpower(ss.str());
}

NetworkModel to_network(const RawCase& raw, const NetworkOptions& options) {
  constexpr double deg = std::numbers::pi / 180.0;
  const double base = raw.base_mva;
  NetworkModel net;
  net.name = raw.name;
  net.base_mva = base;

  bool have_ref = false;
  for (const auto& row : raw.bus) {
    const int type = static_cast<int>(row[bus_col::type]);
    if (type == 4) continue;  // isolated
    Bus bus;
    bus.id = static_cast<int>(row[bus_col::id]);
    bus.type = type;
    bus.pd = row[bus_col::pd] / base;
    bus.qd = row[bus_col::qd] / base;
    bus.gs = row[bus_col::gs] / base;
    bus.bs = row[bus_col::bs] / base;
    bus.vm0 = row[bus_col::vm];
    bus.va0 = row[bus_col::va] * deg;
    bus.vmax = row[bus_col::vmax];
    bus.vmin = row[bus_col::vmin];
    if (type == 3 && !have_ref) {
      bus.is_reference = true;
      net.reference = net.buses.size();
      have_ref = true;
    }
    net.index_of_id.emplace(bus.id, net.buses.size());
    net.bus_ids.push_back(bus.id);
    net.buses.push_back(bus);
  }
  if (!have_ref) throw Error(Errc::NoReferenceBus, "no type-3 bus in case " + raw.name);

  for (std::size_t k = 0; k < raw.branch.size(); ++k) {
    const auto& row = raw.branch[k];
    if (row[branch_col::status] <= 0.0) continue;
    auto f = net.index_of_id.find(static_cast<int>(row[branch_col::from]));
    auto t = net.index_of_id.find(static_cast<int>(row[branch_col::to]));
    if (f == net.index_of_id.end() || t == net.index_of_id.end()) continue;  // touches an isolated bus
    Branch br;
    br.from = f->second;
    br.to = t->second;
    br.r = row[branch_col::r];
    br.x = row[branch_col::x];
    br.charging = row[branch_col::b];
    br.rating = row[branch_col::rate_a] > 0.0 ? row[branch_col::rate_a] / base : options.unlimited_rating;
    br.tap = row[branch_col::ratio] != 0.0 ? row[branch_col::ratio] : 1.0;
    br.shift = row[branch_col::angle] * deg;
    if (row.size() > branch_col::angmax) {
      const double amin = row[branch_col::angmin];
      const double amax = row[branch_col::angmax];
      br.angmin = (amin != 0.0 && amin > -360.0) ? amin * deg : -kUnlimited;
      br.angmax = (amax != 0.0 && amax < 360.0) ? amax * deg : kUnlimited;
    }
    if (br.r == 0.0 && br.x == 0.0)
      throw Error(Errc::ZeroImpedance, "branch row " + std::to_string(k + 1) + " has r = x = 0");
    net.branches.push_back(br);
  }

  if (raw.gencost.size() < raw.gen.size())
    throw Error(Errc::InvalidCase, "gencost has fewer rows than gen");
  for (std::size_t k = 0; k < raw.gen.size(); ++k) {
    const auto& row = raw.gen[k];
    if (row[gen_col::status] <= 0.0) continue;
    auto b = net.index_of_id.find(static_cast<int>(row[gen_col::bus]));
    if (b == net.index_of_id.end()) continue;
    Generator gen;
    gen.bus = b->second;
    gen.pg0 = row[gen_col::pg] / base;
    gen.qg0 = row[gen_col::qg] / base;
    gen.qmax = row[gen_col::qmax] / base;
    gen.qmin = row[gen_col::qmin] / base;
    gen.vg = row[gen_col::vg];
    gen.pmax = row[gen_col::pmax] / base;
    gen.pmin = row[gen_col::pmin] / base;

    const auto& cost = raw.gencost[k];
    if (static_cast<int>(cost[0]) != 2)
      throw Error(Errc::UnsupportedCostModel, "gen row " + std::to_string(k + 1) + " uses cost model " +
                                                  std::to_string(static_cast<int>(cost[0])));
    const auto ncoef = static_cast<std::size_t>(cost[3]);
    if (cost.size() < kMinGencostCols + ncoef)
      throw Error(Errc::MalformedRow, "gencost row " + std::to_string(k + 1) + " is shorter than its n");
    // Coefficients are stored highest order first; only degree <= 2 is supported.
    std::vector<double> c(ncoef);
    for (std::size_t j = 0; j < ncoef; ++j) c[j] = cost[kMinGencostCols + j];
    for (std::size_t j = 0; j + 3 < ncoef; ++j) {
      if (c[j] != 0.0)
        throw Error(Errc::UnsupportedCostModel, "gen row " + std::to_string(k + 1) + " has a cost above degree 2");
    }
    auto coef = [&](std::size_t power) { return power < ncoef ? c[ncoef - 1 - power] : 0.0; };
    gen.c2 = coef(2) * base * base;
    gen.c1 = coef(1) * base;
    gen.c0 = coef(0);
    net.generators.push_back(gen);
  }

  validate(net);
  return net;
}

NetworkModel load_network(const std::filesystem::path& path, const NetworkOptions& options) {
  RawCase raw = read_matpower(path);
  if (raw.name.empty()) raw.name = path.stem().string();
  return to_network(raw, options);
}

}  // namespace dcopt
