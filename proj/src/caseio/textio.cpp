#include "textio.hpp"

#include <charconv>
#include <cmath>
#include <limits>

#include "dcopt/caseio.hpp"
#include "dcopt/error.hpp"

namespace dcopt {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace textio {

bool parse_double(std::string_view tok, double& value) {
  if (tok.empty()) return false;
  bool negative = false;
  if (tok.front() == '+' || tok.front() == '-') {
    negative = tok.front() == '-';
    tok.remove_prefix(1);
    if (tok.empty() || tok.front() == '+' || tok.front() == '-') return false;
  }
  if (tok == "inf" || tok == "Inf" || tok == "INF") {
    value = negative ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    return true;
  }
  if (tok == "nan" || tok == "NaN") {
    value = std::numeric_limits<double>::quiet_NaN();
    return true;
  }
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) return false;
  value = negative ? -v : v;
  return true;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t' && line[j] != '\r') ++j;
    out.push_back(line.substr(i, j - i));
    i = j;
  }
  return out;
}

void write_vector(std::ostream& out, std::string_view key, const Vector& v) {
  out << key;
  for (Eigen::Index i = 0; i < v.size(); ++i) out << ' ' << format_double(v[i]);
  out << '\n';
}

Reader::Reader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

bool Reader::fetch() {
  while (!have_line_) {
    if (!std::getline(in_, line_)) return false;
    ++line_no_;
    if (!line_.empty() && line_.back() == '\r') line_.pop_back();
    if (line_.find_first_not_of(" \t") == std::string::npos) continue;
    have_line_ = true;
  }
  return true;
}

bool Reader::at_end() { return !fetch(); }

std::string Reader::peek_key() {
  if (!fetch()) return {};
  const auto toks = split(line_);
  return toks.empty() ? std::string() : std::string(toks.front());
}

void Reader::fail(std::string_view what) const {
  throw Error(Errc::MalformedRow, source_ + ":" + std::to_string(line_no_) + ": " + std::string(what));
}

void Reader::header(std::string_view kind, int version) {
  if (!fetch()) throw Error(Errc::SchemaVersionMismatch, source_ + ": empty file");
  const auto toks = split(line_);
  if (toks.size() != 2 || toks[0] != kind)
    throw Error(Errc::SchemaVersionMismatch, source_ + ": expected a '" + std::string(kind) + "' file");
  if (toks[1] != std::to_string(version))
    throw Error(Errc::SchemaVersionMismatch, source_ + ": " + std::string(kind) + " version " +
                                                 std::string(toks[1]) + ", supported " + std::to_string(version));
  have_line_ = false;
}

std::string Reader::expect(std::string_view key) {
  if (!fetch()) fail("unexpected end of file, expected '" + std::string(key) + "'");
  const auto start = line_.find_first_not_of(" \t");
  auto end = line_.find_first_of(" \t", start);
  if (end == std::string::npos) end = line_.size();
  if (std::string_view(line_).substr(start, end - start) != key)
    fail("expected '" + std::string(key) + "'");
  have_line_ = false;
  const auto rest = line_.find_first_not_of(" \t", end);
  return rest == std::string::npos ? std::string() : line_.substr(rest);
}

long long to_integer(std::string_view tok, const Reader& r) {
  long long v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) r.fail("not an integer: " + std::string(tok));
  return v;
}

double to_number(std::string_view tok, const Reader& r) {
  double v = 0.0;
  if (!parse_double(tok, v)) r.fail("not a number: " + std::string(tok));
  return v;
}

long long Reader::integer(std::string_view key) {
  const auto rest = expect(key);
  const auto toks = split(rest);
  if (toks.size() != 1) fail("expected one integer after '" + std::string(key) + "'");
  return to_integer(toks[0], *this);
}

double Reader::number(std::string_view key) {
  const auto rest = expect(key);
  const auto toks = split(rest);
  if (toks.size() != 1) fail("expected one number after '" + std::string(key) + "'");
  return to_number(toks[0], *this);
}

std::vector<std::string> Reader::tokens(std::string_view key) {
  const auto rest = expect(key);
  std::vector<std::string> out;
  for (auto tok : split(rest)) out.emplace_back(tok);
  return out;
}

std::vector<double> Reader::doubles(std::string_view key) {
  const auto rest = expect(key);
  std::vector<double> out;
  for (auto tok : split(rest)) out.push_back(to_number(tok, *this));
  return out;
}

Vector Reader::vector(std::string_view key, std::ptrdiff_t expected_size) {
  const auto vals = doubles(key);
  if (expected_size >= 0 && static_cast<std::ptrdiff_t>(vals.size()) != expected_size)
    throw Error(Errc::LengthMismatch, source_ + ":" + std::to_string(line_no_) + ": '" + std::string(key) +
                                          "' has " + std::to_string(vals.size()) + " entries, expected " +
                                          std::to_string(expected_size));
  return Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

}  // namespace textio
}  // namespace dcopt
