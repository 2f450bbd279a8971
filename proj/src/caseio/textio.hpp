#pragma once

#include <cstddef>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "dcopt/grid.hpp"

namespace dcopt::textio {

bool parse_double(std::string_view tok, double& value);

std::vector<std::string_view> split(std::string_view line);

void write_vector(std::ostream& out, std::string_view key, const Vector& v);

// Line-oriented reader for the "<key> <values...>" record files.
class Reader {
 public:
  Reader(std::istream& in, std::string source);

  /// Checks the "<kind> <version>" header line.
  void header(std::string_view kind, int version);

  /// Next record; throws MalformedRow if its key is not `key`. Returns the rest of the line.
  std::string expect(std::string_view key);
  bool at_end();
  std::string peek_key();

  std::string text(std::string_view key) { return expect(key); }
  long long integer(std::string_view key);
  double number(std::string_view key);
  Vector vector(std::string_view key, std::ptrdiff_t expected_size = -1);
  std::vector<double> doubles(std::string_view key);
  std::vector<std::string> tokens(std::string_view key);

  [[noreturn]] void fail(std::string_view what) const;

 private:
  bool fetch();

  std::istream& in_;
  std::string source_;
  std::string line_;
  bool have_line_ = false;
  std::size_t line_no_ = 0;
};

long long to_integer(std::string_view tok, const Reader& r);
double to_number(std::string_view tok, const Reader& r);

}  // namespace dcopt::textio
