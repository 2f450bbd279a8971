#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dcopt/error.hpp"
#include "dcopt/train.hpp"

namespace dcopt::cli {

/// Process exit codes. Library errors map to 10 + their position in Errc.
enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kLabelFailures = 3,  // more than half of the AC-OPF labels are not optimal
  kErrorBase = 10,
};

int exit_code(Errc code);

/// Runs one command line. Output goes to `out`, diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// Train configuration file (JSON). Keys mirror TrainConfig; unknown keys and
// type errors throw InvalidConfig.
TrainConfig parse_train_config(std::string_view json_text);
TrainConfig read_train_config(const std::filesystem::path& path);
/// Canonical JSON of every TrainConfig field, keys sorted.
std::string canonical_config(const TrainConfig& config);

/// "sha256:" followed by the lowercase hex digest of `bytes`.
std::string sha256_tag(std::string_view bytes);

/// Provenance record written next to each command's outputs.
struct RunManifest {
  std::string command;
  std::vector<std::string> arguments;
  std::string case_path;
  std::string case_id;
  std::string config_hash;
  std::uint64_t seed = 0;
  bool has_seed = false;
  std::string started_utc;
  std::string finished_utc;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> outputs;
};

/// Writes the manifest as JSON, hashing every input and output file.
void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);

}  // namespace dcopt::cli
