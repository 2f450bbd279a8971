#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>
#include <openssl/sha.h>

#include "cli.hpp"

namespace dcopt::cli {

std::string sha256_tag(std::string_view bytes) {
  unsigned char digest[SHA256_DIGEST_LENGTH];
  SHA256(reinterpret_cast<const unsigned char*>(bytes.data()), bytes.size(), digest);
  std::ostringstream s;
  s << "sha256:" << std::hex << std::setfill('0');
  for (unsigned char c : digest) s << std::setw(2) << static_cast<int>(c);
  return s.str();
}

namespace {

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::FileNotFound, "cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return sha256_tag(s.str());
}

nlohmann::json file_list(const std::vector<std::filesystem::path>& files) {
  auto list = nlohmann::json::array();
  for (const auto& f : files) list.push_back({{"path", f.string()}, {"hash", file_hash(f)}});
  return list;
}

}  // namespace

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  nlohmann::ordered_json j;
  j["tool"] = "dcopt";
  j["version"] = DCOPT_VERSION;
  j["command"] = m.command;
  j["arguments"] = m.arguments;
  j["case"] = m.case_path;
  j["case_id"] = m.case_id;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.has_seed ? nlohmann::json(m.seed) : nlohmann::json(nullptr);
  j["started_utc"] = m.started_utc;
  j["finished_utc"] = m.finished_utc;
  j["inputs"] = file_list(m.inputs);
  j["outputs"] = file_list(m.outputs);
  std::ofstream out(path);
  if (!out) throw Error(Errc::FileNotFound, "cannot write " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw Error(Errc::FileNotFound, "failed writing " + path.string());
}

}  // namespace dcopt::cli
