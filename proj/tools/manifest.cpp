#include "manifest.hpp"

#include <ctime>
#include <fstream>
#include <iostream>
#include <stdexcept>

#ifndef DIFFLSQ_VERSION
#define DIFFLSQ_VERSION "unknown"
#endif

namespace difflsq::cli {

std::string version_stamp() { return DIFFLSQ_VERSION; }

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

RunManifest::RunManifest(std::string subcommand, std::uint64_t seed, std::string seed_source)
    : subcommand_(std::move(subcommand)), seed_(seed), seed_source_(std::move(seed_source)), started_(utc_timestamp()) {}

void RunManifest::finish() { finished_ = utc_timestamp(); }

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["subcommand"] = subcommand_;
  j["flags"] = flags_;
  j["seed"] = seed_;
  j["seed_source"] = seed_source_;
  j["version"] = version_stamp();
  j["started"] = started_;
  j["finished"] = finished_;
  j["outputs"] = outputs_;
  if (!notes_.empty()) j["notes"] = notes_;
  return j;
}

std::string RunManifest::csv_comment() const { return "# manifest: " + to_json().dump(); }

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("failed writing '" + path + "'");
}

}  // namespace difflsq::cli
