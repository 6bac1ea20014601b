#pragma once

#include "json.hpp"

#include <chrono>
#include <cstdint>
#include <string>
#include <vector>

namespace difflsq::cli {

/// Provenance block embedded in every output file.
class RunManifest {
 public:
  RunManifest(std::string subcommand, std::uint64_t seed, std::string seed_source);

  void set_flags(nlohmann::json flags) { flags_ = std::move(flags); }
  void add_output(const std::string& path) { outputs_.push_back(path); }
  void add_note(const std::string& key, nlohmann::json value) { notes_[key] = std::move(value); }
  /// Stamps the end time; call once the results are final.
  void finish();

  nlohmann::json to_json() const;
  /// "# manifest: {...}" for the first line of a CSV file.
  std::string csv_comment() const;

 private:
  std::string subcommand_;
  std::uint64_t seed_;
  std::string seed_source_;
  nlohmann::json flags_ = nlohmann::json::object();
  nlohmann::json notes_ = nlohmann::json::object();
  std::vector<std::string> outputs_;
  std::string started_;
  std::string finished_;
};

std::string version_stamp();
std::string utc_timestamp();

/// Writes text to path, or to stdout when path is empty or "-".
void write_output(const std::string& path, const std::string& text);

}  // namespace difflsq::cli
