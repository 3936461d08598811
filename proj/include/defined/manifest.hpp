#pragma once

#include <string>
#include <utility>
#include <vector>

namespace defined {

/// Flat key=value record of one run: the subcommand, the fully-resolved
/// config, seed, code version, timestamps, and output paths.  Written
/// adjacent to each run's primary output ("<output>.manifest"); parse ->
/// serialize -> parse is lossless.
struct RunManifest {
  std::vector<std::pair<std::string, std::string>> entries;

  void set(const std::string& key, const std::string& value);
  const std::string* get(const std::string& key) const;

  std::string serialize() const;
  static RunManifest parse(const std::string& text);

  void save(const std::string& path) const;
  static RunManifest load(const std::string& path);
};

/// ISO-8601 UTC timestamp for manifest start/end fields.
std::string utc_timestamp_now();

}  // namespace defined
