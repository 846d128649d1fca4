#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>

namespace crowdbp {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key = value configuration, one pair per line; '#' starts a comment.
using ConfigMap = std::map<std::string, std::string>;

ConfigMap parse_config_text(const std::string& text);
ConfigMap parse_config_file(const std::string& path);

// Applies a "key=value" override, as given to the CLI via --set.
void apply_override(ConfigMap& cfg, const std::string& key_equals_value);

// Canonical text (sorted keys) and its FNV-1a hash, used for CSV provenance.
std::string canonical_config_text(const ConfigMap& cfg);
std::uint64_t config_hash(const ConfigMap& cfg);

}  // namespace crowdbp
