#pragma once

#include "dtd/controller.hpp"

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace dtd {

/// Config files are flat UTF-8 `key: value` lines; `#` starts a comment.
/// Unset keys take their defaults, some of which depend on `env`
/// (sub_episodes, horizon, sigma) or on `epochs` (anneal_epochs).
DtdConfig parse_config(std::string_view text);
DtdConfig load_config(const std::filesystem::path& path);

/// Writes every key explicitly; parse_config(serialize_config(c)) == c.
std::string serialize_config(const DtdConfig& config);

struct ConfigKey {
  std::string name;
  std::string description;
};
/// All recognised keys, in serialization order.
const std::vector<ConfigKey>& config_keys();

}  // namespace dtd
