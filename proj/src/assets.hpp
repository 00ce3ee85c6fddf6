#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace streamrev::detail {

// Files under data/ and prompts/ compiled into the library, keyed by their
// repository-relative path (e.g. "data/scenarios/travel.json").
std::optional<std::string_view> embedded_asset(std::string_view path);
std::vector<std::string> embedded_asset_names();

// Reads <STREAMREV_ASSET_DIR>/<relative> when that variable is set and the
// file exists, else the embedded copy. Throws ConfigError when neither exists.
std::string load_asset(std::string_view relative);

}  // namespace streamrev::detail
