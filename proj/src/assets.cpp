#include "assets.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "streamrev/error.hpp"

namespace streamrev::detail {

std::string load_asset(std::string_view relative) {
  if (const char* dir = std::getenv("STREAMREV_ASSET_DIR"); dir != nullptr && *dir != '\0') {
    std::filesystem::path p = std::filesystem::path(dir) / std::string(relative);
    if (std::ifstream in(p); in) {
      std::ostringstream ss;
      ss << in.rdbuf();
      return ss.str();
    }
  }
  if (auto data = embedded_asset(relative)) return std::string(*data);
  throw ConfigError("asset not found: " + std::string(relative));
}

}  // namespace streamrev::detail
