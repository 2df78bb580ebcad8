#pragma once

#include <CLI11.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>

namespace rpmdag::cli {

using ConfigMap = std::map<std::string, std::string>;

/// `key=value` lines; blank lines and `#` comments are ignored.
ConfigMap parse_config_text(std::string_view text);
ConfigMap load_config_file(const std::filesystem::path& path);

/// `--config` from argv, else RPMDAG_CONFIG.
std::optional<std::string> find_config_path(int argc, const char* const* argv);

/// Installs file values as defaults on every option with a matching long
/// name. Throws InvalidConfig naming the first unknown key.
void apply_config(CLI::App& app, const ConfigMap& config);

/// RPMDAG_<NAME> for `--name-with-dashes`.
std::string env_name(std::string_view flag);

}  // namespace rpmdag::cli
