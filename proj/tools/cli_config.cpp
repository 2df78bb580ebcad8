#include "cli_config.hpp"

#include "rpmdag/dag_text.hpp"
#include "rpmdag/error.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <functional>

namespace rpmdag::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

void collect(CLI::App* app, std::vector<CLI::Option*>& out) {
  for (auto* opt : app->get_options()) out.push_back(opt);
  for (auto* sub : app->get_subcommands([](CLI::App*) { return true; })) collect(sub, out);
}

}  // namespace

ConfigMap parse_config_text(std::string_view text) {
  ConfigMap out;
  std::size_t line_no = 0, start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string line = trim(text.substr(start, end - start));
    start = end + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (eq == std::string::npos) throw Error(Errc::InvalidConfig, where + "expected key=value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    if (key.empty()) throw Error(Errc::InvalidConfig, where + "empty key");
    if (!out.emplace(key, trim(std::string_view(line).substr(eq + 1))).second)
      throw Error(Errc::InvalidConfig, where + "duplicate key '" + key + "'");
  }
  return out;
}

ConfigMap load_config_file(const std::filesystem::path& path) {
  try {
    return parse_config_text(read_text_file(path));
  } catch (const Error& e) {
    if (e.code() == Errc::InvalidConfig) throw;
    throw Error(Errc::InvalidConfig, e.what());
  }
}

std::optional<std::string> find_config_path(int argc, const char* const* argv) {
  for (int i = 1; i < argc; ++i) {
    std::string_view a = argv[i];
    if (a == "--config" && i + 1 < argc) return std::string(argv[i + 1]);
    if (a.rfind("--config=", 0) == 0) return std::string(a.substr(9));
  }
  if (const char* env = std::getenv("RPMDAG_CONFIG"); env && *env) return std::string(env);
  return std::nullopt;
}

void apply_config(CLI::App& app, const ConfigMap& config) {
  std::vector<CLI::Option*> options;
  collect(&app, options);
  for (const auto& [key, value] : config) {
    bool matched = false;
    for (auto* opt : options) {
      const auto& names = opt->get_lnames();
      if (names.empty() || names.front() != key || key == "config" || key == "help") continue;
      matched = true;
      try {
        opt->default_val(value);
      } catch (const CLI::Error& e) {
        throw Error(Errc::InvalidConfig, "config key '" + key + "': " + e.what());
      }
    }
    if (!matched) throw Error(Errc::InvalidConfig, "unknown config key '" + key + "'");
  }
}

std::string env_name(std::string_view flag) {
  while (!flag.empty() && flag.front() == '-') flag.remove_prefix(1);
  std::string out = "RPMDAG_";
  for (char c : flag) out += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace rpmdag::cli
