#include "rpmdag/dag_text.hpp"

#include "rpmdag/error.hpp"

#include <fstream>
#include <sstream>

namespace rpmdag {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

bool valid_token(std::string_view t) {
  if (t.empty()) return false;
  for (char c : t) {
    bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') ||
              c == '_' || c == '-' || c == '.';
    if (!ok) return false;
  }
  return true;
}

std::string where(std::size_t line_no) { return "line " + std::to_string(line_no) + ": "; }

}  // namespace

std::string LabeledDag::label(const BlockId& id) const {
  auto it = labels.find(id);
  return it == labels.end() ? id.hex() : it->second;
}

const BlockId& LabeledDag::id(const std::string& token) const {
  auto it = ids.find(token);
  if (it == ids.end()) throw Error(Errc::UnknownBlock, "no block labeled '" + token + "'");
  return it->second;
}

LabeledDag parse_dag_text(std::string_view text) {
  LabeledDag out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    ++line_no;

    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;

    auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      throw Error(Errc::ParseError, where(line_no) + "expected '<id>: <parents>'");
    }
    std::string token(trim(line.substr(0, colon)));
    if (!valid_token(token)) throw Error(Errc::ParseError, where(line_no) + "bad block token '" + token + "'");
    if (out.ids.count(token)) throw Error(Errc::DuplicateBlock, where(line_no) + token);

    std::vector<BlockId> parents;
    std::string_view rest = trim(line.substr(colon + 1));
    while (!rest.empty()) {
      auto comma = rest.find(',');
      std::string parent(trim(rest.substr(0, comma)));
      rest = comma == std::string_view::npos ? std::string_view{} : trim(rest.substr(comma + 1));
      if (!valid_token(parent)) {
        throw Error(Errc::ParseError, where(line_no) + "bad parent token '" + parent + "'");
      }
      auto it = out.ids.find(parent);
      if (it == out.ids.end()) {
        throw Error(Errc::MissingParent, where(line_no) + parent + " (child " + token + ")");
      }
      parents.push_back(it->second);
    }

    Block block = Block::make(std::move(parents), {}, 0.0, token);
    try {
      out.dag.add_block(block);
    } catch (const Error& e) {
      throw Error(e.code(), where(line_no) + e.what());
    }
    out.labels.emplace(block.id, token);
    out.ids.emplace(token, block.id);
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::IoError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

LabeledDag load_dag_file(const std::filesystem::path& path) { return parse_dag_text(read_text_file(path)); }

std::string to_dag_text(const LabeledDag& dag) {
  std::string out;
  for (const auto& id : dag.dag.insertion_order()) {
    const Block& b = dag.dag.block(id);
    out += dag.label(id);
    out += ':';
    for (std::size_t i = 0; i < b.parents.size(); ++i) {
      out += i == 0 ? " " : ",";
      out += dag.label(b.parents[i]);
    }
    out += '\n';
  }
  return out;
}

std::string to_dot(const LabeledDag& dag) {
  std::string out = "digraph blockdag {\n  rankdir=RL;\n";
  for (const auto& id : dag.dag.insertion_order()) {
    out += "  \"" + dag.label(id) + "\";\n";
  }
  for (const auto& id : dag.dag.insertion_order()) {
    for (const auto& p : dag.dag.block(id).parents) {
      out += "  \"" + dag.label(id) + "\" -> \"" + dag.label(p) + "\";\n";
    }
  }
  out += "}\n";
  return out;
}

}  // namespace rpmdag
