#pragma once

#include "rpmdag/dag.hpp"

#include <filesystem>
#include <map>
#include <string>
#include <string_view>

namespace rpmdag {

/// A DAG together with the human tokens it was imported from.
struct LabeledDag {
  BlockDag dag;
  std::map<BlockId, std::string> labels;
  std::map<std::string, BlockId> ids;

  /// Token if the block was imported from text, otherwise the full hex id.
  std::string label(const BlockId& id) const;
  const BlockId& id(const std::string& token) const;
};

/// Parses the line format `<id>: <parent>,<parent>`; `<id>:` alone is the
/// genesis. Lines must be parents-first. Blank lines and `#` comments are
/// ignored. Each token becomes a block with no payload whose creator is the
/// token, so distinct tokens always map to distinct digests.
LabeledDag parse_dag_text(std::string_view text);
LabeledDag load_dag_file(const std::filesystem::path& path);

/// Inverse of parse_dag_text in insertion order. Unlabeled blocks are written
/// as hex digests.
std::string to_dag_text(const LabeledDag& dag);
/// Graphviz rendering with edges child -> parent.
std::string to_dot(const LabeledDag& dag);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace rpmdag
