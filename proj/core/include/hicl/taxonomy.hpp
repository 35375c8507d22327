#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace hicl {

using NodeId = std::uint32_t;

/// The virtual root. It sits at level 0 and is the Current Label when the
/// first hierarchy level is predicted.
inline constexpr NodeId kRootId = 0;
inline constexpr std::string_view kRootName = "Root";

struct LabelNode {
  NodeId id = kRootId;
  std::string name;
  int level = 0;
  std::optional<NodeId> parent;  // empty only for the virtual root
  std::optional<std::string> description;
};

/// One node id per level, level 1 first.
struct LabelPath {
  std::vector<NodeId> nodes;

  std::size_t depth() const { return nodes.size(); }
  NodeId leaf() const { return nodes.back(); }
  NodeId at_level(int level) const { return nodes.at(static_cast<std::size_t>(level - 1)); }

  friend auto operator<=>(const LabelPath&, const LabelPath&) = default;
  friend bool operator==(const LabelPath&, const LabelPath&) = default;
};

struct LabelPathHash {
  std::size_t operator()(const LabelPath& path) const noexcept;
};

enum class LabelTextMode { OriginalLeaf, PathText, Description };

LabelTextMode parse_label_text_mode(std::string_view text);
std::string_view to_string(LabelTextMode mode);

/// Fixed-depth label tree.
///
/// File grammar (UTF-8, one record per line, tab separated):
///
///     name <TAB> parent [<TAB> description]
///
/// `parent` is `ROOT`, a node name that is unique in the file, or a
/// slash-qualified path from the top level (`Science/Physics`) when the
/// bare name is ambiguous. Blank lines and lines starting with `#` are
/// skipped. In descriptions `\t`, `\n` and `\\` are escapes. Names may not
/// contain `/` or tabs.
///
/// Node ids are dense: the virtual root is 0 and records get 1..N in file
/// order. All leaves must sit at the same depth.
class Taxonomy {
 public:
  Taxonomy();

  static Taxonomy parse(std::string_view text);
  static Taxonomy load(const std::filesystem::path& file);

  std::string serialize() const;
  void save(const std::filesystem::path& file) const;

  /// Depth C: number of levels below the root.
  int depth() const { return depth_; }
  std::size_t size() const { return nodes_.size(); }

  const LabelNode& node(NodeId id) const;
  bool contains(NodeId id) const { return id < nodes_.size(); }
  bool is_leaf(NodeId id) const { return children_of(id).empty(); }

  /// Direct children, ascending id. Throws NotFoundError for unknown ids.
  std::span<const NodeId> children_of(NodeId id) const;

  /// Nodes at `level` (1..C) in ascending id order.
  std::span<const NodeId> nodes_at_level(int level) const;
  std::size_t level_width(int level) const { return nodes_at_level(level).size(); }
  /// Position of a node inside nodes_at_level(node.level); used as class index.
  std::size_t index_in_level(NodeId id) const;

  std::span<const NodeId> leaves() const { return nodes_at_level(depth_); }
  LabelPath path_to(NodeId node) const;
  std::vector<LabelPath> leaf_paths() const;

  bool is_valid_path(const LabelPath& path) const;
  /// Throws FormatError describing the first violation.
  void validate_path(const LabelPath& path) const;

  std::optional<NodeId> find_child(NodeId parent, std::string_view name) const;
  /// Resolves level-1..C names into a path; empty if any step is missing.
  std::optional<LabelPath> resolve_names(std::span<const std::string> names) const;
  std::vector<std::string> names_of(const LabelPath& path) const;

  /// "leaf of mid of top".
  std::string path_text(const LabelPath& path) const;
  std::string label_text(const LabelPath& path, LabelTextMode mode) const;

  /// "top/mid/leaf".
  std::string qualified_name(NodeId id) const;
  /// Bare name when no other node shares it, otherwise the qualified name.
  std::string display_name(NodeId id) const;

  void set_description(NodeId id, std::string description);
  bool all_leaves_described() const;

 private:
  void finalize();

  std::vector<LabelNode> nodes_;
  std::vector<std::vector<NodeId>> children_;
  std::vector<std::vector<NodeId>> by_level_;  // index 0 holds the root
  std::vector<std::size_t> index_in_level_;
  std::vector<bool> name_collides_;
  int depth_ = 0;
};

}  // namespace hicl
