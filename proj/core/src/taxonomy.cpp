#include "hicl/taxonomy.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <unordered_map>

#include "hicl/error.hpp"
#include "hicl/io.hpp"
#include "text_util.hpp"

namespace hicl {

namespace {

std::string unescape(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '\\' && i + 1 < s.size()) {
      char n = s[++i];
      if (n == 't') out.push_back('\t');
      else if (n == 'n') out.push_back('\n');
      else out.push_back(n);
    } else {
      out.push_back(s[i]);
    }
  }
  return out;
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    if (c == '\t') out += "\\t";
    else if (c == '\n') out += "\\n";
    else if (c == '\\') out += "\\\\";
    else out.push_back(c);
  }
  return out;
}

struct Record {
  std::string name;
  std::string parent_ref;
  std::optional<std::string> description;
  std::size_t line = 0;
};

}  // namespace

std::size_t LabelPathHash::operator()(const LabelPath& path) const noexcept {
  std::size_t h = 0xcbf29ce484222325ULL;
  for (NodeId id : path.nodes) {
    h ^= id;
    h *= 0x100000001b3ULL;
  }
  return h;
}

LabelTextMode parse_label_text_mode(std::string_view text) {
  if (text == "leaf" || text == "original") return LabelTextMode::OriginalLeaf;
  if (text == "path") return LabelTextMode::PathText;
  if (text == "description") return LabelTextMode::Description;
  throw ConfigError("unknown label text mode '" + std::string(text) + "' (expected leaf|path|description)");
}

std::string_view to_string(LabelTextMode mode) {
  switch (mode) {
    case LabelTextMode::OriginalLeaf: return "leaf";
    case LabelTextMode::PathText: return "path";
    case LabelTextMode::Description: return "description";
  }
  return "?";
}

Taxonomy::Taxonomy() {
  nodes_.push_back(LabelNode{kRootId, std::string(kRootName), 0, std::nullopt, std::nullopt});
  finalize();
}

Taxonomy Taxonomy::parse(std::string_view text) {
  std::vector<Record> records;
  std::size_t line_no = 0;
  for (std::string_view raw : detail::split(text, '\n')) {
    ++line_no;
    if (!raw.empty() && raw.back() == '\r') raw.remove_suffix(1);
    std::string_view stripped = detail::trim(raw);
    if (stripped.empty() || stripped.front() == '#') continue;
    auto fields = detail::split(raw, '\t');
    if (fields.size() < 2 || fields.size() > 3) {
      throw FormatError("taxonomy line " + std::to_string(line_no) +
                        ": expected 'name<TAB>parent[<TAB>description]'");
    }
    Record r;
    r.name = std::string(detail::trim(fields[0]));
    r.parent_ref = std::string(detail::trim(fields[1]));
    r.line = line_no;
    if (r.name.empty()) throw FormatError("taxonomy line " + std::to_string(line_no) + ": empty name");
    if (r.name.find('/') != std::string::npos) {
      throw FormatError("taxonomy line " + std::to_string(line_no) + ": name '" + r.name + "' contains '/'");
    }
    if (fields.size() == 3 && !detail::trim(fields[2]).empty()) {
      r.description = unescape(detail::trim(fields[2]));
    }
    records.push_back(std::move(r));
  }
  if (records.empty()) throw FormatError("taxonomy has no nodes");

  const std::size_t n = records.size();
  // Record i becomes node i + 1. kUnresolved marks parents not yet known.
  constexpr std::size_t kUnresolved = static_cast<std::size_t>(-1);
  std::vector<std::size_t> parent(n, kUnresolved);
  std::unordered_map<std::string, std::vector<std::size_t>> by_name;
  for (std::size_t i = 0; i < n; ++i) by_name[records[i].name].push_back(i + 1);

  std::vector<std::size_t> qualified;
  for (std::size_t i = 0; i < n; ++i) {
    const Record& r = records[i];
    if (r.parent_ref == "ROOT") {
      parent[i] = kRootId;
    } else if (r.parent_ref.find('/') != std::string::npos) {
      qualified.push_back(i);
    } else {
      auto it = by_name.find(r.parent_ref);
      if (it == by_name.end()) {
        throw FormatError("taxonomy line " + std::to_string(r.line) + ": orphan node '" + r.name +
                          "', parent '" + r.parent_ref + "' does not exist");
      }
      if (it->second.size() > 1) {
        throw FormatError("taxonomy line " + std::to_string(r.line) + ": parent '" + r.parent_ref +
                          "' is ambiguous; use a slash-qualified path");
      }
      parent[i] = it->second.front();
    }
  }

  // Qualified references are resolved by walking down from the root through
  // already-resolved edges. Repeat until no further progress.
  bool progress = true;
  while (!qualified.empty() && progress) {
    progress = false;
    for (auto it = qualified.begin(); it != qualified.end();) {
      const Record& r = records[*it];
      std::size_t cur = kRootId;
      bool found = true;
      for (std::string_view part : detail::split(r.parent_ref, '/')) {
        std::size_t next = kUnresolved;
        for (std::size_t j = 0; j < n; ++j) {
          if (parent[j] == cur && records[j].name == part) {
            next = j + 1;
            break;
          }
        }
        if (next == kUnresolved) {
          found = false;
          break;
        }
        cur = next;
      }
      if (found) {
        parent[*it] = cur;
        it = qualified.erase(it);
        progress = true;
      } else {
        ++it;
      }
    }
  }
  if (!qualified.empty()) {
    const Record& r = records[qualified.front()];
    throw FormatError("taxonomy line " + std::to_string(r.line) + ": orphan node '" + r.name +
                      "', parent path '" + r.parent_ref + "' does not resolve");
  }

  // Cycle check: every node must reach the root within n steps.
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t cur = i + 1;
    std::size_t steps = 0;
    while (cur != kRootId) {
      if (parent[cur - 1] == i + 1 || ++steps > n) {
        throw FormatError("taxonomy line " + std::to_string(records[i].line) + ": cycle detected at node '" +
                          records[i].name + "'");
      }
      cur = parent[cur - 1];
    }
  }

  Taxonomy tax;
  tax.nodes_.resize(n + 1);
  for (std::size_t i = 0; i < n; ++i) {
    LabelNode& node = tax.nodes_[i + 1];
    node.id = static_cast<NodeId>(i + 1);
    node.name = records[i].name;
    node.parent = static_cast<NodeId>(parent[i]);
    node.description = records[i].description;
  }
  // Levels: parents may appear after children, so resolve by walking up.
  for (std::size_t i = 1; i <= n; ++i) {
    int level = 0;
    for (std::size_t cur = i; cur != kRootId; cur = *tax.nodes_[cur].parent) ++level;
    tax.nodes_[i].level = level;
  }
  // Sibling names must be unique.
  std::map<std::pair<NodeId, std::string>, std::size_t> seen;
  for (std::size_t i = 0; i < n; ++i) {
    auto key = std::make_pair(*tax.nodes_[i + 1].parent, records[i].name);
    auto [it, inserted] = seen.emplace(key, records[i].line);
    if (!inserted) {
      throw FormatError("taxonomy line " + std::to_string(records[i].line) + ": duplicate sibling name '" +
                        records[i].name + "' (first defined on line " + std::to_string(it->second) + ")");
    }
  }
  tax.finalize();
  return tax;
}

void Taxonomy::finalize() {
  const std::size_t n = nodes_.size();
  children_.assign(n, {});
  for (const LabelNode& node : nodes_) {
    if (node.parent) children_[*node.parent].push_back(node.id);
  }
  int max_level = 0;
  for (const LabelNode& node : nodes_) max_level = std::max(max_level, node.level);
  depth_ = max_level;
  for (const LabelNode& node : nodes_) {
    if (node.id != kRootId && children_[node.id].empty() && node.level != depth_) {
      throw FormatError("taxonomy is ragged: leaf '" + qualified_name(node.id) + "' sits at level " +
                        std::to_string(node.level) + " but the depth is " + std::to_string(depth_));
    }
  }
  by_level_.assign(static_cast<std::size_t>(depth_) + 1, {});
  index_in_level_.assign(n, 0);
  for (const LabelNode& node : nodes_) {
    auto& bucket = by_level_[static_cast<std::size_t>(node.level)];
    index_in_level_[node.id] = bucket.size();
    bucket.push_back(node.id);
  }
  std::unordered_map<std::string, int> name_count;
  for (const LabelNode& node : nodes_) ++name_count[node.name];
  name_collides_.assign(n, false);
  for (const LabelNode& node : nodes_) name_collides_[node.id] = name_count[node.name] > 1;
}

Taxonomy Taxonomy::load(const std::filesystem::path& file) {
  return parse(read_text_file(file));
}

std::string Taxonomy::serialize() const {
  std::ostringstream out;
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    const LabelNode& node = nodes_[i];
    out << node.name << '\t';
    if (*node.parent == kRootId) out << "ROOT";
    else out << qualified_name(*node.parent);
    if (node.description) out << '\t' << escape(*node.description);
    out << '\n';
  }
  return out.str();
}

void Taxonomy::save(const std::filesystem::path& file) const {
  write_file_atomic(file, serialize());
}

const LabelNode& Taxonomy::node(NodeId id) const {
  if (!contains(id)) throw NotFoundError("unknown label node id " + std::to_string(id));
  return nodes_[id];
}

std::span<const NodeId> Taxonomy::children_of(NodeId id) const {
  if (!contains(id)) throw NotFoundError("unknown label node id " + std::to_string(id));
  return children_[id];
}

std::span<const NodeId> Taxonomy::nodes_at_level(int level) const {
  if (level < 0 || level > depth_) throw NotFoundError("no level " + std::to_string(level) + " in taxonomy");
  return by_level_[static_cast<std::size_t>(level)];
}

std::size_t Taxonomy::index_in_level(NodeId id) const {
  node(id);
  return index_in_level_[id];
}

LabelPath Taxonomy::path_to(NodeId id) const {
  LabelPath path;
  for (NodeId cur = id; cur != kRootId; cur = *node(cur).parent) path.nodes.push_back(cur);
  std::reverse(path.nodes.begin(), path.nodes.end());
  return path;
}

std::vector<LabelPath> Taxonomy::leaf_paths() const {
  std::vector<LabelPath> out;
  for (NodeId leaf : leaves()) out.push_back(path_to(leaf));
  return out;
}

bool Taxonomy::is_valid_path(const LabelPath& path) const {
  if (path.nodes.size() != static_cast<std::size_t>(depth_)) return false;
  NodeId prev = kRootId;
  for (NodeId id : path.nodes) {
    if (!contains(id) || id == kRootId || nodes_[id].parent != prev) return false;
    prev = id;
  }
  return true;
}

void Taxonomy::validate_path(const LabelPath& path) const {
  if (path.nodes.size() != static_cast<std::size_t>(depth_)) {
    throw FormatError("label path length " + std::to_string(path.nodes.size()) + " != taxonomy depth " +
                      std::to_string(depth_));
  }
  NodeId prev = kRootId;
  for (NodeId id : path.nodes) {
    if (!contains(id) || id == kRootId) throw FormatError("label path has unknown node id " + std::to_string(id));
    if (nodes_[id].parent != prev) {
      throw FormatError("label path breaks at '" + nodes_[id].name + "': not a child of '" + nodes_[prev].name + "'");
    }
    prev = id;
  }
}

std::optional<NodeId> Taxonomy::find_child(NodeId parent, std::string_view name) const {
  for (NodeId c : children_of(parent)) {
    if (nodes_[c].name == name) return c;
  }
  return std::nullopt;
}

std::optional<LabelPath> Taxonomy::resolve_names(std::span<const std::string> names) const {
  LabelPath path;
  NodeId cur = kRootId;
  for (const std::string& name : names) {
    auto next = find_child(cur, name);
    if (!next) return std::nullopt;
    path.nodes.push_back(*next);
    cur = *next;
  }
  return path;
}

std::vector<std::string> Taxonomy::names_of(const LabelPath& path) const {
  std::vector<std::string> out;
  for (NodeId id : path.nodes) out.push_back(node(id).name);
  return out;
}

std::string Taxonomy::path_text(const LabelPath& path) const {
  std::string out;
  for (auto it = path.nodes.rbegin(); it != path.nodes.rend(); ++it) {
    if (!out.empty()) out += " of ";
    out += node(*it).name;
  }
  return out;
}

std::string Taxonomy::label_text(const LabelPath& path, LabelTextMode mode) const {
  switch (mode) {
    case LabelTextMode::OriginalLeaf: return node(path.leaf()).name;
    case LabelTextMode::PathText: return path_text(path);
    case LabelTextMode::Description: {
      const auto& d = node(path.leaf()).description;
      if (!d) throw NotFoundError("no description stored for label '" + qualified_name(path.leaf()) + "'");
      return *d;
    }
  }
  return {};
}

std::string Taxonomy::qualified_name(NodeId id) const {
  if (id == kRootId) return std::string(kRootName);
  std::string out;
  for (NodeId cur : path_to(id).nodes) {
    if (!out.empty()) out += '/';
    out += nodes_[cur].name;
  }
  return out;
}

std::string Taxonomy::display_name(NodeId id) const {
  const LabelNode& n = node(id);
  return name_collides_[id] ? qualified_name(id) : n.name;
}

void Taxonomy::set_description(NodeId id, std::string description) {
  node(id);
  nodes_[id].description = std::move(description);
}

bool Taxonomy::all_leaves_described() const {
  return std::all_of(leaves().begin(), leaves().end(),
                     [&](NodeId id) { return nodes_[id].description.has_value(); });
}

}  // namespace hicl
