#include <gtest/gtest.h>

#include "hicl/error.hpp"
#include "hicl/taxonomy.hpp"
#include "test_util.hpp"

using namespace hicl;

namespace {

std::string parse_error(std::string_view text) {
  try {
    Taxonomy::parse(text);
  } catch (const FormatError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST(Taxonomy, ParsesLevelsAndIds) {
  Taxonomy tax = test::small_taxonomy();
  EXPECT_EQ(tax.depth(), 2);
  EXPECT_EQ(tax.size(), 7u);  // root + 6
  EXPECT_EQ(tax.node(1).name, "CS");
  EXPECT_EQ(tax.node(3).level, 2);
  EXPECT_EQ(tax.level_width(1), 2u);
  EXPECT_EQ(tax.level_width(2), 4u);
  EXPECT_EQ(tax.leaves().size(), 4u);
  EXPECT_TRUE(tax.is_leaf(3));
  EXPECT_FALSE(tax.is_leaf(1));
  auto kids = tax.children_of(kRootId);
  ASSERT_EQ(kids.size(), 2u);
  EXPECT_EQ(kids[0], 1u);
  EXPECT_EQ(tax.index_in_level(5), 2u);
}

TEST(Taxonomy, PathsAndNames) {
  Taxonomy tax = test::small_taxonomy();
  LabelPath p = tax.path_to(4);
  ASSERT_EQ(p.depth(), 2u);
  EXPECT_EQ(p.at_level(1), 1u);
  EXPECT_EQ(p.leaf(), 4u);
  EXPECT_EQ(tax.path_text(p), "DB of CS");
  EXPECT_EQ(tax.qualified_name(4), "CS/DB");
  EXPECT_EQ(tax.label_text(p, LabelTextMode::OriginalLeaf), "DB");
  EXPECT_EQ(tax.label_text(p, LabelTextMode::PathText), "DB of CS");
  EXPECT_EQ(tax.label_text(p, LabelTextMode::Description), "Database papers about storage and queries.");
  std::vector<std::string> names{"Bio", "Ecology"};
  auto resolved = tax.resolve_names(names);
  ASSERT_TRUE(resolved);
  EXPECT_EQ(resolved->leaf(), 6u);
  std::vector<std::string> bad{"CS", "Ecology"};
  EXPECT_FALSE(tax.resolve_names(bad));
  EXPECT_TRUE(tax.is_valid_path(p));
  EXPECT_FALSE(tax.is_valid_path(LabelPath{{2, 4}}));
  EXPECT_THROW(tax.validate_path(LabelPath{{1}}), FormatError);
  EXPECT_EQ(tax.leaf_paths().size(), 4u);
}

TEST(Taxonomy, MissingDescriptionIsNotFound) {
  Taxonomy tax = Taxonomy::parse("A\tROOT\nB\tA\n");
  EXPECT_THROW(tax.label_text(tax.path_to(2), LabelTextMode::Description), NotFoundError);
  EXPECT_FALSE(tax.all_leaves_described());
  tax.set_description(2, "about b");
  EXPECT_TRUE(tax.all_leaves_described());
}

TEST(Taxonomy, RejectsMalformedTrees) {
  EXPECT_NE(parse_error("A\tROOT\nB\tZ\n").find("orphan"), std::string::npos);
  EXPECT_NE(parse_error("A\tB\nB\tA\n").find("cycle"), std::string::npos);
  EXPECT_NE(parse_error("A\tA\n").find("cycle"), std::string::npos);
  EXPECT_NE(parse_error("A\tROOT\nB\tA\nC\tROOT\n").find("ragged"), std::string::npos);
  EXPECT_NE(parse_error("A\tROOT\nB\tA\nB\tA\n").find("duplicate sibling"), std::string::npos);
  EXPECT_NE(parse_error("only-one-field\n").find("line 1"), std::string::npos);
  EXPECT_NE(parse_error("# nothing\n\n").find("no nodes"), std::string::npos);
  EXPECT_NE(parse_error("A/B\tROOT\n").find("contains '/'"), std::string::npos);
}

TEST(Taxonomy, AmbiguousParentNeedsQualifiedPath) {
  const std::string base = "X\tROOT\nY\tROOT\nShared\tX\nShared\tY\n";
  EXPECT_NE(parse_error(base + "Leaf\tShared\n").find("ambiguous"), std::string::npos);
  // ragged otherwise, so give every level-2 node a child
  Taxonomy tax = Taxonomy::parse(base + "Leaf\tX/Shared\nOther\tY/Shared\n");
  EXPECT_EQ(tax.depth(), 3);
  EXPECT_EQ(tax.qualified_name(5), "X/Shared/Leaf");
  EXPECT_EQ(tax.display_name(3), "X/Shared");
  EXPECT_EQ(tax.display_name(5), "Leaf");
}

TEST(Taxonomy, SerializeRoundTripsWithEscapes) {
  Taxonomy tax = Taxonomy::parse(
      "# comment\n"
      "X\tROOT\n"
      "Y\tROOT\n"
      "Shared\tX\tline one\\nline two\\twith tab \\\\ slash\n"
      "Shared\tY\n");
  EXPECT_EQ(*tax.node(3).description, "line one\nline two\twith tab \\ slash");
  Taxonomy again = Taxonomy::parse(tax.serialize());
  ASSERT_EQ(again.size(), tax.size());
  for (NodeId id = 1; id < tax.size(); ++id) {
    EXPECT_EQ(again.node(id).name, tax.node(id).name);
    EXPECT_EQ(again.node(id).parent, tax.node(id).parent);
    EXPECT_EQ(again.node(id).description, tax.node(id).description);
  }
  EXPECT_EQ(again.serialize(), tax.serialize());
}

TEST(Taxonomy, ParentsMayFollowChildren) {
  Taxonomy tax = Taxonomy::parse("Leaf\tMid\nMid\tTop\nTop\tROOT\n");
  EXPECT_EQ(tax.depth(), 3);
  EXPECT_EQ(tax.node(1).level, 3);
  EXPECT_EQ(tax.path_text(tax.path_to(1)), "Leaf of Mid of Top");
}

TEST(Taxonomy, LabelTextModeNames) {
  EXPECT_EQ(parse_label_text_mode("leaf"), LabelTextMode::OriginalLeaf);
  EXPECT_EQ(parse_label_text_mode("path"), LabelTextMode::PathText);
  EXPECT_EQ(parse_label_text_mode("description"), LabelTextMode::Description);
  EXPECT_THROW(parse_label_text_mode("other"), ConfigError);
}
