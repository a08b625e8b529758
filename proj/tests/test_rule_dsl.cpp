#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hrtpp/rule_dsl.hpp"
#include "oracles.hpp"

using namespace hrtpp;

namespace {

NameTable abc_table() { return NameTable({"A", "B", "C", "Y"}); }

} // namespace

TEST_CASE("basic parse") {
    const NameTable names = abc_table();
    const Rule r = parse_rule("A before B -> Y", names);
    const Rule expected =
        Rule::combine(TemporalRelation::Before, Rule::leaf(1, 4), Rule::leaf(2, 4));
    CHECK(r == canonicalize_rule(expected));
    CHECK(r.target() == 4);
}

TEST_CASE("after flips to before") {
    const NameTable names = abc_table();
    CHECK(parse_rule("B after A -> Y", names) == parse_rule("A before B -> Y", names));
}

TEST_CASE("parenthesized nesting") {
    const NameTable names = abc_table();
    const Rule r = parse_rule("(A before B) equal C -> Y", names);
    CHECK(r.leaf_count() == 3);
    const Rule expected = Rule::combine(
        TemporalRelation::Equal,
        Rule::combine(TemporalRelation::Before, Rule::leaf(1, 4), Rule::leaf(2, 4)),
        Rule::leaf(3, 4));
    CHECK(r == canonicalize_rule(expected));
}

TEST_CASE("left association without parentheses") {
    const NameTable names = abc_table();
    CHECK(parse_rule("A before B equal C -> Y", names) ==
          parse_rule("(A before B) equal C -> Y", names));
}

TEST_CASE("right-nested structure needs parentheses and round-trips") {
    const NameTable names = abc_table();
    const Rule r = parse_rule("A before (B equal C) -> Y", names);
    const std::string text = print_rule(r, names);
    CHECK(text == "A before (B equal C) -> Y");
    CHECK(parse_rule(text, names) == r);
}

TEST_CASE("print emits canonical operand order") {
    const NameTable names = abc_table();
    const Rule reversed =
        Rule::combine(TemporalRelation::Equal, Rule::leaf(2, 4), Rule::leaf(1, 4));
    CHECK(print_rule(reversed, names) == "A equal B -> Y");
}

TEST_CASE("parse errors carry byte offsets") {
    const NameTable names = abc_table();
    CHECK_THROWS_AS((void)parse_rule("A frobs B -> Y", names), ParseError);
    try {
        (void)parse_rule("A before Q -> Y", names);
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.offset() == 9);
    }
    CHECK_THROWS_AS((void)parse_rule("A before B", names), ParseError);        // missing arrow
    CHECK_THROWS_AS((void)parse_rule("A before B -> ", names), ParseError);    // missing target
    CHECK_THROWS_AS((void)parse_rule("(A before B -> Y", names), ParseError);  // unbalanced paren
    CHECK_THROWS_AS((void)parse_rule("A before B -> Y C", names), ParseError); // trailing junk
}

TEST_CASE("target in body is rejected") {
    const NameTable names = abc_table();
    CHECK_THROWS_AS((void)parse_rule("A before Y -> Y", names), ParseError);
}

TEST_CASE("leaf-count overflow is rejected") {
    const NameTable names = abc_table();
    CHECK_THROWS_AS((void)parse_rule("A and B and C and A -> Y", names), ParseError);
    CHECK_THROWS_AS((void)parse_rule("A and B and C -> Y", names, 2), ParseError);
    CHECK_NOTHROW((void)parse_rule("A and B -> Y", names, 2));
}

TEST_CASE("names with spaces match longest-first") {
    const NameTable names(
        {"Heart Rate", "Heart Rate Low", "Anion gap High", "Dead"});
    const Rule r = parse_rule("Anion gap High before Heart Rate Low -> Dead", names);
    CHECK(r.leaf_types() == std::vector<int>{3, 2});
    CHECK(print_rule(r, names) == "Anion gap High before Heart Rate Low -> Dead");
    // the shorter prefix name still parses where it stands alone
    const Rule r2 = parse_rule("Heart Rate equal Anion gap High -> Dead", names);
    CHECK(canonicalize_rule(r2).leaf_types() == std::vector<int>{1, 3});
}

TEST_CASE("relation keywords are reserved as names") {
    CHECK_THROWS_AS((void)NameTable({"and", "Y"}), ValidationError);
    CHECK_THROWS_AS((void)NameTable({"A", "A"}), ValidationError);   // duplicate
    CHECK_THROWS_AS(NameTable({"A(", "B"}), ValidationError);  // parenthesis in name
}

TEST_CASE("names containing keyword substrings still lex") {
    const NameTable names({"Anderson", "Bandage", "Y"});
    const Rule r = parse_rule("Anderson and Bandage -> Y", names);
    CHECK(r.leaf_count() == 2);
}

TEST_CASE("mixed relations without parentheses raise a lint warning") {
    const NameTable names = abc_table();
    const ParsedRuleLine mixed = parse_rule_line("A before B equal C -> Y", names);
    REQUIRE(mixed.warnings.size() == 1);
    CHECK(mixed.warnings[0].find("parenthesize") != std::string::npos);
    // explicit parentheses silence it
    CHECK(parse_rule_line("(A before B) equal C -> Y", names).warnings.empty());
    // a uniform chain is unambiguous
    CHECK(parse_rule_line("A and B and C -> Y", names).warnings.empty());
}

TEST_CASE("weight annotations parse and comments are ignored") {
    const NameTable names = abc_table();
    const ParsedRuleLine line = parse_rule_line("A before B -> Y # weight=1.25", names);
    CHECK(line.weight.has_value());
    CHECK(*line.weight == doctest::Approx(1.25));
    const ParsedRuleLine plain = parse_rule_line("A before B -> Y", names);
    CHECK_FALSE(plain.weight.has_value());
}

TEST_CASE("rule files skip blanks and comment lines") {
    const NameTable names = abc_table();
    const auto rules = parse_rule_file("# header\n\nA before B -> Y\nB equal C -> Y # weight=2\n",
                                       names);
    REQUIRE(rules.size() == 2);
    CHECK(rules[1].weight.has_value());
    CHECK_THROWS_AS((void)parse_rule_file("A before B -> Y\ngarbage\n", names), ParseError);
}

TEST_CASE("parser turns arbitrary garbage into structured errors, never crashes") {
    const NameTable names({"A", "B", "Heart Rate Low", "Y"});
    std::mt19937_64 rng(404);
    const std::string alphabet = "AB YHeart Rtelow->()#andbeforequal0123.,";
    std::uniform_int_distribution<std::size_t> len(0, 40);
    std::uniform_int_distribution<std::size_t> pick(0, alphabet.size() - 1);
    int parsed = 0, rejected = 0;
    for (int i = 0; i < 500; ++i) {
        std::string line;
        const std::size_t n = len(rng);
        for (std::size_t c = 0; c < n; ++c) line += alphabet[pick(rng)];
        try {
            (void)parse_rule(line, names);
            ++parsed;
        } catch (const ParseError&) {
            ++rejected; // structured failure with an offset is the contract
        }
    }
    CHECK(parsed + rejected == 500);
    CHECK(rejected > 400); // nearly all garbage must be rejected
}

TEST_CASE("round-trip identity on 500 random rules") {
    std::mt19937_64 rng(2024);
    const NameTable names({"A", "B", "C", "D", "Heart Rate Low", "Y"});
    for (int i = 0; i < 500; ++i) {
        const Rule r = oracles::random_rule(rng, 6, 6, 3);
        const Rule canon = canonicalize_rule(r);
        const std::string text = print_rule(r, names);
        CHECK(parse_rule(text, names) == canon);
        // printing the canonical form is stable
        CHECK(print_rule(canon, names) == text);
    }
}
