#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hrtpp/core.hpp"

namespace hrtpp {

// Bidirectional predicate-name table; names[k-1] is the name of type k.
// Names may contain spaces ("Heart Rate Low") and are matched longest-first;
// the relation keywords are reserved.
class NameTable {
public:
    NameTable() = default;
    explicit NameTable(std::vector<std::string> names);

    [[nodiscard]] static NameTable defaults(int num_types); // "X1".."X<K>"

    [[nodiscard]] int size() const noexcept { return static_cast<int>(names_.size()); }
    [[nodiscard]] const std::string& name_of(int type) const;
    [[nodiscard]] std::optional<int> id_of(std::string_view name) const;
    [[nodiscard]] const std::vector<std::string>& names() const noexcept { return names_; }

    // Names sorted by descending length, for greedy lexing.
    [[nodiscard]] const std::vector<int>& ids_by_length() const noexcept { return by_length_; }

private:
    std::vector<std::string> names_;
    std::vector<int> by_length_;
};

// Grammar:
//   rule := expr '->' atom
//   expr := term (REL term)*          REL one of: and | before | after | equal
//   term := atom | '(' expr ')'
// Relations share one precedence level and associate left; 'after' is
// rewritten as 'before' with swapped operands. A trailing '# ...' comment is
// ignored. The result is canonical.
[[nodiscard]] Rule parse_rule(std::string_view source, const NameTable& names,
                              int max_predicates = Rule::kDefaultMaxPredicates);

// Line form used by rule files: "rule-text [# weight=<float>]".
struct ParsedRuleLine {
    Rule rule;
    std::optional<double> weight;
    // lint notes, e.g. mixed relations relying on left association
    std::vector<std::string> warnings;
};
[[nodiscard]] ParsedRuleLine parse_rule_line(std::string_view line, const NameTable& names,
                                             int max_predicates = Rule::kDefaultMaxPredicates);

// Minimal-parentheses rendering of the canonical form;
// parse_rule(print_rule(r)) == canonicalize_rule(r).
[[nodiscard]] std::string print_rule(const Rule& rule, const NameTable& names);

// Rule-file helpers: one rule per line, '#' comments and blank lines allowed.
[[nodiscard]] std::vector<ParsedRuleLine> parse_rule_file(std::string_view text,
                                                          const NameTable& names,
                                                          int max_predicates = Rule::kDefaultMaxPredicates);

} // namespace hrtpp
