#include "hrtpp/rule_dsl.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>

namespace hrtpp {

namespace {

const char* const kKeywords[] = {"and", "before", "after", "equal"};

bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
}

bool valid_name(const std::string& name) {
    if (name.empty()) return false;
    if (std::isspace(static_cast<unsigned char>(name.front())) ||
        std::isspace(static_cast<unsigned char>(name.back())))
        return false;
    for (const char* kw : kKeywords)
        if (name == kw) return false;
    return name.find_first_of("()#") == std::string::npos &&
           name.find("->") == std::string::npos;
}

} // namespace

NameTable::NameTable(std::vector<std::string> names) : names_(std::move(names)) {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (!valid_name(names_[i]))
            throw ValidationError("invalid predicate name: '" + names_[i] + "'");
        for (std::size_t j = 0; j < i; ++j)
            if (names_[j] == names_[i])
                throw ValidationError("duplicate predicate name: '" + names_[i] + "'");
    }
    by_length_.resize(names_.size());
    for (std::size_t i = 0; i < names_.size(); ++i) by_length_[i] = static_cast<int>(i + 1);
    std::stable_sort(by_length_.begin(), by_length_.end(), [&](int a, int b) {
        return names_[static_cast<std::size_t>(a - 1)].size() >
               names_[static_cast<std::size_t>(b - 1)].size();
    });
}

NameTable NameTable::defaults(int num_types) {
    std::vector<std::string> names;
    names.reserve(static_cast<std::size_t>(num_types));
    for (int k = 1; k <= num_types; ++k) names.push_back("X" + std::to_string(k));
    return NameTable(std::move(names));
}

const std::string& NameTable::name_of(int type) const {
    if (type < 1 || type > size())
        throw ValidationError("type id " + std::to_string(type) + " not in name table");
    return names_[static_cast<std::size_t>(type - 1)];
}

std::optional<int> NameTable::id_of(std::string_view name) const {
    for (std::size_t i = 0; i < names_.size(); ++i)
        if (names_[i] == name) return static_cast<int>(i + 1);
    return std::nullopt;
}

namespace {

enum class TokKind { Atom, Rel, After, LParen, RParen, Arrow, End };

struct Token {
    TokKind kind = TokKind::End;
    std::size_t offset = 0;
    int atom_type = 0;                                 // Atom
    TemporalRelation rel = TemporalRelation::And;      // Rel
};

class Lexer {
public:
    Lexer(std::string_view src, const NameTable& names) : src_(src), names_(names) { advance(); }

    [[nodiscard]] const Token& peek() const { return tok_; }

    Token take() {
        Token t = tok_;
        advance();
        return t;
    }

private:
    std::string_view src_;
    const NameTable& names_;
    std::size_t pos_ = 0;
    Token tok_;

    [[nodiscard]] bool at_boundary(std::size_t p) const {
        if (p >= src_.size()) return true;
        const char c = src_[p];
        if (std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' || c == '#')
            return true;
        return c == '-' && p + 1 < src_.size() && src_[p + 1] == '>';
    }

    void advance() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        tok_.offset = pos_;
        if (pos_ >= src_.size() || src_[pos_] == '#') { // trailing comment ends the line
            tok_.kind = TokKind::End;
            return;
        }
        const char c = src_[pos_];
        if (c == '(') { tok_.kind = TokKind::LParen; ++pos_; return; }
        if (c == ')') { tok_.kind = TokKind::RParen; ++pos_; return; }
        if (c == '-' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '>') {
            tok_.kind = TokKind::Arrow;
            pos_ += 2;
            return;
        }
        // relation keywords (whole words only)
        static const std::pair<const char*, TokKind> rels[] = {
            {"and", TokKind::Rel}, {"before", TokKind::Rel},
            {"after", TokKind::After}, {"equal", TokKind::Rel}};
        for (const auto& [word, kind] : rels) {
            const std::size_t len = std::string_view(word).size();
            if (src_.compare(pos_, len, word) == 0 &&
                (pos_ + len >= src_.size() || !is_word_char(src_[pos_ + len]))) {
                tok_.kind = kind;
                if (kind == TokKind::Rel) {
                    tok_.rel = word[0] == 'a' ? TemporalRelation::And
                               : word[0] == 'b' ? TemporalRelation::Before
                                                : TemporalRelation::Equal;
                }
                pos_ += len;
                return;
            }
        }
        // predicate names, longest first, must end at a token boundary
        for (int id : names_.ids_by_length()) {
            const std::string& name = names_.name_of(id);
            if (src_.compare(pos_, name.size(), name) == 0 && at_boundary(pos_ + name.size())) {
                tok_.kind = TokKind::Atom;
                tok_.atom_type = id;
                pos_ += name.size();
                return;
            }
        }
        throw ParseError("unknown predicate name or token", pos_);
    }
};

// Body tree built before the target is known; converted to Rule afterwards.
struct BodyNode {
    bool is_leaf = true;
    int leaf_type = 0;
    TemporalRelation rel = TemporalRelation::And;
    int left = -1;
    int right = -1;
};

class Parser {
public:
    Parser(std::string_view src, const NameTable& names) : lex_(src, names) {}

    // expr := term (REL term)*
    int parse_expr() {
        int node = parse_term();
        std::optional<TokKind> first_op;
        std::optional<TemporalRelation> first_rel;
        for (;;) {
            const Token& t = lex_.peek();
            if (t.kind != TokKind::Rel && t.kind != TokKind::After) break;
            const Token op = lex_.take();
            if (!first_op) {
                first_op = op.kind;
                first_rel = op.rel;
            } else if (op.kind != *first_op || (op.kind == TokKind::Rel && op.rel != *first_rel)) {
                mixed_relations_ = true;
            }
            const int rhs = parse_term();
            BodyNode n;
            n.is_leaf = false;
            if (op.kind == TokKind::After) { // "B after A" == "A before B"
                n.rel = TemporalRelation::Before;
                n.left = rhs;
                n.right = node;
            } else {
                n.rel = op.rel;
                n.left = node;
                n.right = rhs;
            }
            arena_.push_back(n);
            node = static_cast<int>(arena_.size()) - 1;
        }
        return node;
    }

    int parse_term() {
        const Token t = lex_.take();
        if (t.kind == TokKind::Atom) {
            arena_.push_back(BodyNode{true, t.atom_type, TemporalRelation::And, -1, -1});
            return static_cast<int>(arena_.size()) - 1;
        }
        if (t.kind == TokKind::LParen) {
            const int inner = parse_expr();
            const Token close = lex_.take();
            if (close.kind != TokKind::RParen)
                throw ParseError("expected ')'", close.offset);
            return inner;
        }
        throw ParseError("expected a predicate or '('", t.offset);
    }

    Token take() { return lex_.take(); }
    [[nodiscard]] const Token& peek() const { return lex_.peek(); }
    [[nodiscard]] const std::vector<BodyNode>& arena() const { return arena_; }
    [[nodiscard]] bool mixed_relations() const { return mixed_relations_; }

private:
    Lexer lex_;
    std::vector<BodyNode> arena_;
    bool mixed_relations_ = false;
};

Rule build_rule(const std::vector<BodyNode>& arena, int node, int target) {
    const BodyNode& n = arena[static_cast<std::size_t>(node)];
    if (n.is_leaf) return Rule::leaf(n.leaf_type, target);
    return Rule::combine(n.rel, build_rule(arena, n.left, target),
                         build_rule(arena, n.right, target));
}

int count_leaves(const std::vector<BodyNode>& arena, int node) {
    const BodyNode& n = arena[static_cast<std::size_t>(node)];
    if (n.is_leaf) return 1;
    return count_leaves(arena, n.left) + count_leaves(arena, n.right);
}

bool body_contains(const std::vector<BodyNode>& arena, int node, int type) {
    const BodyNode& n = arena[static_cast<std::size_t>(node)];
    if (n.is_leaf) return n.leaf_type == type;
    return body_contains(arena, n.left, type) || body_contains(arena, n.right, type);
}

Rule parse_rule_impl(std::string_view source, const NameTable& names, int max_predicates,
                     std::optional<double>* weight_out,
                     std::vector<std::string>* warnings_out = nullptr) {
    Parser parser(source, names);
    const int body = parser.parse_expr();
    if (warnings_out && parser.mixed_relations())
        warnings_out->push_back(
            "mixed relations associate left; parenthesize to make the structure explicit");
    const Token arrow = parser.take();
    if (arrow.kind != TokKind::Arrow) throw ParseError("expected '->'", arrow.offset);
    const Token target_tok = parser.take();
    if (target_tok.kind != TokKind::Atom)
        throw ParseError("expected a target predicate after '->'", target_tok.offset);
    const Token end = parser.take();
    if (end.kind != TokKind::End) throw ParseError("unexpected trailing input", end.offset);

    const int target = target_tok.atom_type;
    if (count_leaves(parser.arena(), body) > max_predicates)
        throw ParseError("rule has more than " + std::to_string(max_predicates) + " predicates",
                         0);
    if (body_contains(parser.arena(), body, target))
        throw ParseError("target '" + names.name_of(target) + "' appears in the rule body", 0);

    if (weight_out) {
        *weight_out = std::nullopt;
        const std::size_t hash = source.find('#');
        if (hash != std::string_view::npos) {
            std::string_view c = source.substr(hash + 1);
            const std::size_t eq = c.find("weight=");
            if (eq != std::string_view::npos) {
                c.remove_prefix(eq + 7);
                double w = 0.0;
                const auto [ptr, ec] = std::from_chars(c.data(), c.data() + c.size(), w);
                if (ec == std::errc()) *weight_out = w;
                (void)ptr;
            }
        }
    }
    return canonicalize_rule(build_rule(parser.arena(), body, target));
}

} // namespace

Rule parse_rule(std::string_view source, const NameTable& names, int max_predicates) {
    return parse_rule_impl(source, names, max_predicates, nullptr);
}

ParsedRuleLine parse_rule_line(std::string_view line, const NameTable& names, int max_predicates) {
    ParsedRuleLine out;
    std::optional<double> weight;
    out.rule = parse_rule_impl(line, names, max_predicates, &weight, &out.warnings);
    out.weight = weight;
    return out;
}

namespace {

std::string render(const Rule& rule, int node, const NameTable& names) {
    const Rule::Node& n = rule.nodes()[static_cast<std::size_t>(node)];
    if (n.is_leaf) return names.name_of(n.leaf_type);
    std::string left = render(rule, n.left, names);
    std::string right = render(rule, n.right, names);
    // single precedence level, left associative: only a right internal child
    // needs parentheses
    if (!rule.nodes()[static_cast<std::size_t>(n.right)].is_leaf)
        right = "(" + right + ")";
    return left + " " + relation_name(n.relation) + " " + right;
}

} // namespace

std::string print_rule(const Rule& rule, const NameTable& names) {
    const Rule canon = canonicalize_rule(rule);
    return render(canon, canon.root(), names) + " -> " + names.name_of(canon.target());
}

std::vector<ParsedRuleLine> parse_rule_file(std::string_view text, const NameTable& names,
                                            int max_predicates) {
    std::vector<ParsedRuleLine> out;
    std::size_t start = 0;
    int line_no = 0;
    while (start <= text.size()) {
        std::size_t end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(start, end - start);
        ++line_no;
        const std::size_t first = line.find_first_not_of(" \t\r");
        if (first != std::string_view::npos && line[first] != '#') {
            try {
                out.push_back(parse_rule_line(line, names, max_predicates));
            } catch (const ParseError& e) {
                throw ParseError("line " + std::to_string(line_no) + ": " + e.what(), e.offset());
            }
        }
        if (end == text.size()) break;
        start = end + 1;
    }
    return out;
}

} // namespace hrtpp
