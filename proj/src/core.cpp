#include "hrtpp/core.hpp"

#include <algorithm>
#include <cmath>

namespace hrtpp {

EventSequence::EventSequence(std::vector<Event> events, double horizon, int num_types,
                             int target_type)
    : events_(std::move(events)), horizon_(horizon), num_types_(num_types),
      target_type_(target_type) {
    if (num_types_ < 1) throw ValidationError("num_types must be positive");
    if (target_type_ < 1 || target_type_ > num_types_)
        throw ValidationError("target_type out of range [1, num_types]");
    if (!(horizon_ > 0.0) || !std::isfinite(horizon_))
        throw ValidationError("horizon must be positive and finite");
    double prev = 0.0;
    for (std::size_t i = 0; i < events_.size(); ++i) {
        const Event& e = events_[i];
        if (!std::isfinite(e.time) || e.time < 0.0)
            throw ValidationError("event time must be finite and non-negative (event " +
                                  std::to_string(i) + ")");
        if (e.type < 1 || e.type > num_types_)
            throw ValidationError("event type " + std::to_string(e.type) +
                                  " out of range [1, " + std::to_string(num_types_) + "]");
        if (!std::isfinite(e.value))
            throw ValidationError("event value must be finite (event " + std::to_string(i) + ")");
        if (i > 0 && e.time < prev)
            throw ValidationError("events not sorted by time (event " + std::to_string(i) + ")");
        prev = e.time;
    }
    if (!events_.empty() && events_.back().time > horizon_)
        throw ValidationError("horizon must be >= the last event time");
}

std::vector<double> EventSequence::times_of_type(int type) const {
    std::vector<double> out;
    for (const Event& e : events_)
        if (e.type == type) out.push_back(e.time);
    return out;
}

EventSequence EventSequence::truncated_at(double cutoff) const {
    std::vector<Event> kept;
    for (const Event& e : events_)
        if (e.time <= cutoff) kept.push_back(e);
    return EventSequence(std::move(kept), horizon_, num_types_, target_type_);
}

bool relation_is_symmetric(TemporalRelation rel) noexcept {
    return rel == TemporalRelation::And || rel == TemporalRelation::Equal;
}

const char* relation_name(TemporalRelation rel) noexcept {
    switch (rel) {
    case TemporalRelation::And: return "and";
    case TemporalRelation::Before: return "before";
    case TemporalRelation::Equal: return "equal";
    }
    return "?";
}

Rule Rule::leaf(int type, int target) {
    Rule r;
    r.nodes_.push_back(Node{true, type, TemporalRelation::And, -1, -1});
    r.root_ = 0;
    r.target_ = target;
    r.leaf_count_ = 1;
    r.validate();
    return r;
}

Rule Rule::combine(TemporalRelation rel, const Rule& a, const Rule& b) {
    if (a.target_ != b.target_) throw ValidationError("cannot combine rules with different targets");
    Rule r;
    r.target_ = a.target_;
    r.nodes_ = a.nodes_;
    const int offset = static_cast<int>(r.nodes_.size());
    for (Node n : b.nodes_) {
        if (!n.is_leaf) {
            n.left += offset;
            n.right += offset;
        }
        r.nodes_.push_back(n);
    }
    r.nodes_.push_back(Node{false, 0, rel, a.root_, b.root_ + offset});
    r.root_ = static_cast<int>(r.nodes_.size()) - 1;
    r.leaf_count_ = a.leaf_count_ + b.leaf_count_;
    r.validate();
    return r;
}

void Rule::validate() const {
    if (target_ < 1) throw ValidationError("rule target must be a positive type id");
    if (leaf_count_ < 1 || leaf_count_ > kDefaultMaxPredicates)
        throw ValidationError("rule must have between 1 and " +
                              std::to_string(kDefaultMaxPredicates) + " predicates");
    for (const Node& n : nodes_) {
        if (n.is_leaf) {
            if (n.leaf_type < 1) throw ValidationError("leaf type must be a positive type id");
            if (n.leaf_type == target_)
                throw ValidationError("target type must not appear in the rule body");
        }
    }
}

std::vector<int> Rule::leaf_types() const {
    std::vector<int> out;
    // arena order equals left-to-right construction order for leaves
    for (const Node& n : nodes_)
        if (n.is_leaf) out.push_back(n.leaf_type);
    return out;
}

std::vector<int> Rule::encode_subtree(int node) const {
    const Node& n = nodes_[static_cast<std::size_t>(node)];
    if (n.is_leaf) return {0, n.leaf_type};
    std::vector<int> out{1, static_cast<int>(n.relation)};
    const std::vector<int> l = encode_subtree(n.left);
    const std::vector<int> r = encode_subtree(n.right);
    out.insert(out.end(), l.begin(), l.end());
    out.insert(out.end(), r.begin(), r.end());
    return out;
}

std::vector<int> Rule::encoding() const {
    std::vector<int> out{target_};
    const std::vector<int> body = encode_subtree(root_);
    out.insert(out.end(), body.begin(), body.end());
    return out;
}

bool Rule::operator==(const Rule& other) const { return encoding() == other.encoding(); }
bool Rule::operator<(const Rule& other) const { return encoding() < other.encoding(); }

int Rule::max_leaf_type() const {
    int m = 0;
    for (const Node& n : nodes_)
        if (n.is_leaf) m = std::max(m, n.leaf_type);
    return m;
}

namespace {

// Rebuilds a subtree in canonical form, returning the new root index.
int canonicalize_subtree(const std::vector<Rule::Node>& src, int node,
                         std::vector<Rule::Node>& dst, std::vector<int>& enc_out) {
    const Rule::Node& n = src[static_cast<std::size_t>(node)];
    if (n.is_leaf) {
        dst.push_back(n);
        enc_out = {0, n.leaf_type};
        return static_cast<int>(dst.size()) - 1;
    }
    std::vector<int> enc_l, enc_r;
    int left = canonicalize_subtree(src, n.left, dst, enc_l);
    int right = canonicalize_subtree(src, n.right, dst, enc_r);
    if (relation_is_symmetric(n.relation) && enc_r < enc_l) {
        std::swap(left, right);
        std::swap(enc_l, enc_r);
    }
    dst.push_back(Rule::Node{false, 0, n.relation, left, right});
    enc_out = {1, static_cast<int>(n.relation)};
    enc_out.insert(enc_out.end(), enc_l.begin(), enc_l.end());
    enc_out.insert(enc_out.end(), enc_r.begin(), enc_r.end());
    return static_cast<int>(dst.size()) - 1;
}

} // namespace

Rule canonicalize_rule(const Rule& rule) {
    Rule out;
    out.target_ = rule.target();
    out.leaf_count_ = rule.leaf_count();
    std::vector<int> enc;
    out.root_ = canonicalize_subtree(rule.nodes(), rule.root(), out.nodes_, enc);
    return out;
}

bool RuleSet::insert(const Rule& rule) {
    Rule canon = canonicalize_rule(rule);
    if (canon.target() != target_)
        throw ValidationError("rule target does not match rule set target");
    if (contains(canon)) return false;
    if (rules_.size() >= max_size_)
        throw ValidationError("rule set exceeds max_size " + std::to_string(max_size_));
    rules_.push_back(std::move(canon));
    return true;
}

bool RuleSet::contains(const Rule& rule) const {
    const Rule canon = canonicalize_rule(rule);
    return std::any_of(rules_.begin(), rules_.end(),
                       [&](const Rule& r) { return r == canon; });
}

std::vector<bool> recompute_mask(const RuleSet& rules, int num_types) {
    std::vector<bool> mask(static_cast<std::size_t>(num_types), false);
    for (const Rule& r : rules.rules()) {
        for (int leaf : r.leaf_types()) {
            if (leaf < 1 || leaf > num_types)
                throw ValidationError("rule leaf type " + std::to_string(leaf) +
                                      " exceeds num_types " + std::to_string(num_types));
            mask[static_cast<std::size_t>(leaf - 1)] = true;
        }
    }
    return mask;
}

void Hyperparams::validate() const {
    if (!(delta > 0.0) || !std::isfinite(delta)) throw ValidationError("delta must be positive");
    if (!(rule_decay_rate > 0.0) || !std::isfinite(rule_decay_rate))
        throw ValidationError("rule_decay_rate must be positive");
    if (!(num_decay_rate > 0.0) || !std::isfinite(num_decay_rate))
        throw ValidationError("num_decay_rate must be positive");
}

const char* mask_mode_name(MaskMode mode) noexcept {
    switch (mode) {
    case MaskMode::FromRules: return "from_rules";
    case MaskMode::AllOn: return "all_on";
    case MaskMode::AllOff: return "all_off";
    }
    return "?";
}

MaskMode mask_mode_from_name(const std::string& name) {
    if (name == "from_rules") return MaskMode::FromRules;
    if (name == "all_on") return MaskMode::AllOn;
    if (name == "all_off") return MaskMode::AllOff;
    throw ValidationError("unknown mask mode: " + name);
}

ModelParams ModelParams::make(const RuleSet& rules, int num_types, const Hyperparams& hyper,
                              MaskMode mode) {
    hyper.validate();
    ModelParams p;
    p.alpha = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(rules.size()));
    p.beta = Eigen::VectorXd::Zero(num_types);
    p.hyper = hyper;
    switch (mode) {
    case MaskMode::FromRules: p.mask = recompute_mask(rules, num_types); break;
    case MaskMode::AllOn: p.mask.assign(static_cast<std::size_t>(num_types), true); break;
    case MaskMode::AllOff: p.mask.assign(static_cast<std::size_t>(num_types), false); break;
    }
    return p;
}

void ModelParams::validate(std::size_t num_rules, int num_types) const {
    hyper.validate();
    if (static_cast<std::size_t>(alpha.size()) != num_rules)
        throw ValidationError("alpha size must equal the number of rules");
    if (beta.size() != num_types) throw ValidationError("beta size must equal num_types");
    if (mask.size() != static_cast<std::size_t>(num_types))
        throw ValidationError("mask size must equal num_types");
    if (!std::isfinite(lambda0) || !std::isfinite(gamma_raw))
        throw ValidationError("parameters must be finite");
}

} // namespace hrtpp
