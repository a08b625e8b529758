#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "hrtpp/common.hpp"

namespace hrtpp {

// One marked event: occurrence time, type identifier in [1, K], numeric value.
struct Event {
    double time = 0.0;
    int type = 1;
    double value = 0.0;
};

// Ordered event stream over [0, horizon]. Events are sorted by time
// (ties allowed); every type lies in [1, num_types].
class EventSequence {
public:
    EventSequence() = default;
    EventSequence(std::vector<Event> events, double horizon, int num_types, int target_type);

    [[nodiscard]] const std::vector<Event>& events() const noexcept { return events_; }
    [[nodiscard]] double horizon() const noexcept { return horizon_; }
    [[nodiscard]] int num_types() const noexcept { return num_types_; }
    [[nodiscard]] int target_type() const noexcept { return target_type_; }

    // Occurrence times of one event type, in order.
    [[nodiscard]] std::vector<double> times_of_type(int type) const;

    // Occurrence times of the target type.
    [[nodiscard]] std::vector<double> target_times() const { return times_of_type(target_type_); }

    // Copy containing only events with time <= cutoff; horizon is preserved.
    [[nodiscard]] EventSequence truncated_at(double cutoff) const;

private:
    std::vector<Event> events_;
    double horizon_ = 1.0;
    int num_types_ = 1;
    int target_type_ = 1;
};

enum class TemporalRelation : std::uint8_t { And, Before, Equal };

[[nodiscard]] bool relation_is_symmetric(TemporalRelation rel) noexcept;
[[nodiscard]] const char* relation_name(TemporalRelation rel) noexcept;

// Temporal logic rule: a binary body tree over predicate leaves (event types)
// implying a target type. Nodes live in an arena; `root` indexes into it.
class Rule {
public:
    struct Node {
        bool is_leaf = true;
        int leaf_type = 0;                              // valid when is_leaf
        TemporalRelation relation = TemporalRelation::And; // valid when !is_leaf
        int left = -1;
        int right = -1;
    };

    Rule() = default;

    [[nodiscard]] static Rule leaf(int type, int target);
    [[nodiscard]] static Rule combine(TemporalRelation rel, const Rule& a, const Rule& b);

    [[nodiscard]] const std::vector<Node>& nodes() const noexcept { return nodes_; }
    [[nodiscard]] int root() const noexcept { return root_; }
    [[nodiscard]] int target() const noexcept { return target_; }
    [[nodiscard]] int leaf_count() const noexcept { return leaf_count_; }
    [[nodiscard]] std::vector<int> leaf_types() const;

    // Structural encoding that is a total order over bodies; equal encodings
    // (plus equal target) define rule equality.
    [[nodiscard]] std::vector<int> encoding() const;

    [[nodiscard]] bool operator==(const Rule& other) const;
    [[nodiscard]] bool operator<(const Rule& other) const;

    // Highest leaf type referenced by the body.
    [[nodiscard]] int max_leaf_type() const;

    static constexpr int kDefaultMaxPredicates = 3;

private:
    friend Rule canonicalize_rule(const Rule& rule);

    std::vector<Node> nodes_;
    int root_ = -1;
    int target_ = 0;
    int leaf_count_ = 0;

    void validate() const;
    [[nodiscard]] std::vector<int> encode_subtree(int node) const;
};

// Sorted-operand normal form: operands of the symmetric relations (and, equal)
// are stored in encoding order; `before` keeps operand order. Idempotent and
// trigger-semantics preserving.
[[nodiscard]] Rule canonicalize_rule(const Rule& rule);

// Rules sharing one target; duplicates under canonical equality are no-ops.
class RuleSet {
public:
    RuleSet() = default;
    explicit RuleSet(int target, std::size_t max_size = 64) : target_(target), max_size_(max_size) {}

    // Returns true when the rule was inserted, false when it was a duplicate.
    bool insert(const Rule& rule);

    [[nodiscard]] const std::vector<Rule>& rules() const noexcept { return rules_; }
    [[nodiscard]] std::size_t size() const noexcept { return rules_.size(); }
    [[nodiscard]] bool empty() const noexcept { return rules_.empty(); }
    [[nodiscard]] int target() const noexcept { return target_; }
    [[nodiscard]] std::size_t max_size() const noexcept { return max_size_; }
    [[nodiscard]] bool contains(const Rule& rule) const;

private:
    std::vector<Rule> rules_; // canonical forms, insertion order
    int target_ = 0;
    std::size_t max_size_ = 64;
};

// mask[k-1] = true iff type k appears as a leaf of some rule.
[[nodiscard]] std::vector<bool> recompute_mask(const RuleSet& rules, int num_types);

// Fixed (non-trained) hyperparameters: tolerance delta and the two decay rates.
struct Hyperparams {
    double delta = 0.1;
    double rule_decay_rate = 1.0;
    double num_decay_rate = 1.0;

    void validate() const;
};

enum class MaskMode : std::uint8_t {
    FromRules, // the normal path: mask recomputed from the rule set
    AllOn,     // every numeric feature active (rule-free baselines, ablation)
    AllOff,    // numeric intensity disabled
};

[[nodiscard]] const char* mask_mode_name(MaskMode mode) noexcept;
[[nodiscard]] MaskMode mask_mode_from_name(const std::string& name);

// Learnable parameters (lambda0, alpha, beta, gamma_raw) plus fixed
// hyperparameters. gamma = exp(gamma_raw) keeps the softplus scale positive
// without constraining the optimizer.
struct ModelParams {
    double lambda0 = 0.0;
    Eigen::VectorXd alpha; // one weight per rule
    Eigen::VectorXd beta;  // one weight per event type
    double gamma_raw = 0.0;
    Hyperparams hyper;
    std::vector<bool> mask; // one flag per event type

    [[nodiscard]] double gamma() const noexcept { return std::exp(gamma_raw); }

    // Standard construction: mask recomputed from the rule set (or forced by
    // mode for baselines/ablation), alpha/beta zero-initialized.
    [[nodiscard]] static ModelParams make(const RuleSet& rules, int num_types,
                                          const Hyperparams& hyper,
                                          MaskMode mode = MaskMode::FromRules);

    void validate(std::size_t num_rules, int num_types) const;
};

} // namespace hrtpp
