#pragma once

#include <vector>

#include "hrtpp/core.hpp"

namespace hrtpp {

// Exponential decay d(t) = exp(-rate * t) for t >= 0, zero for t < 0.
// The kernel abstraction exists so other shapes can be added later.
struct DecayKernel {
    enum class Kind { Exponential } kind = Kind::Exponential;
    double rate = 1.0;

    [[nodiscard]] double operator()(double t) const noexcept {
        return t < 0.0 ? 0.0 : std::exp(-rate * t);
    }
};

// Sorted trigger timestamps of one rule on one sequence. Construction sorts
// and drops exact duplicates, so times are strictly increasing.
struct TriggerSet {
    int rule_index = 0;
    std::vector<double> times;

    [[nodiscard]] static TriggerSet from_times(int rule_index, std::vector<double> times);
};

// Times at which a rule body becomes satisfied on a sequence.
//
// Matching semantics (shared by every relation): evidence is consumed
// greedily in time order, one satisfaction per matched pair, and a trigger
// never precedes the events that justify it.
//   leaf X_k        every occurrence time of type-k events
//   before(A, B)    each B-satisfaction t_b with an unconsumed A-satisfaction
//                   t_a < t_b - delta (earliest such t_a consumed); emits t_b
//   equal(A, B)     each B-satisfaction t_b paired with the nearest unconsumed
//                   A-satisfaction within |t_a - t_b| <= delta (ties: earlier
//                   t_a); emits max(t_a, t_b)
//   and(A, B)       each satisfaction whose opposite side holds an unconsumed
//                   satisfaction at an earlier-or-equal time (earliest
//                   consumed; time ties process the left side first); emits
//                   the later time of the pair
[[nodiscard]] std::vector<double> satisfaction_times(const Rule& rule,
                                                     const EventSequence& sequence,
                                                     double delta);

// Same, for a subtree rooted at `node`.
[[nodiscard]] std::vector<double> satisfaction_times(const Rule& rule, int node,
                                                     const EventSequence& sequence,
                                                     double delta);

// Eq-style decayed trigger sum: sum over trigger times t_j <= t of
// kernel(t - t_j). Right-continuous with unit jumps at trigger times.
[[nodiscard]] double rule_signal(const TriggerSet& triggers, const DecayKernel& kernel, double t);

// Masked decayed value sum over type-k events with t_i <= t of
// v_i * kernel(t - t_i); zero when the mask is off.
[[nodiscard]] double numeric_signal(const EventSequence& sequence, int type_k, bool mask_k,
                                    const DecayKernel& kernel, double t);

// All trigger sets for a rule set on one sequence.
[[nodiscard]] std::vector<TriggerSet> compute_triggers(const RuleSet& rules,
                                                       const EventSequence& sequence,
                                                       double delta);

} // namespace hrtpp
