#include "hrtpp/encoders.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hrtpp {

TriggerSet TriggerSet::from_times(int rule_index, std::vector<double> times) {
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());
    return TriggerSet{rule_index, std::move(times)};
}

namespace {

std::vector<double> match_before(const std::vector<double>& sa, const std::vector<double>& sb,
                                 double delta) {
    std::vector<double> out;
    std::size_t next_a = 0; // earliest unconsumed A-satisfaction
    for (double tb : sb) {
        if (next_a < sa.size() && sa[next_a] < tb - delta) {
            out.push_back(tb);
            ++next_a;
        }
    }
    return out;
}

std::vector<double> match_equal(const std::vector<double>& sa, const std::vector<double>& sb,
                                double delta) {
    std::vector<double> out;
    std::vector<bool> consumed(sa.size(), false);
    for (double tb : sb) {
        std::size_t best = sa.size();
        double best_gap = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < sa.size(); ++i) {
            if (consumed[i]) continue;
            if (sa[i] > tb + delta) break;
            const double gap = std::abs(sa[i] - tb);
            if (gap <= delta && gap < best_gap) { // ties keep the earlier t_a
                best = i;
                best_gap = gap;
            }
        }
        if (best < sa.size()) {
            consumed[best] = true;
            out.push_back(std::max(sa[best], tb));
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<double> match_and(const std::vector<double>& sa, const std::vector<double>& sb) {
    std::vector<double> out;
    std::size_t ia = 0, ib = 0;       // next satisfaction to arrive per side
    std::size_t pa = 0, pb = 0;       // earliest unconsumed pooled satisfaction
    while (ia < sa.size() || ib < sb.size()) {
        const bool take_a = ib >= sb.size() || (ia < sa.size() && sa[ia] <= sb[ib]);
        if (take_a) {
            const double t = sa[ia++];
            if (pb < ib) { // opposite side has an unconsumed earlier-or-equal satisfaction
                ++pb;
                pa = ia; // the arriving satisfaction is consumed too
                out.push_back(t);
            }
        } else {
            const double t = sb[ib++];
            if (pa < ia) {
                ++pa;
                pb = ib;
                out.push_back(t);
            }
        }
    }
    return out;
}

std::vector<double> satisfy(const Rule& rule, int node, const EventSequence& sequence,
                            double delta) {
    const Rule::Node& n = rule.nodes()[static_cast<std::size_t>(node)];
    if (n.is_leaf) return sequence.times_of_type(n.leaf_type);
    const std::vector<double> sa = satisfy(rule, n.left, sequence, delta);
    const std::vector<double> sb = satisfy(rule, n.right, sequence, delta);
    switch (n.relation) {
    case TemporalRelation::Before: return match_before(sa, sb, delta);
    case TemporalRelation::Equal: return match_equal(sa, sb, delta);
    case TemporalRelation::And: return match_and(sa, sb);
    }
    return {};
}

} // namespace

std::vector<double> satisfaction_times(const Rule& rule, int node, const EventSequence& sequence,
                                       double delta) {
    if (rule.max_leaf_type() > sequence.num_types())
        throw ValidationError("rule references a type beyond the sequence's num_types");
    return satisfy(rule, node, sequence, delta);
}

std::vector<double> satisfaction_times(const Rule& rule, const EventSequence& sequence,
                                       double delta) {
    return satisfaction_times(rule, rule.root(), sequence, delta);
}

double rule_signal(const TriggerSet& triggers, const DecayKernel& kernel, double t) {
    double sum = 0.0;
    for (double tj : triggers.times) {
        if (tj > t) break;
        sum += kernel(t - tj);
    }
    return sum;
}

double numeric_signal(const EventSequence& sequence, int type_k, bool mask_k,
                      const DecayKernel& kernel, double t) {
    if (type_k < 1 || type_k > sequence.num_types())
        throw ValidationError("numeric_signal: type out of range");
    if (!mask_k) return 0.0;
    double sum = 0.0;
    for (const Event& e : sequence.events()) {
        if (e.time > t) break;
        if (e.type == type_k) sum += e.value * kernel(t - e.time);
    }
    return sum;
}

std::vector<TriggerSet> compute_triggers(const RuleSet& rules, const EventSequence& sequence,
                                         double delta) {
    std::vector<TriggerSet> out;
    out.reserve(rules.size());
    for (std::size_t j = 0; j < rules.size(); ++j) {
        out.push_back(TriggerSet::from_times(
            static_cast<int>(j), satisfaction_times(rules.rules()[j], sequence, delta)));
    }
    return out;
}

} // namespace hrtpp
