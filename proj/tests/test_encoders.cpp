#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hrtpp/encoders.hpp"
#include "oracles.hpp"

using namespace hrtpp;

namespace {

EventSequence seq_of(std::vector<Event> events, double horizon, int num_types, int target) {
    std::sort(events.begin(), events.end(),
              [](const Event& a, const Event& b) { return a.time < b.time; });
    return EventSequence(std::move(events), horizon, num_types, target);
}

Rule before12(int target = 9) {
    return Rule::combine(TemporalRelation::Before, Rule::leaf(1, target), Rule::leaf(2, target));
}

} // namespace

TEST_CASE("before relation fires at the later event") {
    const EventSequence seq = seq_of({{1.0, 1, 0.0}, {3.0, 2, 0.0}}, 10.0, 9, 9);
    CHECK(satisfaction_times(before12(), seq, 0.1) == std::vector<double>{3.0});
}

TEST_CASE("before respects order") {
    const EventSequence seq = seq_of({{1.0, 2, 0.0}, {3.0, 1, 0.0}}, 10.0, 9, 9);
    CHECK(satisfaction_times(before12(), seq, 0.1).empty());
}

TEST_CASE("before needs more than the tolerance gap") {
    const EventSequence seq = seq_of({{1.0, 1, 0.0}, {1.05, 2, 0.0}}, 10.0, 9, 9);
    CHECK(satisfaction_times(before12(), seq, 0.1).empty()); // gap 0.05 <= delta
    const EventSequence wide = seq_of({{1.0, 1, 0.0}, {1.2, 2, 0.0}}, 10.0, 9, 9);
    CHECK(satisfaction_times(before12(), wide, 0.1) == std::vector<double>{1.2});
}

TEST_CASE("equal fires at the later of the pair") {
    const Rule r = Rule::combine(TemporalRelation::Equal, Rule::leaf(1, 9), Rule::leaf(2, 9));
    const EventSequence seq = seq_of({{2.0, 1, 0.0}, {2.05, 2, 0.0}}, 10.0, 9, 9);
    CHECK(satisfaction_times(r, seq, 0.1) == std::vector<double>{2.05});
    // boundary: |t_a - t_b| == delta counts as equal (exactly representable gap)
    const EventSequence edge = seq_of({{2.0, 1, 0.0}, {2.125, 2, 0.0}}, 10.0, 9, 9);
    CHECK(satisfaction_times(r, edge, 0.125) == std::vector<double>{2.125});
    // ... while before needs a strictly larger gap
    CHECK(satisfaction_times(before12(), edge, 0.125).empty());
}

TEST_CASE("and fires once both sides exist") {
    const Rule r = Rule::combine(TemporalRelation::And, Rule::leaf(1, 9), Rule::leaf(2, 9));
    const EventSequence seq = seq_of({{4.0, 2, 0.0}, {1.0, 1, 0.0}}, 10.0, 9, 9);
    CHECK(satisfaction_times(r, seq, 0.1) == std::vector<double>{4.0});
    // one early event pairs only once
    const EventSequence repeat = seq_of({{1.0, 1, 0.0}, {2.0, 2, 0.0}, {3.0, 2, 0.0}}, 10.0, 9, 9);
    CHECK(satisfaction_times(r, repeat, 0.1) == std::vector<double>{2.0});
}

TEST_CASE("nested rule example") {
    // ((X1 before X2) equal X3) with X1@0, X2@1, X3@1.02
    const Rule nested = Rule::combine(TemporalRelation::Equal, before12(), Rule::leaf(3, 9));
    const EventSequence seq =
        seq_of({{0.0, 1, 0.0}, {1.0, 2, 0.0}, {1.02, 3, 0.0}}, 10.0, 9, 9);
    const auto times = satisfaction_times(nested, seq, 0.1);
    REQUIRE(times.size() == 1);
    CHECK(times[0] == doctest::Approx(1.02));
}

TEST_CASE("trigger semantics match the pair-enumeration oracle on random sequences") {
    std::mt19937_64 rng(99);
    const int num_types = 4, target = 4;
    int nonempty = 0;
    for (int i = 0; i < 1000; ++i) {
        const EventSequence seq = oracles::random_sequence(rng, num_types, target, 6, 5.0);
        std::uniform_real_distribution<double> delta_dist(0.01, 1.0);
        const double delta = delta_dist(rng);
        for (TemporalRelation rel :
             {TemporalRelation::And, TemporalRelation::Before, TemporalRelation::Equal}) {
            const Rule r = Rule::combine(rel, Rule::leaf(1, target), Rule::leaf(2, target));
            const auto got = satisfaction_times(r, seq, delta);
            const auto want = oracles::oracle_satisfaction(r, seq, delta);
            CHECK(got == want);
            if (!got.empty()) ++nonempty;
        }
        const Rule nested = Rule::combine(
            TemporalRelation::Equal,
            Rule::combine(TemporalRelation::Before, Rule::leaf(1, target), Rule::leaf(2, target)),
            Rule::leaf(3, target));
        CHECK(satisfaction_times(nested, seq, delta) ==
              oracles::oracle_satisfaction(nested, seq, delta));
    }
    CHECK(nonempty > 200); // the comparison must not be vacuous
}

TEST_CASE("causality: truncating the future leaves values unchanged") {
    std::mt19937_64 rng(5);
    for (int i = 0; i < 50; ++i) {
        const EventSequence seq = oracles::random_sequence(rng, 4, 4, 12, 10.0);
        const Rule r = oracles::random_rule(rng, 4, 4, 2);
        const double t = 5.0;
        const DecayKernel kernel{DecayKernel::Kind::Exponential, 1.3};
        const TriggerSet full =
            TriggerSet::from_times(0, satisfaction_times(r, seq, 0.2));
        const EventSequence cut = seq.truncated_at(t);
        const TriggerSet trunc =
            TriggerSet::from_times(0, satisfaction_times(r, cut, 0.2));
        CHECK(rule_signal(full, kernel, t) == doctest::Approx(rule_signal(trunc, kernel, t)));
        for (int k = 1; k <= 4; ++k)
            CHECK(numeric_signal(seq, k, true, kernel, t) ==
                  doctest::Approx(numeric_signal(cut, k, true, kernel, t)));
    }
}

TEST_CASE("appending events never removes earlier triggers") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 60; ++i) {
        const EventSequence seq = oracles::random_sequence(rng, 4, 4, 8, 10.0);
        const Rule r = oracles::random_rule(rng, 4, 4, 2);
        const EventSequence head = seq.truncated_at(6.0);
        const auto head_triggers = satisfaction_times(r, head, 0.15);
        const auto full_triggers = satisfaction_times(r, seq, 0.15);
        // every trigger of the truncated sequence survives in the full one
        for (double t : head_triggers)
            CHECK(std::find(full_triggers.begin(), full_triggers.end(), t) !=
                  full_triggers.end());
    }
}

TEST_CASE("rule signal single and double terms") {
    const DecayKernel kernel{DecayKernel::Kind::Exponential, 1.0};
    CHECK(rule_signal(TriggerSet{0, {0.0}}, kernel, 1.0) == doctest::Approx(std::exp(-1.0)));
    CHECK(rule_signal(TriggerSet{0, {}}, kernel, 3.0) == 0.0);
    // two triggers, checked against plain summation
    const double expected = std::exp(-1.0) + std::exp(-0.5);
    CHECK(rule_signal(TriggerSet{0, {0.0, 0.5}}, kernel, 1.0) == doctest::Approx(expected));
    CHECK(expected == doctest::Approx(0.974410).epsilon(1e-5));
    // future triggers contribute nothing
    CHECK(rule_signal(TriggerSet{0, {2.0}}, kernel, 1.0) == 0.0);
}

TEST_CASE("rule signal jumps by one at trigger times") {
    const DecayKernel kernel{DecayKernel::Kind::Exponential, 2.0};
    const TriggerSet ts{0, {1.0, 2.5}};
    const double before = rule_signal(ts, kernel, std::nextafter(2.5, 0.0));
    const double at = rule_signal(ts, kernel, 2.5);
    CHECK(at - before == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("numeric signal masks and decays") {
    const DecayKernel kernel{DecayKernel::Kind::Exponential, 1.0};
    const EventSequence seq = seq_of({{0.0, 1, 2.0}}, 5.0, 2, 2);
    CHECK(numeric_signal(seq, 1, false, kernel, 1.0) == 0.0);
    CHECK(numeric_signal(seq, 1, true, kernel, 1.0) == doctest::Approx(2.0 * std::exp(-1.0)));
    CHECK(2.0 * std::exp(-1.0) == doctest::Approx(0.735759).epsilon(1e-5));
}

TEST_CASE("numeric signal matches direct summation on random data") {
    std::mt19937_64 rng(21);
    const DecayKernel kernel{DecayKernel::Kind::Exponential, 0.7};
    for (int i = 0; i < 30; ++i) {
        const EventSequence seq = oracles::random_sequence(rng, 3, 3, 3, 8.0);
        const double t = 6.0;
        for (int k = 1; k <= 3; ++k) {
            double direct = 0.0;
            for (const Event& e : seq.events())
                if (e.type == k && e.time <= t) direct += e.value * std::exp(-0.7 * (t - e.time));
            CHECK(numeric_signal(seq, k, true, kernel, t) ==
                  doctest::Approx(direct).epsilon(1e-12));
        }
    }
}

TEST_CASE("trigger sets are strictly increasing") {
    // duplicate satisfaction instants collapse to one trigger
    const TriggerSet ts = TriggerSet::from_times(0, {2.0, 1.0, 2.0, 3.0});
    CHECK(ts.times == std::vector<double>{1.0, 2.0, 3.0});
}

TEST_CASE("decay kernel basics") {
    const DecayKernel k{DecayKernel::Kind::Exponential, 2.0};
    CHECK(k(0.0) == 1.0);
    CHECK(k(-0.5) == 0.0);
    CHECK(k(1.0) == doctest::Approx(std::exp(-2.0)));
    CHECK(k(1.0) <= k(0.5));
}
