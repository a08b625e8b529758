#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hrtpp/mining.hpp"
#include "hrtpp/simulation.hpp"
#include "oracles.hpp"

using namespace hrtpp;

namespace {

double inv_softplus(double y) { return std::log(std::expm1(y)); }

// two planted rules over K=4 covariate types plus a target
ScenarioSpec planted_two_rule_scenario(std::uint64_t seed, std::size_t m) {
    ScenarioSpec spec;
    spec.num_types = 5;
    spec.target_type = 5;
    spec.horizon = 10.0;
    spec.num_sequences = m;
    spec.seed = seed;
    spec.background_rates = {0.4, 0.4, 0.4, 0.4, 0.0};
    spec.value_dists.assign(5, ValueDistribution{ValueDistribution::Kind::Constant, 1.0, 0.0});
    spec.rules = RuleSet(5);
    spec.rules.insert(Rule::combine(TemporalRelation::Before, Rule::leaf(1, 5), Rule::leaf(2, 5)));
    spec.rules.insert(Rule::leaf(3, 5));
    spec.alpha = Eigen::VectorXd::Constant(2, 2.0);
    spec.beta = Eigen::VectorXd::Zero(5);
    spec.lambda0 = inv_softplus(0.15);
    spec.hyper.delta = 0.05;
    return spec;
}

FitConfig quick_fit() {
    FitConfig config;
    config.max_epochs = 120;
    config.convergence_tol = 1e-6;
    config.learning_rate = 0.08;
    return config;
}

} // namespace

TEST_CASE("raw search space formula") {
    CHECK(raw_search_space(38, 2) == doctest::Approx(4332.0)); // 38^2 * 3
    CHECK(raw_search_space(10, 1) == doctest::Approx(10.0));
    CHECK(raw_search_space(10, 3) == doctest::Approx(9000.0)); // 10^3 * 3^2
}

TEST_CASE("candidate pool over two filtered predicates has twelve two-leaf rules") {
    const CandidatePool pool = generate_candidates({1, 2}, 3, 2, 3);
    // exhaustive enumeration oracle: singletons {1},{2};
    // and/equal unordered pairs with repeats 3+3; before ordered pairs 4
    CHECK(pool.size() == 12);
    // no duplicates under canonical equality
    std::set<std::vector<int>> seen;
    for (const Rule& r : pool.candidates) CHECK(seen.insert(r.encoding()).second);
    // every candidate contains at least one filtered predicate (all here)
    CHECK(pool.raw_space_by_m.size() == 2);
    CHECK(pool.raw_space_by_m[1].second == doctest::Approx(27.0)); // 3^2 * 3
}

TEST_CASE("single filtered predicate with m=1 yields exactly one candidate") {
    const CandidatePool pool = generate_candidates({1}, 2, 1, 2);
    REQUIRE(pool.size() == 1);
    CHECK(pool.candidates[0] == Rule::leaf(1, 2));
}

TEST_CASE("empty filtered set yields an empty pool") {
    const CandidatePool pool = generate_candidates({}, 4, 2, 4);
    CHECK(pool.candidates.empty());
}

TEST_CASE("pool cap triggers an instructive error") {
    CandidateGenOptions options;
    options.pool_cap = 5;
    CHECK_THROWS_AS((void)generate_candidates({1, 2}, 3, 2, 3, options), ValidationError);
}

TEST_CASE("unfiltered leaves are admitted only alongside a filtered one") {
    CandidateGenOptions options;
    options.allow_unfiltered_leaves = true;
    const CandidatePool pool = generate_candidates({1}, 3, 2, 3, options);
    for (const Rule& r : pool.candidates) {
        const std::vector<int> leaves = r.leaf_types();
        CHECK(std::find(leaves.begin(), leaves.end(), 1) != leaves.end());
        for (int leaf : leaves) CHECK(leaf != 3);
    }
    // two-leaf rules mixing type 2 exist
    bool found_mixed = false;
    for (const Rule& r : pool.candidates) {
        const std::vector<int> leaves = r.leaf_types();
        if (leaves.size() == 2 &&
            std::find(leaves.begin(), leaves.end(), 2) != leaves.end())
            found_mixed = true;
    }
    CHECK(found_mixed);
}

TEST_CASE("three-leaf enumeration keeps both association shapes") {
    const CandidatePool pool = generate_candidates({1}, 2, 3, 2);
    // canonicalization sorts symmetric operands but never re-associates
    const Rule left_assoc = Rule::combine(
        TemporalRelation::Before,
        Rule::combine(TemporalRelation::Before, Rule::leaf(1, 2), Rule::leaf(1, 2)),
        Rule::leaf(1, 2));
    const Rule right_assoc = Rule::combine(
        TemporalRelation::Before, Rule::leaf(1, 2),
        Rule::combine(TemporalRelation::Before, Rule::leaf(1, 2), Rule::leaf(1, 2)));
    auto contains = [&](const Rule& r) {
        const Rule canon = canonicalize_rule(r);
        return std::any_of(pool.candidates.begin(), pool.candidates.end(),
                           [&](const Rule& c) { return c == canon; });
    };
    CHECK(contains(left_assoc));
    CHECK(contains(right_assoc));
}

TEST_CASE("predicate filtering keeps the informative predicate") {
    ScenarioSpec spec = planted_two_rule_scenario(3, 300);
    // single informative predicate: only rule is "X3 -> Y"
    spec.rules = RuleSet(5);
    spec.rules.insert(Rule::leaf(3, 5));
    spec.alpha = Eigen::VectorXd::Constant(1, 2.5);
    const auto [corpus, manifest] = simulate_corpus(spec);
    const PredicateFilterResult result =
        filter_predicates(corpus, quick_fit(), spec.hyper);
    CHECK(std::find(result.retained.begin(), result.retained.end(), 3) != result.retained.end());
    // the informative predicate has the largest delta
    double best = -1e300;
    int best_k = 0;
    for (int k = 1; k <= 4; ++k)
        if (result.nll_delta[static_cast<std::size_t>(k - 1)] > best) {
            best = result.nll_delta[static_cast<std::size_t>(k - 1)];
            best_k = k;
        }
    CHECK(best_k == 3);
}

TEST_CASE("null scenario retains nothing") {
    // pure Poisson target, independent covariates
    ScenarioSpec spec = planted_two_rule_scenario(9, 600);
    spec.rules = RuleSet(5);
    spec.alpha = Eigen::VectorXd(0);
    spec.lambda0 = inv_softplus(0.5);
    const auto [corpus, manifest] = simulate_corpus(spec);
    const PredicateFilterResult result = filter_predicates(corpus, quick_fit(), spec.hyper);
    CHECK(result.retained.empty());
}

TEST_CASE("filtering rejects an empty corpus") {
    CHECK_THROWS_AS((void)filter_predicates({}, quick_fit(), Hyperparams{}), ValidationError);
}

TEST_CASE("filtering with no covariate types returns an empty set") {
    ScenarioSpec spec;
    spec.num_types = 1;
    spec.target_type = 1;
    spec.horizon = 5.0;
    spec.num_sequences = 40;
    spec.seed = 2;
    spec.background_rates = {0.0};
    spec.value_dists = {ValueDistribution{}};
    spec.rules = RuleSet(1);
    spec.alpha = Eigen::VectorXd(0);
    spec.beta = Eigen::VectorXd::Zero(1);
    spec.lambda0 = inv_softplus(1.0);
    const auto [corpus, manifest] = simulate_corpus(spec);
    const PredicateFilterResult result = filter_predicates(corpus, quick_fit(), spec.hyper);
    CHECK(result.retained.empty());
}

TEST_CASE("pool of one evaluates exactly once") {
    ScenarioSpec spec = planted_two_rule_scenario(5, 60);
    const auto [corpus, manifest] = simulate_corpus(spec);
    CandidatePool pool = generate_candidates({3}, 5, 1, 5);
    REQUIRE(pool.size() == 1);
    MiningConfig config;
    config.subset_size = 1;
    config.budget = 10;
    config.fit = quick_fit();
    const MiningReport report = optimize_ruleset(pool, corpus, config, spec.hyper);
    CHECK(report.evaluations.size() == 1);
    CHECK(report.best_subset == std::vector<int>{0});
    CHECK(report.best_rules.size() == 1);
}

TEST_CASE("budget one performs one evaluation") {
    ScenarioSpec spec = planted_two_rule_scenario(6, 60);
    const auto [corpus, manifest] = simulate_corpus(spec);
    CandidatePool pool = generate_candidates({1, 3}, 5, 1, 5);
    MiningConfig config;
    config.subset_size = 1;
    config.budget = 1;
    config.fit = quick_fit();
    const MiningReport report = optimize_ruleset(pool, corpus, config, spec.hyper);
    CHECK(report.evaluations.size() == 1);
}

TEST_CASE("mining is deterministic") {
    ScenarioSpec spec = planted_two_rule_scenario(7, 80);
    const auto [corpus, manifest] = simulate_corpus(spec);
    const CandidatePool pool = generate_candidates({1, 2, 3}, 5, 2, 5);
    MiningConfig config;
    config.subset_size = 2;
    config.budget = 12;
    config.batch_size = 4;
    config.seed = 31;
    config.fit = quick_fit();
    const MiningReport a = optimize_ruleset(pool, corpus, config, spec.hyper);
    const MiningReport b = optimize_ruleset(pool, corpus, config, spec.hyper);
    REQUIRE(a.evaluations.size() == b.evaluations.size());
    for (std::size_t i = 0; i < a.evaluations.size(); ++i) {
        CHECK(a.evaluations[i].subset == b.evaluations[i].subset);
        CHECK(a.evaluations[i].holdout_loglik == b.evaluations[i].holdout_loglik);
    }
    CHECK(a.best_subset == b.best_subset);
    CHECK(a.probability_trajectory == b.probability_trajectory);
}

TEST_CASE("cache soundness: no subset fitted twice, count within budget") {
    ScenarioSpec spec = planted_two_rule_scenario(8, 60);
    const auto [corpus, manifest] = simulate_corpus(spec);
    const CandidatePool pool = generate_candidates({1, 2}, 5, 2, 5);
    MiningConfig config;
    config.subset_size = 2;
    config.budget = 200; // more than C(12, 2) = 66
    config.fit = quick_fit();
    const MiningReport report = optimize_ruleset(pool, corpus, config, spec.hyper);
    CHECK(report.evaluations.size() <= 66);
    std::set<std::vector<int>> seen;
    for (const SubsetEvaluation& e : report.evaluations) CHECK(seen.insert(e.subset).second);
    // with budget above C(n,k), everything is evaluated
    CHECK(report.evaluations.size() == 66);
}

TEST_CASE("exhaustive equivalence on a small pool") {
    ScenarioSpec spec = planted_two_rule_scenario(11, 150);
    const auto [corpus, manifest] = simulate_corpus(spec);
    CandidatePool pool = generate_candidates({1, 2, 3}, 5, 1, 5);
    // add the planted before-rule so the optimum is interesting
    pool.candidates.push_back(
        canonicalize_rule(Rule::combine(TemporalRelation::Before, Rule::leaf(1, 5), Rule::leaf(2, 5))));
    std::sort(pool.candidates.begin(), pool.candidates.end());
    REQUIRE(pool.size() == 4);

    MiningConfig config;
    config.subset_size = 2;
    config.budget = 20; // >= C(4,2) = 6
    config.fit = quick_fit();
    const MiningReport report = optimize_ruleset(pool, corpus, config, spec.hyper);
    CHECK(report.evaluations.size() == 6);
    // brute force over the evaluation log reproduces the winner
    const SubsetEvaluation* best = &report.evaluations.front();
    for (const SubsetEvaluation& e : report.evaluations)
        if (e.holdout_loglik > best->holdout_loglik ||
            (e.holdout_loglik == best->holdout_loglik && e.subset < best->subset))
            best = &e;
    CHECK(best->subset == report.best_subset);
}

TEST_CASE("best score is the maximum over evaluations and monotone over prefixes") {
    ScenarioSpec spec = planted_two_rule_scenario(13, 80);
    const auto [corpus, manifest] = simulate_corpus(spec);
    const CandidatePool pool = generate_candidates({1, 2, 3}, 5, 2, 5);
    MiningConfig config;
    config.subset_size = 2;
    config.budget = 15;
    config.fit = quick_fit();
    const MiningReport report = optimize_ruleset(pool, corpus, config, spec.hyper);
    double running = -1e300;
    for (const SubsetEvaluation& e : report.evaluations)
        running = std::max(running, e.holdout_loglik);
    CHECK(running == report.best_score);
}

TEST_CASE("filtering soundness: winners contain filtered predicates only") {
    ScenarioSpec spec = planted_two_rule_scenario(17, 200);
    const auto [corpus, manifest] = simulate_corpus(spec);
    MiningConfig config;
    config.subset_size = 2;
    config.budget = 30;
    config.fit = quick_fit();
    const MinePipelineResult result = mine_rules(corpus, 2, config, spec.hyper);
    if (!result.report.empty_pool) {
        std::set<int> filtered(result.filter.retained.begin(), result.filter.retained.end());
        for (const Rule& r : result.report.best_rules.rules())
            for (int leaf : r.leaf_types()) CHECK(filtered.count(leaf) == 1);
    }
    // inclusion probabilities stay within bounds
    for (const auto& probs : result.report.probability_trajectory)
        for (double p : probs) {
            CHECK(p >= 0.01);
            CHECK(p <= 0.99);
        }
}

TEST_CASE("mining fails loudly when every subset fit blows up") {
    // two same-type events with huge values overflow the numeric signal, so
    // every design carries non-finite features and every fit aborts
    std::vector<Event> events{{1.0, 1, 1e308}, {1.001, 1, 1e308}, {2.0, 2, 0.0}};
    std::vector<EventSequence> corpus{EventSequence(events, 5.0, 2, 2)};
    CandidatePool pool = generate_candidates({1}, 2, 1, 2);
    MiningConfig config;
    config.subset_size = 1;
    config.budget = 3;
    config.fit = quick_fit();
    try {
        (void)optimize_ruleset(pool, corpus, config, Hyperparams{});
        FAIL("expected NumericError");
    } catch (const NumericError& e) {
        CHECK(std::string(e.what()).find("mining failed") != std::string::npos);
    }
}

TEST_CASE("pipeline clamps the subset size to the pool") {
    ScenarioSpec spec = planted_two_rule_scenario(21, 120);
    // only one informative predicate, so the pool is tiny
    spec.rules = RuleSet(5);
    spec.rules.insert(Rule::leaf(3, 5));
    spec.alpha = Eigen::VectorXd::Constant(1, 2.5);
    const auto [corpus, manifest] = simulate_corpus(spec);
    MiningConfig config;
    config.subset_size = 10; // far larger than any plausible pool here
    config.budget = 8;
    config.fit = quick_fit();
    const MinePipelineResult result = mine_rules(corpus, 1, config, spec.hyper);
    if (!result.report.empty_pool)
        CHECK(result.report.best_rules.size() <= result.report.pool.size());
}

TEST_CASE("subset size above pool size is rejected") {
    ScenarioSpec spec = planted_two_rule_scenario(19, 20);
    const auto [corpus, manifest] = simulate_corpus(spec);
    const CandidatePool pool = generate_candidates({1}, 5, 1, 5);
    MiningConfig config;
    config.subset_size = 3;
    config.budget = 5;
    CHECK_THROWS_AS((void)optimize_ruleset(pool, corpus, config, spec.hyper), ValidationError);
}
