#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hrtpp/simulation.hpp"
#include "hrtpp/training.hpp"
#include "oracles.hpp"

using namespace hrtpp;

namespace {

double inv_softplus(double y) { return std::log(std::expm1(y)); }

// homogeneous Poisson corpus at a known rate
std::vector<EventSequence> poisson_corpus(double rate, double horizon, std::size_t m,
                                          std::uint64_t seed) {
    ScenarioSpec spec;
    spec.num_types = 1;
    spec.target_type = 1;
    spec.horizon = horizon;
    spec.num_sequences = m;
    spec.seed = seed;
    spec.background_rates = {0.0};
    spec.value_dists = {ValueDistribution{}};
    spec.rules = RuleSet(1);
    spec.alpha = Eigen::VectorXd(0);
    spec.beta = Eigen::VectorXd::Zero(1);
    spec.lambda0 = inv_softplus(rate);
    return simulate_corpus(spec).first;
}

FittedModel constant_model(double rate) {
    FittedModel model;
    model.rules = RuleSet(1);
    model.num_types = 1;
    model.params = ModelParams::make(model.rules, 1, Hyperparams{});
    model.params.lambda0 = inv_softplus(rate);
    return model;
}

} // namespace

TEST_CASE("poisson rate recovery within five percent") {
    const double true_rate = 2.0;
    const std::vector<EventSequence> corpus = poisson_corpus(true_rate, 10.0, 500, 99);
    FitConfig config;
    config.max_epochs = 300;
    const FittedModel model = fit(corpus, RuleSet(1), config, Hyperparams{});
    const double fitted_rate = softplus_scaled(model.params.lambda0, model.params.gamma());
    // MLE oracle: count / time
    double events = 0.0, time = 0.0;
    for (const EventSequence& s : corpus) {
        events += static_cast<double>(s.target_times().size());
        time += s.horizon();
    }
    const double mle = events / time;
    CHECK(std::abs(fitted_rate - true_rate) / true_rate < 0.05);
    CHECK(std::abs(fitted_rate - mle) / mle < 0.02); // close to the closed-form MLE
}

TEST_CASE("zero-epoch fit returns the initial parameters and their NLL") {
    const std::vector<EventSequence> corpus = poisson_corpus(1.5, 8.0, 20, 7);
    FitConfig config;
    config.max_epochs = 0;
    const FittedModel model = fit(corpus, RuleSet(1), config, Hyperparams{});
    CHECK(model.epochs_run == 0);
    CHECK(model.params.alpha.size() == 0);
    CHECK(model.params.gamma_raw == 0.0);
    CHECK(model.train_nll ==
          doctest::Approx(mean_nll(corpus, model.rules, model.params)).epsilon(1e-12));
}

TEST_CASE("fit is deterministic") {
    const std::vector<EventSequence> corpus = poisson_corpus(1.0, 6.0, 30, 11);
    FitConfig config;
    config.max_epochs = 60;
    const FittedModel a = fit(corpus, RuleSet(1), config, Hyperparams{});
    const FittedModel b = fit(corpus, RuleSet(1), config, Hyperparams{});
    CHECK(a.params.lambda0 == b.params.lambda0);
    CHECK(a.params.gamma_raw == b.params.gamma_raw);
    CHECK(a.train_nll == b.train_nll);
    CHECK(a.nll_history == b.nll_history);
}

TEST_CASE("objective history is non-increasing and ends at or below the start") {
    const std::vector<EventSequence> corpus = poisson_corpus(2.5, 6.0, 40, 13);
    FitConfig config;
    config.max_epochs = 120;
    const FittedModel model = fit(corpus, RuleSet(1), config, Hyperparams{});
    REQUIRE(!model.nll_history.empty());
    for (std::size_t i = 1; i < model.nll_history.size(); ++i)
        CHECK(model.nll_history[i] <= model.nll_history[i - 1] + 1e-9);
    CHECK(model.nll_history.back() <= model.nll_history.front() + 1e-12);
}

TEST_CASE("planted rule weight is recovered with the right sign") {
    ScenarioSpec spec;
    spec.num_types = 3;
    spec.target_type = 3;
    spec.horizon = 20.0;
    spec.num_sequences = 400;
    spec.seed = 5;
    spec.background_rates = {0.5, 0.5, 0.0};
    spec.value_dists.assign(3, ValueDistribution{ValueDistribution::Kind::Constant, 1.0, 0.0});
    spec.rules = RuleSet(3);
    spec.rules.insert(
        Rule::combine(TemporalRelation::Before, Rule::leaf(1, 3), Rule::leaf(2, 3)));
    spec.alpha = Eigen::VectorXd::Constant(1, 2.0);
    spec.beta = Eigen::VectorXd::Zero(3);
    spec.lambda0 = inv_softplus(0.2);
    spec.hyper.delta = 0.05;
    const auto [corpus, manifest] = simulate_corpus(spec);

    FitConfig config;
    config.max_epochs = 250;
    const auto [train_idx, test_idx] = train_test_split(corpus.size(), 0.2, 17);
    std::vector<EventSequence> train, test;
    for (std::size_t i : train_idx) train.push_back(corpus[i]);
    for (std::size_t i : test_idx) test.push_back(corpus[i]);

    const FittedModel with_rule = fit(train, spec.rules, config, spec.hyper);
    CHECK(with_rule.params.alpha(0) > 1.0);

    const FittedModel rule_free = fit(train, RuleSet(3), config, spec.hyper);
    const double heldout_with = mean_nll(test, with_rule.rules, with_rule.params);
    const double heldout_free = mean_nll(test, rule_free.rules, rule_free.params);
    CHECK(heldout_with < heldout_free);
}

TEST_CASE("fit rejects an empty corpus and mismatched schemas") {
    FitConfig config;
    CHECK_THROWS_AS((void)fit({}, RuleSet(1), config, Hyperparams{}), ValidationError);
    std::vector<EventSequence> mixed{EventSequence({}, 1.0, 2, 1), EventSequence({}, 1.0, 3, 1)};
    CHECK_THROWS_AS((void)fit(mixed, RuleSet(1), config, Hyperparams{}), ValidationError);
}

TEST_CASE("next event density: exponential closed form for constant intensity") {
    const FittedModel model = constant_model(1.3);
    const EventSequence history({}, 10.0, 1, 1);
    for (double tau : {0.0, 0.5, 1.7}) {
        const double got = next_event_density(model, history, 2.0, 2.0 + tau);
        CHECK(got == doctest::Approx(1.3 * std::exp(-1.3 * tau)).epsilon(1e-9));
    }
    // density at t_query == t_from equals the intensity there
    CHECK(next_event_density(model, history, 2.0, 2.0) == doctest::Approx(1.3).epsilon(1e-12));
}

TEST_CASE("density integrates to nearly one") {
    // bounded-below intensity: constant-rate case, quadrature over [t, t+50/rate]
    const double rate = 0.8;
    const FittedModel model = constant_model(rate);
    const EventSequence history({}, 10.0, 1, 1);
    const double t0 = 1.0;
    double mass = 0.0;
    const int panels = 4000;
    const double upper = 50.0 / rate;
    const double h = upper / panels;
    for (int i = 0; i < panels; ++i) {
        const double a = t0 + i * h;
        mass += (h / 6.0) * (next_event_density(model, history, t0, a) +
                             4.0 * next_event_density(model, history, t0, a + 0.5 * h) +
                             next_event_density(model, history, t0, a + h));
    }
    CHECK(mass >= 0.99);
    CHECK(mass <= 1.0 + 1e-6);
}

TEST_CASE("predict_next_time: exponential mean for constant intensity") {
    const FittedModel model = constant_model(2.0);
    const EventSequence history({}, 10.0, 1, 1);
    CHECK(predict_next_time(model, history, 0.0) == doctest::Approx(0.5).epsilon(1e-8));
    const FittedModel slow = constant_model(0.4);
    CHECK(predict_next_time(slow, history, 3.0) - 3.0 == doctest::Approx(2.5).epsilon(1e-8));
}

TEST_CASE("survival starts at one and decreases") {
    const FittedModel model = constant_model(1.0);
    const EventSequence history({}, 10.0, 1, 1);
    const FrozenIntensity frozen = freeze_history(model, history, 1.0);
    CHECK(survival(frozen, 1.0) == 1.0);
    double prev = 1.0;
    for (double t = 1.5; t < 6.0; t += 0.5) {
        const double s = survival(frozen, t);
        CHECK(s < prev);
        prev = s;
    }
}

TEST_CASE("prediction anchor must not precede the history") {
    const FittedModel model = constant_model(1.0);
    std::vector<Event> ev{{4.0, 1, 0.0}};
    const EventSequence history(ev, 10.0, 1, 1);
    CHECK_THROWS_AS((void)predict_next_time(model, history, 2.0), ValidationError);
}

TEST_CASE("prediction respects rule history") {
    // a freshly triggered excitatory rule shortens the expected wait
    RuleSet rules(2);
    rules.insert(Rule::leaf(1, 2));
    FittedModel model;
    model.rules = rules;
    model.num_types = 2;
    model.params = ModelParams::make(rules, 2, Hyperparams{});
    model.params.lambda0 = inv_softplus(0.5);
    model.params.alpha(0) = 2.0;

    const EventSequence quiet({}, 10.0, 2, 2);
    std::vector<Event> ev{{1.0, 1, 0.0}};
    const EventSequence excited(ev, 10.0, 2, 2);
    CHECK(predict_next_time(model, excited, 1.0) < predict_next_time(model, quiet, 1.0));
}

TEST_CASE("prediction reports divergence when the intensity vanishes") {
    FittedModel dead = constant_model(1.0);
    dead.params.lambda0 = -800.0; // softplus underflows to exactly zero
    const EventSequence history({}, 10.0, 1, 1);
    CHECK_THROWS_AS((void)predict_next_time(dead, history, 0.0), NumericError);
    std::mt19937_64 rng(1);
    CHECK_THROWS_AS((void)sample_next_time(dead, history, 0.0, rng), NumericError);

    // a tiny-but-positive rate is not divergence, just a very late expectation
    FittedModel slow = constant_model(1.0);
    slow.params.lambda0 = -50.0;
    const double expect = predict_next_time(slow, history, 0.0);
    CHECK(expect == doctest::Approx(1.0 / softplus_scaled(-50.0, 1.0)).epsilon(1e-9));
}

TEST_CASE("sampled next times follow the model distribution") {
    const double rate = 1.7;
    const FittedModel model = constant_model(rate);
    const EventSequence history({}, 10.0, 1, 1);
    std::mt19937_64 rng(2718);
    std::vector<double> gaps;
    for (int i = 0; i < 4000; ++i) gaps.push_back(sample_next_time(model, history, 1.0, rng) - 1.0);
    const double d = oracles::ks_statistic(
        gaps, [&](double x) { return 1.0 - std::exp(-rate * x); });
    CHECK(oracles::ks_pvalue(d, gaps.size()) > 0.01);
}

TEST_CASE("train/test split is deterministic and disjoint") {
    const auto [train_a, test_a] = train_test_split(100, 0.2, 4);
    const auto [train_b, test_b] = train_test_split(100, 0.2, 4);
    CHECK(train_a == train_b);
    CHECK(test_a == test_b);
    CHECK(train_a.size() == 80);
    CHECK(test_a.size() == 20);
    for (std::size_t i : test_a)
        CHECK(std::find(train_a.begin(), train_a.end(), i) == train_a.end());
    const auto [train_c, test_c] = train_test_split(100, 0.2, 5);
    CHECK(train_a != train_c);
}

TEST_CASE("batch NLL is bitwise independent of the thread count") {
    const std::vector<EventSequence> corpus = poisson_corpus(1.2, 8.0, 60, 3);
    RuleSet rules(1);
    ModelParams params = ModelParams::make(rules, 1, Hyperparams{});
    params.lambda0 = 0.4;
    // slot-based reduction: serial and threaded runs agree bit for bit
    std::vector<LikelihoodDesign> designs(corpus.size());
    for (std::size_t i = 0; i < corpus.size(); ++i)
        designs[i] = LikelihoodDesign::build(corpus[i], rules, params.hyper);
    auto total_with_threads = [&](unsigned threads) {
        std::vector<double> slots(corpus.size());
        parallel_for(corpus.size(),
                     [&](std::size_t i) { slots[i] = nll_from_design(designs[i], params).total; },
                     threads);
        double sum = 0.0;
        for (double v : slots) sum += v;
        return sum;
    };
    const double serial = total_with_threads(1);
    CHECK(total_with_threads(2) == serial);
    CHECK(total_with_threads(4) == serial);
}

TEST_CASE("corpus fingerprint tracks content") {
    const std::vector<EventSequence> a = poisson_corpus(1.0, 5.0, 10, 1);
    const std::vector<EventSequence> b = poisson_corpus(1.0, 5.0, 10, 1);
    const std::vector<EventSequence> c = poisson_corpus(1.0, 5.0, 10, 2);
    CHECK(corpus_fingerprint(a) == corpus_fingerprint(b));
    CHECK(corpus_fingerprint(a) != corpus_fingerprint(c));
}
