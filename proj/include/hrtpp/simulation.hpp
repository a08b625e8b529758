#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "hrtpp/core.hpp"
#include "hrtpp/rule_dsl.hpp"

namespace hrtpp {

// Numeric-value distribution attached to a covariate stream.
struct ValueDistribution {
    enum class Kind { Constant, Normal } kind = Kind::Constant;
    double mean = 0.0;
    double stddev = 0.0;
};

// Ground-truth generative model for synthetic corpora: independent homogeneous
// Poisson covariate streams plus a target stream driven by the planted rules
// through the full intensity.
struct ScenarioSpec {
    int num_types = 2;
    int target_type = 2;
    double horizon = 10.0;
    std::size_t num_sequences = 1;
    std::uint64_t seed = 1;
    std::vector<double> background_rates;        // per type; target entry ignored
    std::vector<ValueDistribution> value_dists;  // per type
    RuleSet rules;                               // planted rules, target = target_type
    Eigen::VectorXd alpha;                       // true rule weights
    Eigen::VectorXd beta;                        // true numeric weights
    double lambda0 = 0.0;
    double gamma_raw = 0.0;
    Hyperparams hyper;
    std::vector<std::string> type_names;         // optional; defaults X1..XK

    void validate() const;
    [[nodiscard]] ModelParams true_params() const;
    [[nodiscard]] NameTable name_table() const;
};

struct CorpusManifest {
    std::size_t num_sequences = 0;
    std::uint64_t seed = 0;
    std::string spec_hash; // changes iff the scenario changes
    std::vector<std::string> true_rules; // DSL text with weight annotations
    std::vector<std::string> type_names;
    int num_types = 0;
    int target_type = 0;
};

// One sequence, reproducible from (spec, seed) alone. Covariate streams are
// homogeneous Poisson; target events come from Ogata thinning against the true
// intensity, whose dominating bound is refreshed at every covariate event and
// trigger (the pre-activation only decays in between).
[[nodiscard]] EventSequence simulate_sequence(const ScenarioSpec& spec, std::uint64_t seed);

// M sequences with per-index derived seeds, plus the manifest.
[[nodiscard]] std::pair<std::vector<EventSequence>, CorpusManifest> simulate_corpus(
    const ScenarioSpec& spec);

// Stable content hash of a scenario.
[[nodiscard]] std::string scenario_hash(const ScenarioSpec& spec);

} // namespace hrtpp
