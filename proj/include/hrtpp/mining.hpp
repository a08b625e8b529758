#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "hrtpp/training.hpp"

namespace hrtpp {

// Phase-one screening: a predicate survives when the single rule "X_k -> Y"
// improves held-out NLL over a rule-free baseline. Both fits keep numeric
// intensity active for every type, so the measured gain is rule value beyond
// numeric value.
struct PredicateFilterResult {
    std::vector<int> retained;                 // type ids, ascending
    std::vector<double> nll_delta;             // per type (index k-1); positive = improvement
    double baseline_holdout_nll = 0.0;
    double tolerance = 1e-3;
};

[[nodiscard]] PredicateFilterResult filter_predicates(const std::vector<EventSequence>& corpus,
                                                      const FitConfig& config,
                                                      const Hyperparams& hyper,
                                                      double tolerance = 1e-3,
                                                      const NLLOptions& options = {});

// Candidate rules over the filtered predicates: every body of 1..max_predicates
// leaves, all relation assignments and tree shapes, canonical and deduplicated,
// sorted by structural encoding.
struct CandidatePool {
    std::vector<Rule> candidates;
    std::vector<int> filtered_predicates;
    int num_types = 0;
    int target_type = 0;
    int max_predicates = Rule::kDefaultMaxPredicates;
    // m -> K^m * C^(m-1), the unrestricted configuration count
    std::vector<std::pair<int, double>> raw_space_by_m;

    [[nodiscard]] std::size_t size() const noexcept { return candidates.size(); }
};

struct CandidateGenOptions {
    std::size_t pool_cap = 5000;
    // When set, leaves may come from any non-target predicate as long as each
    // rule keeps at least one filtered leaf.
    bool allow_unfiltered_leaves = false;
};

[[nodiscard]] CandidatePool generate_candidates(const std::vector<int>& filtered, int num_types,
                                                int max_predicates, int target_type,
                                                const CandidateGenOptions& options = {});

// Unrestricted configuration count for rules of m predicates.
[[nodiscard]] double raw_search_space(int num_types, int m, int num_relations = 3);

struct SubsetEvaluation {
    std::vector<int> subset; // sorted candidate indices
    double holdout_loglik = 0.0;
    double train_nll = 0.0;
    int epochs_run = 0;
};

struct MiningConfig {
    std::size_t subset_size = 10;
    std::size_t budget = 60;
    std::size_t batch_size = 8;
    std::uint64_t seed = 1;
    double epsilon_greedy = 0.1;
    double elite_quantile = 0.25;
    double smoothing = 0.7; // weight kept on the previous probabilities
    double prob_floor = 0.01;
    double prob_ceil = 0.99;
    double test_fraction = 0.2;
    FitConfig fit;
};

struct MiningReport {
    CandidatePool pool;
    std::vector<SubsetEvaluation> evaluations;               // evaluation order
    std::vector<std::vector<double>> probability_trajectory; // one snapshot per batch
    std::vector<int> best_subset;
    double best_score = 0.0;
    RuleSet best_rules;
    FittedModel best_model; // the winning subset's fit on the internal train split
    std::uint64_t seed = 0;
    std::size_t cache_hits = 0; // sampler proposals that were already evaluated
    bool empty_pool = false;
};

// Subset search: sample fixed-size subsets proportionally to inclusion
// probabilities (with epsilon-greedy exploration), fit each on an internal
// 80/20 split, score by held-out log-likelihood, and refine the probabilities
// by elite reweighting. Cached subsets are never refit; ties break on
// lexicographic candidate indices.
[[nodiscard]] MiningReport optimize_ruleset(const CandidatePool& pool,
                                            const std::vector<EventSequence>& corpus,
                                            const MiningConfig& config,
                                            const Hyperparams& hyper,
                                            const NLLOptions& options = {});

// Convenience pipeline: filter, generate, optimize.
struct MinePipelineResult {
    PredicateFilterResult filter;
    MiningReport report;
};
[[nodiscard]] MinePipelineResult mine_rules(const std::vector<EventSequence>& corpus,
                                            int max_predicates, const MiningConfig& config,
                                            const Hyperparams& hyper,
                                            const CandidateGenOptions& gen_options = {},
                                            const NLLOptions& options = {});

} // namespace hrtpp
