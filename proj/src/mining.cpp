#include "hrtpp/mining.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

namespace hrtpp {

namespace {

std::vector<const LikelihoodDesign*> select_designs(const std::vector<LikelihoodDesign>& all,
                                                    const std::vector<std::size_t>& idx) {
    std::vector<const LikelihoodDesign*> out;
    out.reserve(idx.size());
    for (std::size_t i : idx) out.push_back(&all[i]);
    return out;
}

double empirical_rate_of(const std::vector<EventSequence>& corpus,
                         const std::vector<std::size_t>& idx) {
    double events = 0.0, time = 0.0;
    for (std::size_t i : idx) {
        events += static_cast<double>(corpus[i].target_times().size());
        time += corpus[i].horizon();
    }
    return std::max(events / std::max(time, 1e-12), 1e-3);
}

double mean_design_nll(const std::vector<const LikelihoodDesign*>& designs,
                       const ModelParams& params) {
    if (designs.empty()) return 0.0;
    std::vector<double> slots(designs.size());
    parallel_for(designs.size(), [&](std::size_t i) {
        slots[i] = nll_from_design(*designs[i], params).total;
    });
    double sum = 0.0;
    for (double v : slots) sum += v;
    return sum / static_cast<double>(designs.size());
}

} // namespace

PredicateFilterResult filter_predicates(const std::vector<EventSequence>& corpus,
                                        const FitConfig& config, const Hyperparams& hyper,
                                        double tolerance, const NLLOptions& options) {
    if (corpus.empty()) throw ValidationError("corpus is empty");
    const int num_types = corpus.front().num_types();
    const int target = corpus.front().target_type();

    const auto [train_idx, test_idx] = train_test_split(corpus.size(), 0.2, config.seed);
    const bool have_test = !test_idx.empty();
    const std::vector<std::size_t>& score_idx = have_test ? test_idx : train_idx;

    PredicateFilterResult result;
    result.tolerance = tolerance;
    result.nll_delta.assign(static_cast<std::size_t>(num_types), 0.0);

    auto holdout_nll_for = [&](const RuleSet& rules) {
        std::vector<LikelihoodDesign> train_designs(train_idx.size());
        parallel_for(train_idx.size(), [&](std::size_t i) {
            train_designs[i] = LikelihoodDesign::build(corpus[train_idx[i]], rules, hyper, options);
        });
        std::vector<const LikelihoodDesign*> train_ptrs(train_designs.size());
        for (std::size_t i = 0; i < train_designs.size(); ++i) train_ptrs[i] = &train_designs[i];

        std::vector<bool> all_on(static_cast<std::size_t>(num_types), true);
        const DesignFit df = fit_designs(train_ptrs, rules.size(), num_types, config, hyper,
                                         all_on, nullptr, empirical_rate_of(corpus, train_idx));
        std::vector<LikelihoodDesign> score_designs(score_idx.size());
        parallel_for(score_idx.size(), [&](std::size_t i) {
            score_designs[i] = LikelihoodDesign::build(corpus[score_idx[i]], rules, hyper, options);
        });
        std::vector<const LikelihoodDesign*> score_ptrs(score_designs.size());
        for (std::size_t i = 0; i < score_designs.size(); ++i) score_ptrs[i] = &score_designs[i];
        return mean_design_nll(score_ptrs, df.params);
    };

    result.baseline_holdout_nll = holdout_nll_for(RuleSet(target));

    for (int k = 1; k <= num_types; ++k) {
        if (k == target) continue;
        RuleSet single(target);
        single.insert(Rule::leaf(k, target));
        const double nll_k = holdout_nll_for(single);
        const double delta = result.baseline_holdout_nll - nll_k;
        result.nll_delta[static_cast<std::size_t>(k - 1)] = delta;
        if (delta > tolerance) result.retained.push_back(k);
    }
    return result;
}

double raw_search_space(int num_types, int m, int num_relations) {
    return std::pow(static_cast<double>(num_types), m) *
           std::pow(static_cast<double>(num_relations), m - 1);
}

namespace {

// All body trees over an ordered leaf tuple; trees differing in shape or
// relation assignment are distinct rules (canonicalization only sorts
// symmetric operands, it does not re-associate).
void enumerate_bodies(const std::vector<int>& leaves, std::size_t lo, std::size_t hi, int target,
                      std::vector<Rule>& out) {
    if (hi - lo == 1) {
        out.push_back(Rule::leaf(leaves[lo], target));
        return;
    }
    constexpr TemporalRelation kRelations[] = {TemporalRelation::And, TemporalRelation::Before,
                                               TemporalRelation::Equal};
    for (std::size_t split = lo + 1; split < hi; ++split) {
        std::vector<Rule> left, right;
        enumerate_bodies(leaves, lo, split, target, left);
        enumerate_bodies(leaves, split, hi, target, right);
        for (const Rule& l : left)
            for (const Rule& r : right)
                for (TemporalRelation rel : kRelations)
                    out.push_back(Rule::combine(rel, l, r));
    }
}

} // namespace

CandidatePool generate_candidates(const std::vector<int>& filtered, int num_types,
                                  int max_predicates, int target_type,
                                  const CandidateGenOptions& options) {
    if (max_predicates < 1 || max_predicates > Rule::kDefaultMaxPredicates)
        throw ValidationError("max_predicates must be in [1, " +
                              std::to_string(Rule::kDefaultMaxPredicates) + "]");
    CandidatePool pool;
    pool.num_types = num_types;
    pool.target_type = target_type;
    pool.max_predicates = max_predicates;
    pool.filtered_predicates = filtered;
    std::sort(pool.filtered_predicates.begin(), pool.filtered_predicates.end());
    for (int m = 1; m <= max_predicates; ++m)
        pool.raw_space_by_m.emplace_back(m, raw_search_space(num_types, m));
    if (filtered.empty()) return pool; // degenerate: caller warns and proceeds rule-free

    std::set<int> filtered_set(filtered.begin(), filtered.end());
    for (int k : filtered) {
        if (k < 1 || k > num_types)
            throw ValidationError("filtered predicate out of range: " + std::to_string(k));
        if (k == target_type)
            throw ValidationError("target type cannot be a filtered predicate");
    }

    std::vector<int> domain;
    if (options.allow_unfiltered_leaves) {
        for (int k = 1; k <= num_types; ++k)
            if (k != target_type) domain.push_back(k);
    } else {
        domain = pool.filtered_predicates;
    }

    std::set<std::vector<int>> seen;
    for (int m = 1; m <= max_predicates; ++m) {
        std::vector<int> leaves(static_cast<std::size_t>(m));
        // odometer over the leaf domain
        std::vector<std::size_t> digits(static_cast<std::size_t>(m), 0);
        while (true) {
            for (int i = 0; i < m; ++i) leaves[static_cast<std::size_t>(i)] = domain[digits[static_cast<std::size_t>(i)]];
            const bool has_filtered = std::any_of(leaves.begin(), leaves.end(), [&](int k) {
                return filtered_set.count(k) > 0;
            });
            if (has_filtered) {
                std::vector<Rule> bodies;
                enumerate_bodies(leaves, 0, static_cast<std::size_t>(m), target_type, bodies);
                for (const Rule& r : bodies) {
                    Rule canon = canonicalize_rule(r);
                    if (seen.insert(canon.encoding()).second)
                        pool.candidates.push_back(std::move(canon));
                }
            }
            // advance odometer
            int pos = m - 1;
            while (pos >= 0 && ++digits[static_cast<std::size_t>(pos)] == domain.size()) {
                digits[static_cast<std::size_t>(pos)] = 0;
                --pos;
            }
            if (pos < 0) break;
        }
    }
    std::sort(pool.candidates.begin(), pool.candidates.end());
    if (pool.candidates.size() > options.pool_cap)
        throw ValidationError("candidate pool size " + std::to_string(pool.candidates.size()) +
                              " exceeds cap " + std::to_string(options.pool_cap) +
                              "; tighten predicate filtering or lower max_predicates");
    return pool;
}

namespace {

class SubsetSampler {
public:
    SubsetSampler(const std::vector<double>& probs, double epsilon, std::mt19937_64& rng)
        : probs_(probs), epsilon_(epsilon), rng_(rng) {}

    std::vector<int> sample(std::size_t size) {
        std::vector<int> remaining(probs_.size());
        for (std::size_t i = 0; i < probs_.size(); ++i) remaining[i] = static_cast<int>(i);
        std::vector<int> subset;
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        for (std::size_t d = 0; d < size; ++d) {
            std::size_t pick = 0;
            if (unif(rng_) < epsilon_) {
                pick = static_cast<std::size_t>(unif(rng_) *
                                                static_cast<double>(remaining.size()));
                pick = std::min(pick, remaining.size() - 1);
            } else {
                double total = 0.0;
                for (int i : remaining) total += probs_[static_cast<std::size_t>(i)];
                double u = unif(rng_) * total;
                for (; pick + 1 < remaining.size(); ++pick) {
                    u -= probs_[static_cast<std::size_t>(remaining[pick])];
                    if (u <= 0.0) break;
                }
            }
            subset.push_back(remaining[pick]);
            remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
        }
        std::sort(subset.begin(), subset.end());
        return subset;
    }

private:
    const std::vector<double>& probs_;
    double epsilon_;
    std::mt19937_64& rng_;
};

// Lexicographic walk over size-k combinations, skipping already-taken sets.
class CombinationCursor {
public:
    CombinationCursor(std::size_t n, std::size_t k) : n_(n), k_(k) {
        current_.resize(k_);
        for (std::size_t i = 0; i < k_; ++i) current_[i] = static_cast<int>(i);
        done_ = k_ > n_;
    }

    std::optional<std::vector<int>> next_not_in(const std::set<std::vector<int>>& taken) {
        while (!done_) {
            std::vector<int> c = current_;
            advance();
            if (taken.find(c) == taken.end()) return c;
        }
        return std::nullopt;
    }

private:
    std::size_t n_, k_;
    std::vector<int> current_;
    bool done_ = false;

    void advance() {
        int i = static_cast<int>(k_) - 1;
        while (i >= 0 &&
               current_[static_cast<std::size_t>(i)] ==
                   static_cast<int>(n_ - k_ + static_cast<std::size_t>(i)))
            --i;
        if (i < 0) {
            done_ = true;
            return;
        }
        ++current_[static_cast<std::size_t>(i)];
        for (std::size_t j = static_cast<std::size_t>(i) + 1; j < k_; ++j)
            current_[j] = current_[j - 1] + 1;
    }
};

} // namespace

MiningReport optimize_ruleset(const CandidatePool& pool, const std::vector<EventSequence>& corpus,
                              const MiningConfig& config, const Hyperparams& hyper,
                              const NLLOptions& options) {
    MiningReport report;
    report.pool = pool;
    report.seed = config.seed;
    report.best_rules = RuleSet(pool.target_type);
    if (pool.candidates.empty()) {
        report.empty_pool = true;
        return report;
    }
    if (config.subset_size > pool.size())
        throw ValidationError("subset_size exceeds pool size");
    if (config.budget < 1) throw ValidationError("mining budget must be >= 1");
    if (corpus.empty()) throw ValidationError("corpus is empty");

    const int num_types = corpus.front().num_types();
    RuleSet pool_rules(pool.target_type);
    for (const Rule& r : pool.candidates) pool_rules.insert(r);
    if (pool_rules.size() != pool.size())
        throw ValidationError("candidate pool contains duplicates");

    // one design pool; subset fits freeze the excluded rule weights at zero
    std::vector<LikelihoodDesign> designs(corpus.size());
    parallel_for(corpus.size(), [&](std::size_t i) {
        designs[i] = LikelihoodDesign::build(corpus[i], pool_rules, hyper, options);
    });
    const auto [train_idx, test_idx] = train_test_split(corpus.size(), config.test_fraction,
                                                        config.seed);
    const std::vector<const LikelihoodDesign*> train = select_designs(designs, train_idx);
    const std::vector<const LikelihoodDesign*> test = select_designs(designs, test_idx);
    const double train_rate = empirical_rate_of(corpus, train_idx);

    std::vector<double> probs(pool.size(), 0.5);
    std::mt19937_64 rng(derive_seed(config.seed, 0xB0));
    std::set<std::vector<int>> evaluated_keys;
    CombinationCursor cursor(pool.size(), config.subset_size);
    std::map<std::vector<int>, ModelParams> fitted_params;

    std::size_t fits_done = 0;
    std::size_t failed_fits = 0;
    std::string last_failure;
    while (fits_done < config.budget) {
        const std::size_t batch_size =
            std::min(config.batch_size, config.budget - fits_done);
        std::vector<std::vector<int>> batch;
        SubsetSampler sampler(probs, config.epsilon_greedy, rng);
        while (batch.size() < batch_size) {
            std::optional<std::vector<int>> chosen;
            for (int attempt = 0; attempt < 50; ++attempt) {
                std::vector<int> s = sampler.sample(config.subset_size);
                if (evaluated_keys.count(s) == 0) {
                    chosen = std::move(s);
                    break;
                }
                ++report.cache_hits;
            }
            if (!chosen) chosen = cursor.next_not_in(evaluated_keys);
            if (!chosen) break; // every subset evaluated
            evaluated_keys.insert(*chosen);
            batch.push_back(std::move(*chosen));
        }
        if (batch.empty()) break;

        std::vector<SubsetEvaluation> results(batch.size());
        std::vector<ModelParams> batch_params(batch.size());
        std::vector<std::string> batch_errors(batch.size());
        parallel_for(batch.size(), [&](std::size_t b) {
            const std::vector<int>& subset = batch[b];
            RuleSet subset_rules(pool.target_type);
            for (int idx : subset) subset_rules.insert(pool.candidates[static_cast<std::size_t>(idx)]);
            std::vector<bool> active(pool.size(), false);
            for (int idx : subset) active[static_cast<std::size_t>(idx)] = true;
            try {
                const DesignFit df =
                    fit_designs(train, pool.size(), num_types, config.fit, hyper,
                                recompute_mask(subset_rules, num_types), &active, train_rate);
                results[b].subset = subset;
                results[b].train_nll = df.train_nll;
                results[b].epochs_run = df.epochs_run;
                results[b].holdout_loglik =
                    test.empty() ? -df.train_nll : -mean_design_nll(test, df.params);
                batch_params[b] = df.params;
            } catch (const Error& e) {
                batch_errors[b] = e.what();
            }
        });
        for (std::size_t b = 0; b < batch.size(); ++b) {
            if (!batch_errors[b].empty()) {
                ++failed_fits;
                last_failure = batch_errors[b];
                continue;
            }
            fitted_params.emplace(results[b].subset, batch_params[b]);
            report.evaluations.push_back(std::move(results[b]));
            ++fits_done;
        }

        // elite reweighting over everything evaluated so far
        if (!report.evaluations.empty()) {
            std::vector<std::size_t> order(report.evaluations.size());
            for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                const SubsetEvaluation& ea = report.evaluations[a];
                const SubsetEvaluation& eb = report.evaluations[b];
                if (ea.holdout_loglik != eb.holdout_loglik)
                    return ea.holdout_loglik > eb.holdout_loglik;
                return ea.subset < eb.subset;
            });
            const std::size_t elite_count = std::max<std::size_t>(
                1, static_cast<std::size_t>(
                       std::ceil(config.elite_quantile *
                                 static_cast<double>(report.evaluations.size()))));
            std::vector<double> freq(pool.size(), 0.0);
            for (std::size_t e = 0; e < elite_count; ++e)
                for (int idx : report.evaluations[order[e]].subset)
                    freq[static_cast<std::size_t>(idx)] += 1.0 / static_cast<double>(elite_count);
            for (std::size_t i = 0; i < probs.size(); ++i) {
                probs[i] = config.smoothing * probs[i] + (1.0 - config.smoothing) * freq[i];
                probs[i] = std::clamp(probs[i], config.prob_floor, config.prob_ceil);
            }
        }
        report.probability_trajectory.push_back(probs);
    }

    if (report.evaluations.empty())
        throw NumericError("mining failed: no subset fit succeeded (" +
                           std::to_string(failed_fits) + " failures; last: " + last_failure + ")");

    const SubsetEvaluation* best = &report.evaluations.front();
    for (const SubsetEvaluation& e : report.evaluations) {
        if (e.holdout_loglik > best->holdout_loglik ||
            (e.holdout_loglik == best->holdout_loglik && e.subset < best->subset))
            best = &e;
    }
    report.best_subset = best->subset;
    report.best_score = best->holdout_loglik;
    for (int idx : report.best_subset)
        report.best_rules.insert(pool.candidates[static_cast<std::size_t>(idx)]);

    // compact winner model: restrict the pool-wide parameters to the subset
    const ModelParams& pool_params = fitted_params.at(report.best_subset);
    FittedModel model;
    model.rules = report.best_rules;
    model.num_types = num_types;
    model.mask_mode = MaskMode::FromRules;
    model.params = ModelParams::make(model.rules, num_types, hyper);
    model.params.lambda0 = pool_params.lambda0;
    model.params.gamma_raw = pool_params.gamma_raw;
    model.params.beta = pool_params.beta;
    for (std::size_t j = 0; j < report.best_subset.size(); ++j)
        model.params.alpha(static_cast<Eigen::Index>(j)) =
            pool_params.alpha(report.best_subset[j]);
    model.config = config.fit;
    model.train_nll = best->train_nll;
    model.epochs_run = best->epochs_run;
    std::vector<EventSequence> train_corpus;
    train_corpus.reserve(train_idx.size());
    for (std::size_t i : train_idx) train_corpus.push_back(corpus[i]);
    const auto [count, hash] = corpus_fingerprint(train_corpus);
    model.corpus_count = count;
    model.corpus_hash = hash;
    report.best_model = std::move(model);
    return report;
}

MinePipelineResult mine_rules(const std::vector<EventSequence>& corpus, int max_predicates,
                              const MiningConfig& config, const Hyperparams& hyper,
                              const CandidateGenOptions& gen_options, const NLLOptions& options) {
    MinePipelineResult out;
    FitConfig filter_config = config.fit;
    filter_config.seed = config.seed;
    out.filter = filter_predicates(corpus, filter_config, hyper, 1e-3, options);
    out.report.pool = generate_candidates(out.filter.retained, corpus.front().num_types(),
                                          max_predicates, corpus.front().target_type(),
                                          gen_options);
    if (out.report.pool.candidates.empty()) {
        out.report.empty_pool = true;
        out.report.best_rules = RuleSet(corpus.front().target_type());
        out.report.seed = config.seed;
        return out;
    }
    MiningConfig run = config;
    run.subset_size = std::min(run.subset_size, out.report.pool.size());
    out.report = optimize_ruleset(out.report.pool, corpus, run, hyper, options);
    return out;
}

} // namespace hrtpp
