#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "hrtpp/intensity.hpp"

namespace hrtpp {

struct FitConfig {
    int max_epochs = 500;
    double learning_rate = 0.05;
    double convergence_tol = 1e-7; // relative change of the objective
    std::uint64_t seed = 1;
    double l2_weight = 1e-4; // applied to alpha and beta only

    void validate() const;
};

// Trained model: rule set, parameters, and fit metadata.
struct FittedModel {
    RuleSet rules;
    ModelParams params;
    int num_types = 0;
    MaskMode mask_mode = MaskMode::FromRules;
    NLLOptions options; // integration-domain convention used at fit time
    double train_nll = 0.0; // mean per-sequence NLL, without regularization
    int epochs_run = 0;
    FitConfig config;
    std::vector<double> nll_history; // objective per epoch (incl. l2)
    std::size_t corpus_count = 0;
    std::string corpus_hash; // fnv1a64 of the canonical corpus bytes
};

// Stable fingerprint of a corpus (count + content hash), independent of file
// formatting.
[[nodiscard]] std::pair<std::size_t, std::string> corpus_fingerprint(
    const std::vector<EventSequence>& corpus);

// Mean per-sequence NLL of fixed parameters over a corpus.
[[nodiscard]] double mean_nll(const std::vector<EventSequence>& corpus, const RuleSet& rules,
                              const ModelParams& params, const NLLOptions& options = {});

// Full-batch adaptive-moment minimization of mean NLL + l2*||(alpha,beta)||^2.
// Deterministic; a monotone step guard keeps the recorded objective
// non-increasing. lambda0 starts at the softplus inverse of the empirical
// target rate; alpha, beta, gamma_raw start at zero.
[[nodiscard]] FittedModel fit(const std::vector<EventSequence>& corpus, const RuleSet& rules,
                              const FitConfig& config, const Hyperparams& hyper,
                              MaskMode mask_mode = MaskMode::FromRules,
                              const NLLOptions& options = {});

// Fit over prebuilt designs (one per sequence; all built for the same rule
// set). `alpha_active`, when given, freezes the excluded rule weights at zero
// -- the rule-subset evaluations of mining reuse one design pool this way.
struct DesignFit {
    ModelParams params;
    double train_nll = 0.0;
    int epochs_run = 0;
    std::vector<double> nll_history;
};
[[nodiscard]] DesignFit fit_designs(const std::vector<const LikelihoodDesign*>& designs,
                                    std::size_t num_rules, int num_types, const FitConfig& config,
                                    const Hyperparams& hyper, std::vector<bool> mask,
                                    const std::vector<bool>* alpha_active = nullptr,
                                    double empirical_rate = -1.0);

// Intensity continuation after t0 with the history frozen: no further events,
// so each signal block decays at its own rate.
struct FrozenIntensity {
    double t0 = 0.0;
    double lambda0 = 0.0;
    double gamma = 1.0;
    double rule_amp = 0.0; // sum_j alpha_j e_j(t0)
    double num_amp = 0.0;  // sum_k beta_k g_k(t0), mask applied
    double rule_rate = 1.0;
    double num_rate = 1.0;

    [[nodiscard]] double pre_activation(double t) const noexcept {
        return lambda0 + rule_amp * std::exp(-rule_rate * (t - t0)) +
               num_amp * std::exp(-num_rate * (t - t0));
    }
    [[nodiscard]] double intensity(double t) const noexcept {
        return softplus_scaled(pre_activation(t), gamma);
    }
    // Intensity once every signal has decayed away.
    [[nodiscard]] double asymptotic_intensity() const noexcept {
        return softplus_scaled(lambda0, gamma);
    }
};

[[nodiscard]] FrozenIntensity freeze_history(const FittedModel& model,
                                             const EventSequence& history, double t_from);

// Conditional next-event density lambda(t) * exp(-int_{t_from}^{t} lambda).
[[nodiscard]] double next_event_density(const FittedModel& model, const EventSequence& history,
                                        double t_from, double t_query);

// Expected next target-event time, computed from the survival integral with
// an asymptotic-rate tail once survival drops below `survival_eps`.
[[nodiscard]] double predict_next_time(const FittedModel& model, const EventSequence& history,
                                       double t_from, double survival_eps = 1e-6);

// Inverse-CDF sample of the next event time.
[[nodiscard]] double sample_next_time(const FittedModel& model, const EventSequence& history,
                                      double t_from, std::mt19937_64& rng);

// Survival probability S(t) = exp(-int_{t_from}^{t} lambda) under frozen
// history.
[[nodiscard]] double survival(const FrozenIntensity& frozen, double t);

// Deterministic index split; returns (train_indices, test_indices).
[[nodiscard]] std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_test_split(
    std::size_t n, double test_fraction, std::uint64_t seed);

} // namespace hrtpp
