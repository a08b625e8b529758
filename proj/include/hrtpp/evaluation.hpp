#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hrtpp/simulation.hpp"
#include "hrtpp/training.hpp"

namespace hrtpp {

struct SequenceEvalRow {
    std::size_t index = 0;
    double nll = 0.0;
    std::size_t num_targets = 0;
    std::size_t num_predictions = 0; // one-step-ahead predictions made
    double squared_error_sum = 0.0;
    bool rmse_skipped = false; // fewer than two target events
};

struct EvalReport {
    double nll = 0.0;  // mean per-sequence NLL
    double rmse = 0.0; // one-step-ahead next-event RMSE
    std::optional<double> rule_accuracy; // precision against planted truth
    std::optional<double> rule_recall;
    std::size_t num_sequences = 0;
    std::size_t num_predictions = 0;
    std::size_t rmse_skipped_sequences = 0;
    std::string config_fingerprint; // hash of the evaluated model configuration
    std::vector<SequenceEvalRow> details;
};

// Stable hash over the model's parameters, hyperparameters, mask, and
// integration convention.
[[nodiscard]] std::string model_config_fingerprint(const FittedModel& model);

// NLL and one-step-ahead RMSE on a held-out corpus. Each target event t_i
// (i >= 1) is predicted from the history truncated at the previous target
// event, which also anchors the prediction.
[[nodiscard]] EvalReport evaluate(const FittedModel& model,
                                  const std::vector<EventSequence>& test_corpus,
                                  const NLLOptions& options = {});

// |mined n truth| / |mined| under canonical equality; 0 for an empty mined set.
[[nodiscard]] double rule_accuracy(const RuleSet& mined, const RuleSet& truth);

// |mined n truth| / |truth|; secondary metric.
[[nodiscard]] double rule_recall(const RuleSet& mined, const RuleSet& truth);

// Four-cell fit grid: {basic, basic+rules} x {without, with numeric features}.
struct AblationGrid {
    double cat1_without_nfa = 0.0; // basic intensity only
    double cat1_with_nfa = 0.0;    // basic + numeric (all masks on)
    double cat2_without_nfa = 0.0; // basic + rules
    double cat2_with_nfa = 0.0;    // basic + rules + numeric (mask from rules)
    std::size_t train_sequences = 0;
    std::size_t test_sequences = 0;
};

// Simulates one corpus from the scenario, splits it once, fits all four cells
// on the shared split, and reports held-out mean NLL per cell. Category II
// cells use the scenario's planted rules.
[[nodiscard]] AblationGrid run_ablation(const ScenarioSpec& scenario, const FitConfig& config,
                                        double test_fraction = 0.2,
                                        const NLLOptions& options = {});

// Plain-text table of an AblationGrid.
[[nodiscard]] std::string format_ablation_table(const AblationGrid& grid);

// Plain-text metric row (NLL / RMSE / Acc).
[[nodiscard]] std::string format_eval_table(const EvalReport& report);

} // namespace hrtpp
