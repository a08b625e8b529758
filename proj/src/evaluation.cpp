#include "hrtpp/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace hrtpp {

std::string model_config_fingerprint(const FittedModel& model) {
    std::string bytes;
    char buf[64];
    const ModelParams& p = model.params;
    std::snprintf(buf, sizeof buf, "l0=%a;g=%a;d=%a;wr=%a;wn=%a", p.lambda0, p.gamma_raw,
                  p.hyper.delta, p.hyper.rule_decay_rate, p.hyper.num_decay_rate);
    bytes += buf;
    for (Eigen::Index j = 0; j < p.alpha.size(); ++j) {
        std::snprintf(buf, sizeof buf, ";a=%a", p.alpha(j));
        bytes += buf;
    }
    for (Eigen::Index k = 0; k < p.beta.size(); ++k) {
        std::snprintf(buf, sizeof buf, ";b=%a", p.beta(k));
        bytes += buf;
    }
    for (bool m : p.mask) bytes += m ? ";1" : ";0";
    bytes += std::string(";") + mask_mode_name(model.mask_mode);
    bytes += model.options.integrate_to_horizon ? ";H" : ";N";
    for (const Rule& r : model.rules.rules()) {
        bytes += ";R=";
        for (int x : r.encoding()) bytes += std::to_string(x) + ".";
    }
    return hex64(fnv1a64(bytes));
}

EvalReport evaluate(const FittedModel& model, const std::vector<EventSequence>& test_corpus,
                    const NLLOptions& options) {
    if (test_corpus.empty()) throw ValidationError("test corpus is empty");
    for (const EventSequence& s : test_corpus)
        if (s.num_types() != model.num_types || s.target_type() != model.rules.target())
            throw ValidationError("corpus num_types/target_type do not match the model");

    EvalReport report;
    report.config_fingerprint = model_config_fingerprint(model);
    report.num_sequences = test_corpus.size();
    report.details.resize(test_corpus.size());

    parallel_for(test_corpus.size(), [&](std::size_t i) {
        const EventSequence& seq = test_corpus[i];
        SequenceEvalRow row;
        row.index = i;
        const LikelihoodDesign design =
            LikelihoodDesign::build(seq, model.rules, model.params.hyper, options);
        row.nll = nll_from_design(design, model.params).total;

        const std::vector<double> targets = seq.target_times();
        row.num_targets = targets.size();
        if (targets.size() < 2) {
            row.rmse_skipped = true;
        } else {
            for (std::size_t t = 1; t < targets.size(); ++t) {
                const double anchor = targets[t - 1];
                const EventSequence history = seq.truncated_at(anchor);
                const double predicted = predict_next_time(model, history, anchor);
                const double err = predicted - targets[t];
                row.squared_error_sum += err * err;
                ++row.num_predictions;
            }
        }
        report.details[i] = row;
    });

    double nll_sum = 0.0, sq_sum = 0.0;
    for (const SequenceEvalRow& row : report.details) {
        nll_sum += row.nll;
        sq_sum += row.squared_error_sum;
        report.num_predictions += row.num_predictions;
        if (row.rmse_skipped) ++report.rmse_skipped_sequences;
    }
    report.nll = nll_sum / static_cast<double>(test_corpus.size());
    report.rmse = report.num_predictions == 0
                      ? 0.0
                      : std::sqrt(sq_sum / static_cast<double>(report.num_predictions));
    return report;
}

double rule_accuracy(const RuleSet& mined, const RuleSet& truth) {
    if (mined.empty()) return 0.0; // callers warn; defined as zero
    std::size_t hits = 0;
    for (const Rule& r : mined.rules())
        if (truth.contains(r)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(mined.size());
}

double rule_recall(const RuleSet& mined, const RuleSet& truth) {
    if (truth.empty()) return 0.0;
    std::size_t hits = 0;
    for (const Rule& r : truth.rules())
        if (mined.contains(r)) ++hits;
    return static_cast<double>(hits) / static_cast<double>(truth.size());
}

AblationGrid run_ablation(const ScenarioSpec& scenario, const FitConfig& config,
                          double test_fraction, const NLLOptions& options) {
    auto [corpus, manifest] = simulate_corpus(scenario);
    const auto [train_idx, test_idx] = train_test_split(corpus.size(), test_fraction, config.seed);
    if (train_idx.empty() || test_idx.empty())
        throw ValidationError("ablation requires a non-degenerate train/test split");
    std::vector<EventSequence> train, test;
    for (std::size_t i : train_idx) train.push_back(corpus[i]);
    for (std::size_t i : test_idx) test.push_back(corpus[i]);

    const RuleSet no_rules(scenario.target_type);
    struct Cell {
        const char* id;
        const RuleSet* rules;
        MaskMode mode;
        double* slot;
    };
    AblationGrid grid;
    grid.train_sequences = train.size();
    grid.test_sequences = test.size();
    Cell cells[] = {
        {"Category I w/o NFA", &no_rules, MaskMode::AllOff, &grid.cat1_without_nfa},
        {"Category I with NFA", &no_rules, MaskMode::AllOn, &grid.cat1_with_nfa},
        {"Category II w/o NFA", &scenario.rules, MaskMode::AllOff, &grid.cat2_without_nfa},
        {"Category II with NFA", &scenario.rules, MaskMode::FromRules, &grid.cat2_with_nfa},
    };
    for (const Cell& cell : cells) {
        try {
            const FittedModel model = fit(train, *cell.rules, config, scenario.hyper, cell.mode,
                                          options);
            *cell.slot = mean_nll(test, model.rules, model.params, options);
        } catch (const Error& e) {
            throw NumericError(std::string(cell.id) + " fit failed: " + e.what());
        }
    }
    return grid;
}

std::string format_ablation_table(const AblationGrid& grid) {
    char buf[256];
    std::string out;
    out += "Category     State      NLL\n";
    std::snprintf(buf, sizeof buf, "Category I   w/o NFA    %.4f\n", grid.cat1_without_nfa);
    out += buf;
    std::snprintf(buf, sizeof buf, "Category I   with NFA   %.4f\n", grid.cat1_with_nfa);
    out += buf;
    std::snprintf(buf, sizeof buf, "Category II  w/o NFA    %.4f\n", grid.cat2_without_nfa);
    out += buf;
    std::snprintf(buf, sizeof buf, "Category II  with NFA   %.4f\n", grid.cat2_with_nfa);
    out += buf;
    return out;
}

std::string format_eval_table(const EvalReport& report) {
    char buf[256];
    std::string out = "NLL        RMSE       Acc\n";
    if (report.rule_accuracy) {
        std::snprintf(buf, sizeof buf, "%-10.4f %-10.4f %.0f%%\n", report.nll, report.rmse,
                      100.0 * *report.rule_accuracy);
    } else {
        std::snprintf(buf, sizeof buf, "%-10.4f %-10.4f -\n", report.nll, report.rmse);
    }
    out += buf;
    return out;
}

} // namespace hrtpp
