#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "hrtpp/evaluation.hpp"
#include "hrtpp/mining.hpp"
#include "hrtpp/simulation.hpp"

namespace hrtpp {

// Writes content to a temp file in the target directory, then renames.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

[[nodiscard]] std::string read_file(const std::filesystem::path& path);

// --- corpus JSONL -----------------------------------------------------------
// One sequence per line:
//   {"horizon": float, "target_type": int, "num_types": int,
//    "events": [{"t": float, "k": int, "v": float}, ...]}
[[nodiscard]] std::string corpus_to_jsonl(const std::vector<EventSequence>& corpus);
[[nodiscard]] std::vector<EventSequence> corpus_from_jsonl(const std::string& text);
void write_corpus(const std::filesystem::path& path, const std::vector<EventSequence>& corpus);
[[nodiscard]] std::vector<EventSequence> read_corpus(const std::filesystem::path& path);

// --- corpus manifest ---------------------------------------------------------
[[nodiscard]] std::string manifest_to_json(const CorpusManifest& manifest);
void write_manifest(const std::filesystem::path& path, const CorpusManifest& manifest);
// Accepts a manifest (or any JSON document with a "type_names" array).
[[nodiscard]] NameTable read_name_table(const std::filesystem::path& path);

// --- fitted model ------------------------------------------------------------
[[nodiscard]] std::string model_to_json(const FittedModel& model, const NameTable& names);
struct LoadedModel {
    FittedModel model;
    NameTable names;
};
[[nodiscard]] LoadedModel model_from_json(const std::string& text);
void save_model(const std::filesystem::path& path, const FittedModel& model,
                const NameTable& names);
[[nodiscard]] LoadedModel load_model(const std::filesystem::path& path);

// --- scenario spec ------------------------------------------------------------
[[nodiscard]] ScenarioSpec scenario_from_json(const std::string& text);
[[nodiscard]] std::string scenario_to_json(const ScenarioSpec& spec);
[[nodiscard]] ScenarioSpec load_scenario(const std::filesystem::path& path);

// --- run configuration ---------------------------------------------------------
// Strict: unknown keys anywhere are rejected.
struct RunConfig {
    std::optional<double> delta; // absent: 0.05 x mean inter-event gap of the corpus
    double rule_decay_rate = 1.0;
    double num_decay_rate = 1.0;
    int max_predicates = Rule::kDefaultMaxPredicates;
    std::size_t subset_size = 10;
    std::size_t mining_budget = 60;
    std::size_t batch_size = 8;
    bool integrate_to_horizon = true;
    bool allow_unfiltered_leaves = false;
    std::uint64_t seed = 1;
    FitConfig fit;

    [[nodiscard]] Hyperparams resolve_hyper(const std::vector<EventSequence>& corpus) const;
    [[nodiscard]] MiningConfig mining_config() const;
};
[[nodiscard]] RunConfig run_config_from_json(const std::string& text);
[[nodiscard]] RunConfig load_run_config(const std::filesystem::path& path);

// 0.05 x mean gap between consecutive events, pooled over the corpus.
[[nodiscard]] double default_delta(const std::vector<EventSequence>& corpus);

// --- reports -------------------------------------------------------------------
[[nodiscard]] std::string mining_report_to_json(const MiningReport& report,
                                                const PredicateFilterResult* filter,
                                                const NameTable& names);
[[nodiscard]] std::string selected_rules_text(const MiningReport& report, const NameTable& names);
[[nodiscard]] std::string eval_report_to_json(const EvalReport& report,
                                              const std::string& model_hash);
[[nodiscard]] std::string eval_details_to_csv(const EvalReport& report);

} // namespace hrtpp
