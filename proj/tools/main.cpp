#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "hrtpp/io.hpp"

namespace fs = std::filesystem;
using namespace hrtpp;

namespace {

NameTable names_for(const std::string& names_path, int num_types) {
    if (names_path.empty()) return NameTable::defaults(num_types);
    NameTable table = read_name_table(names_path);
    if (table.size() != num_types)
        throw ValidationError("name table has " + std::to_string(table.size()) +
                              " entries but the corpus declares " + std::to_string(num_types) +
                              " types");
    return table;
}

RunConfig config_for(const std::string& config_path) {
    if (config_path.empty()) return RunConfig{};
    return load_run_config(config_path);
}

int run_simulate(const std::string& spec_path, const std::string& out_dir) {
    const ScenarioSpec spec = load_scenario(spec_path);
    auto [corpus, manifest] = simulate_corpus(spec);
    fs::create_directories(out_dir);
    write_corpus(fs::path(out_dir) / "corpus.jsonl", corpus);
    write_manifest(fs::path(out_dir) / "manifest.json", manifest);
    std::cout << "wrote " << corpus.size() << " sequences to " << out_dir << "\n";
    return 0;
}

int run_fit(const std::string& corpus_path, const std::string& rules_path,
            const std::string& config_path, const std::string& names_path,
            const std::string& out_path) {
    const std::vector<EventSequence> corpus = read_corpus(corpus_path);
    if (corpus.empty()) throw ValidationError("corpus is empty");
    const RunConfig config = config_for(config_path);
    const Hyperparams hyper = config.resolve_hyper(corpus);
    const NameTable names = names_for(names_path, corpus.front().num_types());

    RuleSet rules(corpus.front().target_type());
    if (!rules_path.empty()) {
        for (const ParsedRuleLine& line :
             parse_rule_file(read_file(rules_path), names, config.max_predicates)) {
            for (const std::string& w : line.warnings)
                std::cerr << "warning: " << print_rule(line.rule, names) << ": " << w << "\n";
            rules.insert(line.rule);
        }
    }
    const NLLOptions options{config.integrate_to_horizon};
    const FittedModel model = fit(corpus, rules, config.fit, hyper, MaskMode::FromRules, options);
    save_model(out_path, model, names);
    std::printf("fitted %zu rules on %zu sequences; final NLL %.9f (%d epochs)\n", rules.size(),
                corpus.size(), model.train_nll, model.epochs_run);
    return 0;
}

int run_mine(const std::string& corpus_path, const std::string& config_path,
             const std::string& names_path, const std::string& out_path,
             const std::string& rules_out) {
    const std::vector<EventSequence> corpus = read_corpus(corpus_path);
    if (corpus.empty()) throw ValidationError("corpus is empty");
    const RunConfig config = config_for(config_path);
    const Hyperparams hyper = config.resolve_hyper(corpus);
    const NameTable names = names_for(names_path, corpus.front().num_types());
    const NLLOptions options{config.integrate_to_horizon};

    CandidateGenOptions gen;
    gen.allow_unfiltered_leaves = config.allow_unfiltered_leaves;
    const MinePipelineResult result = mine_rules(corpus, config.max_predicates,
                                                 config.mining_config(), hyper, gen, options);

    atomic_write_file(out_path, mining_report_to_json(result.report, &result.filter, names));
    const fs::path rules_path = rules_out.empty()
                                    ? fs::path(out_path).replace_extension(".rules")
                                    : fs::path(rules_out);
    atomic_write_file(rules_path, selected_rules_text(result.report, names));

    if (result.report.empty_pool) {
        std::cerr << "warning: no predicate passed filtering; the mined rule set is empty\n";
    } else {
        std::printf("evaluated %zu subsets (%zu cache hits); best held-out log-likelihood %.6f\n",
                    result.report.evaluations.size(), result.report.cache_hits,
                    result.report.best_score);
    }
    for (std::size_t i = 0; i < result.report.best_rules.size(); ++i)
        std::cout << "  " << print_rule(result.report.best_rules.rules()[i], names) << "\n";
    return 0;
}

int run_evaluate(const std::string& model_path, const std::string& corpus_path,
                 const std::string& truth_path, const std::string& out_path) {
    const LoadedModel loaded = load_model(model_path);
    const std::vector<EventSequence> corpus = read_corpus(corpus_path);
    if (corpus.empty()) throw ValidationError("corpus is empty");

    // when this is the training corpus, the stored NLL must reproduce
    const auto [count, hash] = corpus_fingerprint(corpus);
    if (count == loaded.model.corpus_count && hash == loaded.model.corpus_hash) {
        const double check =
            mean_nll(corpus, loaded.model.rules, loaded.model.params, loaded.model.options);
        if (std::abs(check - loaded.model.train_nll) > 1e-9)
            throw NumericError("stored train_nll does not reproduce on the training corpus");
    }

    EvalReport report = evaluate(loaded.model, corpus, loaded.model.options);
    if (!truth_path.empty()) {
        RuleSet truth(loaded.model.rules.target());
        for (const ParsedRuleLine& line : parse_rule_file(read_file(truth_path), loaded.names))
            truth.insert(line.rule);
        report.rule_accuracy = rule_accuracy(loaded.model.rules, truth);
        report.rule_recall = rule_recall(loaded.model.rules, truth);
        if (loaded.model.rules.empty())
            std::cerr << "warning: model has no rules; rule accuracy defined as 0\n";
    }

    atomic_write_file(out_path, eval_report_to_json(report, loaded.model.corpus_hash));
    const fs::path base(out_path);
    atomic_write_file(fs::path(base).replace_extension(".txt"), format_eval_table(report));
    atomic_write_file(fs::path(base).parent_path() /
                          (base.stem().string() + "_details.csv"),
                      eval_details_to_csv(report));
    std::cout << format_eval_table(report);
    return 0;
}

int run_trace(const std::string& model_path, const std::string& corpus_path, std::size_t seq_index,
              double dt, const std::string& out_path) {
    const LoadedModel loaded = load_model(model_path);
    const std::vector<EventSequence> corpus = read_corpus(corpus_path);
    if (seq_index >= corpus.size())
        throw ValidationError("sequence index " + std::to_string(seq_index) +
                              " out of range (corpus has " + std::to_string(corpus.size()) +
                              " sequences)");
    const EventSequence& seq = corpus[seq_index];
    if (seq.num_types() != loaded.model.num_types ||
        seq.target_type() != loaded.model.rules.target())
        throw ValidationError("corpus num_types/target_type do not match the model");

    const IntensityContext ctx(seq, loaded.model.rules, loaded.model.params,
                               loaded.model.options);
    if (dt <= 0.0) dt = seq.horizon() / 2000.0;

    // sample grid plus a left/right pair at every event and trigger time so
    // jumps render as steps
    std::vector<double> grid;
    for (double t = 0.0; t < seq.horizon(); t += dt) grid.push_back(t);
    grid.push_back(seq.horizon());
    std::vector<double> jump_times;
    for (const Event& e : seq.events()) jump_times.push_back(e.time);
    for (const TriggerSet& ts : ctx.triggers())
        for (double t : ts.times) jump_times.push_back(t);
    std::sort(jump_times.begin(), jump_times.end());
    jump_times.erase(std::unique(jump_times.begin(), jump_times.end()), jump_times.end());

    const Eigen::Index J = static_cast<Eigen::Index>(loaded.model.rules.size());
    const DecayKernel rule_kernel{DecayKernel::Kind::Exponential,
                                  loaded.model.params.hyper.rule_decay_rate};
    char buf[64];
    std::string csv = "time,intensity,pre_activation";
    for (Eigen::Index jr = 0; jr < J; ++jr) csv += ",rule_" + std::to_string(jr + 1);
    csv += "\n";
    auto emit_row = [&](double t, bool left_limit) {
        const double pre = ctx.pre_activation(t, left_limit);
        std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g", t,
                      softplus_scaled(pre, loaded.model.params.gamma()), pre);
        csv += buf;
        for (Eigen::Index jr = 0; jr < J; ++jr) {
            const TriggerSet& ts = ctx.triggers()[static_cast<std::size_t>(jr)];
            double e = 0.0;
            for (double tj : ts.times) {
                if (tj > t || (left_limit && tj == t)) break;
                e += rule_kernel(t - tj);
            }
            std::snprintf(buf, sizeof buf, ",%.12g", loaded.model.params.alpha(jr) * e);
            csv += buf;
        }
        csv += "\n";
    };
    std::size_t jump_ptr = 0;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        while (jump_ptr < jump_times.size() && jump_times[jump_ptr] < grid[g]) {
            emit_row(jump_times[jump_ptr], true);
            emit_row(jump_times[jump_ptr], false);
            ++jump_ptr;
        }
        if (jump_ptr < jump_times.size() && jump_times[jump_ptr] == grid[g]) {
            emit_row(grid[g], true);
            emit_row(grid[g], false);
            ++jump_ptr;
        } else {
            emit_row(grid[g], false);
        }
    }
    atomic_write_file(out_path, csv);

    std::string ann = "kind,time,label,value\n";
    for (std::size_t jr = 0; jr < ctx.triggers().size(); ++jr) {
        const std::string text = print_rule(loaded.model.rules.rules()[jr], loaded.names);
        for (double t : ctx.triggers()[jr].times) {
            std::snprintf(buf, sizeof buf, "trigger,%.12g,", t);
            ann += buf;
            ann += "\"" + text + "\",\n";
        }
    }
    for (const Event& e : seq.events()) {
        std::snprintf(buf, sizeof buf, "event,%.12g,", e.time);
        ann += buf;
        std::snprintf(buf, sizeof buf, ",%.12g\n", e.value);
        ann += "\"" + loaded.names.name_of(e.type) + "\"" + buf;
    }
    const fs::path base(out_path);
    atomic_write_file(base.parent_path() / (base.stem().string() + "_annotations.csv"), ann);
    std::cout << "trace written to " << out_path << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"hybrid-rule temporal point processes: simulate, fit, mine, trace, evaluate"};
    app.require_subcommand(1);

    std::string spec_path, out_dir;
    CLI::App* simulate = app.add_subcommand("simulate", "generate a synthetic corpus");
    simulate->add_option("--spec", spec_path, "scenario spec JSON")->required();
    simulate->add_option("--out", out_dir, "output directory")->required();

    std::string corpus_path, rules_path, config_path, names_path, out_path;
    CLI::App* fit_cmd = app.add_subcommand("fit", "fit model parameters for a rule set");
    fit_cmd->add_option("--corpus", corpus_path, "corpus JSONL")->required();
    fit_cmd->add_option("--rules", rules_path, "rule file (may be empty for a rule-free fit)");
    fit_cmd->add_option("--config", config_path, "run config JSON");
    fit_cmd->add_option("--names", names_path, "manifest/name-table JSON");
    fit_cmd->add_option("--out", out_path, "output model JSON")->required();

    CLI::App* mine_cmd = app.add_subcommand("mine", "two-phase rule mining");
    std::string rules_out;
    mine_cmd->add_option("--corpus", corpus_path, "corpus JSONL")->required();
    mine_cmd->add_option("--config", config_path, "run config JSON");
    mine_cmd->add_option("--names", names_path, "manifest/name-table JSON");
    mine_cmd->add_option("--out", out_path, "output report JSON")->required();
    mine_cmd->add_option("--rules-out", rules_out, "winning rules file (default: <out>.rules)");

    std::string model_path, truth_path;
    CLI::App* eval_cmd = app.add_subcommand("evaluate", "NLL / RMSE / rule-accuracy report");
    eval_cmd->add_option("--model", model_path, "model JSON")->required();
    eval_cmd->add_option("--corpus", corpus_path, "corpus JSONL")->required();
    eval_cmd->add_option("--truth", truth_path, "ground-truth rules file");
    eval_cmd->add_option("--out", out_path, "output report JSON")->required();

    std::size_t seq_index = 0;
    double dt = 0.0;
    CLI::App* trace_cmd = app.add_subcommand("trace", "intensity-over-time CSV for one sequence");
    trace_cmd->add_option("--model", model_path, "model JSON")->required();
    trace_cmd->add_option("--corpus", corpus_path, "corpus JSONL")->required();
    trace_cmd->add_option("--seq", seq_index, "sequence index")->required();
    trace_cmd->add_option("--dt", dt, "grid resolution (default horizon/2000)");
    trace_cmd->add_option("--out", out_path, "output CSV")->required();

    try {
        app.parse(argc, argv);
        if (simulate->parsed()) return run_simulate(spec_path, out_dir);
        if (fit_cmd->parsed())
            return run_fit(corpus_path, rules_path, config_path, names_path, out_path);
        if (mine_cmd->parsed())
            return run_mine(corpus_path, config_path, names_path, out_path, rules_out);
        if (eval_cmd->parsed()) return run_evaluate(model_path, corpus_path, truth_path, out_path);
        if (trace_cmd->parsed()) return run_trace(model_path, corpus_path, seq_index, dt, out_path);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
