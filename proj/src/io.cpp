#include "hrtpp/io.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

#include "hrtpp/rule_dsl.hpp"

namespace hrtpp {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

void check_keys(const ordered_json& obj, std::initializer_list<const char*> allowed,
                const std::string& where) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw ValidationError("unknown key '" + key + "' in " + where);
    }
}

ordered_json parse_json(const std::string& text, const std::string& what) {
    try {
        return ordered_json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed JSON in " + what + ": " + e.what());
    }
}

template <typename T>
T get_or(const ordered_json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad value for '") + key + "': " + e.what());
    }
}

template <typename T>
T require(const ordered_json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ValidationError("missing key '" + std::string(key) + "' in " + where);
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad value for '") + key + "' in " + where + ": " +
                              e.what());
    }
}

ordered_json vector_to_json(const Eigen::VectorXd& v) {
    ordered_json arr = ordered_json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v(i));
    return arr;
}

Eigen::VectorXd vector_from_json(const ordered_json& arr, const std::string& where) {
    if (!arr.is_array()) throw ValidationError(where + " must be an array");
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) {
        if (!arr[i].is_number()) throw ValidationError(where + " must contain numbers");
        v(static_cast<Eigen::Index>(i)) = arr[i].get<double>();
    }
    return v;
}

} // namespace

void atomic_write_file(const fs::path& path, const std::string& content) {
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("write failed: " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw IoError("rename failed for " + path.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string corpus_to_jsonl(const std::vector<EventSequence>& corpus) {
    std::string out;
    for (const EventSequence& s : corpus) {
        ordered_json line;
        line["horizon"] = s.horizon();
        line["target_type"] = s.target_type();
        line["num_types"] = s.num_types();
        ordered_json events = ordered_json::array();
        for (const Event& e : s.events()) {
            ordered_json je;
            je["t"] = e.time;
            je["k"] = e.type;
            je["v"] = e.value;
            events.push_back(std::move(je));
        }
        line["events"] = std::move(events);
        out += line.dump();
        out += '\n';
    }
    return out;
}

std::vector<EventSequence> corpus_from_jsonl(const std::string& text) {
    std::vector<EventSequence> corpus;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        const ordered_json j = parse_json(line, "corpus line " + std::to_string(line_no));
        check_keys(j, {"horizon", "target_type", "num_types", "events"},
                   "corpus line " + std::to_string(line_no));
        const double horizon = require<double>(j, "horizon", "corpus line");
        const int target = require<int>(j, "target_type", "corpus line");
        const int num_types = require<int>(j, "num_types", "corpus line");
        std::vector<Event> events;
        if (j.contains("events")) {
            for (const auto& je : j.at("events")) {
                check_keys(je, {"t", "k", "v"}, "corpus event (line " + std::to_string(line_no) + ")");
                events.push_back(Event{require<double>(je, "t", "event"),
                                       require<int>(je, "k", "event"),
                                       require<double>(je, "v", "event")});
            }
        }
        for (std::size_t i = 1; i < events.size(); ++i)
            if (events[i].time < events[i - 1].time)
                throw ValidationError("corpus line " + std::to_string(line_no) +
                                      ": events not sorted by time");
        try {
            corpus.emplace_back(std::move(events), horizon, num_types, target);
        } catch (const ValidationError& e) {
            throw ValidationError("corpus line " + std::to_string(line_no) + ": " + e.what());
        }
        if (corpus.size() > 1) {
            if (corpus.back().num_types() != corpus.front().num_types() ||
                corpus.back().target_type() != corpus.front().target_type())
                throw ValidationError("corpus line " + std::to_string(line_no) +
                                      ": num_types/target_type differ from the first line");
        }
    }
    return corpus;
}

void write_corpus(const fs::path& path, const std::vector<EventSequence>& corpus) {
    atomic_write_file(path, corpus_to_jsonl(corpus));
}

std::vector<EventSequence> read_corpus(const fs::path& path) {
    return corpus_from_jsonl(read_file(path));
}

std::string manifest_to_json(const CorpusManifest& manifest) {
    ordered_json j;
    j["format_version"] = 1;
    j["kind"] = "hrtpp_corpus_manifest";
    j["num_sequences"] = manifest.num_sequences;
    j["seed"] = manifest.seed;
    j["spec_hash"] = manifest.spec_hash;
    j["num_types"] = manifest.num_types;
    j["target_type"] = manifest.target_type;
    j["type_names"] = manifest.type_names;
    j["true_rules"] = manifest.true_rules;
    return j.dump(2) + "\n";
}

void write_manifest(const fs::path& path, const CorpusManifest& manifest) {
    atomic_write_file(path, manifest_to_json(manifest));
}

NameTable read_name_table(const fs::path& path) {
    const ordered_json j = parse_json(read_file(path), path.string());
    if (!j.contains("type_names"))
        throw ValidationError("no 'type_names' array in " + path.string());
    return NameTable(j.at("type_names").get<std::vector<std::string>>());
}

std::string model_to_json(const FittedModel& model, const NameTable& names) {
    if (names.size() != model.num_types)
        throw ValidationError("name table size does not match the model's num_types");
    ordered_json j;
    j["format_version"] = 1;
    j["kind"] = "hrtpp_model";
    j["num_types"] = model.num_types;
    j["target_type"] = model.rules.target();
    j["type_names"] = names.names();
    ordered_json rules = ordered_json::array();
    for (const Rule& r : model.rules.rules()) rules.push_back(print_rule(r, names));
    j["rules"] = std::move(rules);
    j["mask_mode"] = mask_mode_name(model.mask_mode);
    j["integrate_to_horizon"] = model.options.integrate_to_horizon;
    ordered_json params;
    params["lambda0"] = model.params.lambda0;
    params["alpha"] = vector_to_json(model.params.alpha);
    params["beta"] = vector_to_json(model.params.beta);
    params["gamma_raw"] = model.params.gamma_raw;
    j["params"] = std::move(params);
    ordered_json hyper;
    hyper["delta"] = model.params.hyper.delta;
    hyper["rule_decay_rate"] = model.params.hyper.rule_decay_rate;
    hyper["num_decay_rate"] = model.params.hyper.num_decay_rate;
    j["hyper"] = std::move(hyper);
    ordered_json cfg;
    cfg["max_epochs"] = model.config.max_epochs;
    cfg["learning_rate"] = model.config.learning_rate;
    cfg["convergence_tol"] = model.config.convergence_tol;
    cfg["seed"] = model.config.seed;
    cfg["l2_weight"] = model.config.l2_weight;
    j["fit_config"] = std::move(cfg);
    j["train_nll"] = model.train_nll;
    j["epochs_run"] = model.epochs_run;
    ordered_json fp;
    fp["count"] = model.corpus_count;
    fp["hash"] = model.corpus_hash;
    j["corpus_fingerprint"] = std::move(fp);
    return j.dump(2) + "\n";
}

LoadedModel model_from_json(const std::string& text) {
    const ordered_json j = parse_json(text, "model file");
    check_keys(j,
               {"format_version", "kind", "num_types", "target_type", "type_names", "rules",
                "mask_mode", "integrate_to_horizon", "params", "hyper", "fit_config", "train_nll",
                "epochs_run", "corpus_fingerprint"},
               "model file");
    if (require<int>(j, "format_version", "model file") != 1)
        throw ValidationError("unsupported model format_version");
    LoadedModel out;
    out.model.num_types = require<int>(j, "num_types", "model file");
    const int target = require<int>(j, "target_type", "model file");
    out.names = NameTable(require<std::vector<std::string>>(j, "type_names", "model file"));
    if (out.names.size() != out.model.num_types)
        throw ValidationError("type_names size does not match num_types");

    const ordered_json& hyper = j.at("hyper");
    check_keys(hyper, {"delta", "rule_decay_rate", "num_decay_rate"}, "model hyper");
    Hyperparams hp;
    hp.delta = require<double>(hyper, "delta", "hyper");
    hp.rule_decay_rate = require<double>(hyper, "rule_decay_rate", "hyper");
    hp.num_decay_rate = require<double>(hyper, "num_decay_rate", "hyper");

    out.model.rules = RuleSet(target);
    for (const auto& rtext : j.at("rules"))
        out.model.rules.insert(parse_rule(rtext.get<std::string>(), out.names));
    out.model.mask_mode = mask_mode_from_name(require<std::string>(j, "mask_mode", "model file"));
    out.model.options.integrate_to_horizon = get_or<bool>(j, "integrate_to_horizon", true);

    const ordered_json& params = j.at("params");
    check_keys(params, {"lambda0", "alpha", "beta", "gamma_raw"}, "model params");
    out.model.params = ModelParams::make(out.model.rules, out.model.num_types, hp,
                                         out.model.mask_mode);
    out.model.params.lambda0 = require<double>(params, "lambda0", "params");
    out.model.params.alpha = vector_from_json(params.at("alpha"), "params.alpha");
    out.model.params.beta = vector_from_json(params.at("beta"), "params.beta");
    out.model.params.gamma_raw = require<double>(params, "gamma_raw", "params");
    out.model.params.validate(out.model.rules.size(), out.model.num_types);

    const ordered_json& cfg = j.at("fit_config");
    check_keys(cfg, {"max_epochs", "learning_rate", "convergence_tol", "seed", "l2_weight"},
               "fit_config");
    out.model.config.max_epochs = require<int>(cfg, "max_epochs", "fit_config");
    out.model.config.learning_rate = require<double>(cfg, "learning_rate", "fit_config");
    out.model.config.convergence_tol = require<double>(cfg, "convergence_tol", "fit_config");
    out.model.config.seed = require<std::uint64_t>(cfg, "seed", "fit_config");
    out.model.config.l2_weight = require<double>(cfg, "l2_weight", "fit_config");

    out.model.train_nll = require<double>(j, "train_nll", "model file");
    out.model.epochs_run = require<int>(j, "epochs_run", "model file");
    const ordered_json& fp = j.at("corpus_fingerprint");
    check_keys(fp, {"count", "hash"}, "corpus_fingerprint");
    out.model.corpus_count = require<std::size_t>(fp, "count", "corpus_fingerprint");
    out.model.corpus_hash = require<std::string>(fp, "hash", "corpus_fingerprint");
    return out;
}

void save_model(const fs::path& path, const FittedModel& model, const NameTable& names) {
    atomic_write_file(path, model_to_json(model, names));
}

LoadedModel load_model(const fs::path& path) { return model_from_json(read_file(path)); }

ScenarioSpec scenario_from_json(const std::string& text) {
    const ordered_json j = parse_json(text, "scenario spec");
    check_keys(j,
               {"format_version", "num_types", "target_type", "horizon", "num_sequences", "seed",
                "background_rates", "values", "rules", "alpha", "beta", "lambda0", "gamma_raw",
                "delta", "rule_decay_rate", "num_decay_rate", "type_names"},
               "scenario spec");
    ScenarioSpec spec;
    spec.num_types = require<int>(j, "num_types", "scenario");
    spec.target_type = require<int>(j, "target_type", "scenario");
    spec.horizon = require<double>(j, "horizon", "scenario");
    spec.num_sequences = require<std::size_t>(j, "num_sequences", "scenario");
    spec.seed = get_or<std::uint64_t>(j, "seed", 1);
    spec.background_rates = require<std::vector<double>>(j, "background_rates", "scenario");
    if (j.contains("type_names"))
        spec.type_names = j.at("type_names").get<std::vector<std::string>>();

    spec.value_dists.clear();
    if (j.contains("values")) {
        for (const auto& v : j.at("values")) {
            check_keys(v, {"kind", "mean", "stddev"}, "scenario value distribution");
            ValueDistribution d;
            const std::string kind = require<std::string>(v, "kind", "value distribution");
            if (kind == "constant")
                d.kind = ValueDistribution::Kind::Constant;
            else if (kind == "normal")
                d.kind = ValueDistribution::Kind::Normal;
            else
                throw ValidationError("unknown value distribution kind: " + kind);
            d.mean = get_or<double>(v, "mean", 0.0);
            d.stddev = get_or<double>(v, "stddev", 0.0);
            spec.value_dists.push_back(d);
        }
    } else {
        spec.value_dists.assign(static_cast<std::size_t>(spec.num_types), ValueDistribution{});
    }

    const NameTable names = spec.type_names.empty() ? NameTable::defaults(spec.num_types)
                                                    : NameTable(spec.type_names);
    spec.rules = RuleSet(spec.target_type);
    if (j.contains("rules"))
        for (const auto& rtext : j.at("rules"))
            spec.rules.insert(parse_rule(rtext.get<std::string>(), names));
    spec.alpha = j.contains("alpha")
                     ? vector_from_json(j.at("alpha"), "scenario alpha")
                     : Eigen::VectorXd::Zero(static_cast<Eigen::Index>(spec.rules.size())).eval();
    spec.beta = j.contains("beta") ? vector_from_json(j.at("beta"), "scenario beta")
                                   : Eigen::VectorXd::Zero(spec.num_types).eval();
    spec.lambda0 = get_or<double>(j, "lambda0", 0.0);
    spec.gamma_raw = get_or<double>(j, "gamma_raw", 0.0);
    spec.hyper.delta = get_or<double>(j, "delta", 0.1);
    spec.hyper.rule_decay_rate = get_or<double>(j, "rule_decay_rate", 1.0);
    spec.hyper.num_decay_rate = get_or<double>(j, "num_decay_rate", 1.0);
    spec.validate();
    return spec;
}

std::string scenario_to_json(const ScenarioSpec& spec) {
    const NameTable names = spec.name_table();
    ordered_json j;
    j["format_version"] = 1;
    j["num_types"] = spec.num_types;
    j["target_type"] = spec.target_type;
    j["horizon"] = spec.horizon;
    j["num_sequences"] = spec.num_sequences;
    j["seed"] = spec.seed;
    j["background_rates"] = spec.background_rates;
    ordered_json values = ordered_json::array();
    for (const ValueDistribution& d : spec.value_dists) {
        ordered_json v;
        v["kind"] = d.kind == ValueDistribution::Kind::Constant ? "constant" : "normal";
        v["mean"] = d.mean;
        v["stddev"] = d.stddev;
        values.push_back(std::move(v));
    }
    j["values"] = std::move(values);
    ordered_json rules = ordered_json::array();
    for (const Rule& r : spec.rules.rules()) rules.push_back(print_rule(r, names));
    j["rules"] = std::move(rules);
    j["alpha"] = vector_to_json(spec.alpha);
    j["beta"] = vector_to_json(spec.beta);
    j["lambda0"] = spec.lambda0;
    j["gamma_raw"] = spec.gamma_raw;
    j["delta"] = spec.hyper.delta;
    j["rule_decay_rate"] = spec.hyper.rule_decay_rate;
    j["num_decay_rate"] = spec.hyper.num_decay_rate;
    j["type_names"] = names.names();
    return j.dump(2) + "\n";
}

ScenarioSpec load_scenario(const fs::path& path) { return scenario_from_json(read_file(path)); }

double default_delta(const std::vector<EventSequence>& corpus) {
    double gap_sum = 0.0;
    std::size_t gap_count = 0;
    for (const EventSequence& s : corpus) {
        const std::vector<Event>& ev = s.events();
        for (std::size_t i = 1; i < ev.size(); ++i) {
            gap_sum += ev[i].time - ev[i - 1].time;
            ++gap_count;
        }
    }
    if (gap_count == 0) {
        double horizon_sum = 0.0;
        for (const EventSequence& s : corpus) horizon_sum += s.horizon();
        return 0.05 * horizon_sum / std::max<std::size_t>(corpus.size(), 1);
    }
    return 0.05 * gap_sum / static_cast<double>(gap_count);
}

Hyperparams RunConfig::resolve_hyper(const std::vector<EventSequence>& corpus) const {
    Hyperparams h;
    h.delta = delta ? *delta : default_delta(corpus);
    h.rule_decay_rate = rule_decay_rate;
    h.num_decay_rate = num_decay_rate;
    h.validate();
    return h;
}

MiningConfig RunConfig::mining_config() const {
    MiningConfig m;
    m.subset_size = subset_size;
    m.budget = mining_budget;
    m.batch_size = batch_size;
    m.seed = seed;
    m.fit = fit;
    return m;
}

RunConfig run_config_from_json(const std::string& text) {
    const ordered_json j = parse_json(text, "run config");
    check_keys(j,
               {"format_version", "delta", "rule_decay_rate", "num_decay_rate", "max_predicates",
                "subset_size", "mining_budget", "batch_size", "integrate_to_horizon",
                "allow_unfiltered_leaves", "seed", "fit"},
               "run config");
    RunConfig cfg;
    if (j.contains("delta") && !j.at("delta").is_null())
        cfg.delta = require<double>(j, "delta", "run config");
    cfg.rule_decay_rate = get_or<double>(j, "rule_decay_rate", cfg.rule_decay_rate);
    cfg.num_decay_rate = get_or<double>(j, "num_decay_rate", cfg.num_decay_rate);
    cfg.max_predicates = get_or<int>(j, "max_predicates", cfg.max_predicates);
    cfg.subset_size = get_or<std::size_t>(j, "subset_size", cfg.subset_size);
    cfg.mining_budget = get_or<std::size_t>(j, "mining_budget", cfg.mining_budget);
    cfg.batch_size = get_or<std::size_t>(j, "batch_size", cfg.batch_size);
    cfg.integrate_to_horizon = get_or<bool>(j, "integrate_to_horizon", cfg.integrate_to_horizon);
    cfg.allow_unfiltered_leaves =
        get_or<bool>(j, "allow_unfiltered_leaves", cfg.allow_unfiltered_leaves);
    cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed);
    if (j.contains("fit")) {
        const ordered_json& f = j.at("fit");
        check_keys(f, {"max_epochs", "learning_rate", "convergence_tol", "seed", "l2_weight"},
                   "run config fit");
        cfg.fit.max_epochs = get_or<int>(f, "max_epochs", cfg.fit.max_epochs);
        cfg.fit.learning_rate = get_or<double>(f, "learning_rate", cfg.fit.learning_rate);
        cfg.fit.convergence_tol = get_or<double>(f, "convergence_tol", cfg.fit.convergence_tol);
        cfg.fit.seed = get_or<std::uint64_t>(f, "seed", cfg.fit.seed);
        cfg.fit.l2_weight = get_or<double>(f, "l2_weight", cfg.fit.l2_weight);
    }
    cfg.fit.validate();
    return cfg;
}

RunConfig load_run_config(const fs::path& path) {
    return run_config_from_json(read_file(path));
}

std::string mining_report_to_json(const MiningReport& report, const PredicateFilterResult* filter,
                                  const NameTable& names) {
    ordered_json j;
    j["format_version"] = 1;
    j["kind"] = "hrtpp_mining_report";
    j["seed"] = report.seed;
    j["num_types"] = report.pool.num_types;
    j["target_type"] = report.pool.target_type;
    j["empty_pool"] = report.empty_pool;
    if (filter) {
        j["filtered_predicates"] = filter->retained;
        j["predicate_nll_delta"] = filter->nll_delta;
        j["baseline_holdout_nll"] = filter->baseline_holdout_nll;
        j["filter_tolerance"] = filter->tolerance;
    } else {
        j["filtered_predicates"] = report.pool.filtered_predicates;
    }
    ordered_json raw = ordered_json::array();
    for (const auto& [m, size] : report.pool.raw_space_by_m) {
        ordered_json r;
        r["m"] = m;
        r["configurations"] = size;
        raw.push_back(std::move(r));
    }
    j["raw_space_by_m"] = std::move(raw);
    ordered_json pool = ordered_json::array();
    for (const Rule& r : report.pool.candidates) pool.push_back(print_rule(r, names));
    j["pool"] = std::move(pool);
    ordered_json evals = ordered_json::array();
    for (const SubsetEvaluation& e : report.evaluations) {
        ordered_json je;
        je["subset"] = e.subset;
        je["holdout_loglik"] = e.holdout_loglik;
        je["train_nll"] = e.train_nll;
        je["epochs_run"] = e.epochs_run;
        evals.push_back(std::move(je));
    }
    j["evaluations"] = std::move(evals);
    j["probability_trajectory"] = report.probability_trajectory;
    j["best_subset"] = report.best_subset;
    j["best_score"] = report.best_score;
    ordered_json selected = ordered_json::array();
    for (std::size_t i = 0; i < report.best_rules.size(); ++i) {
        char buf[48];
        std::snprintf(buf, sizeof buf, " # weight=%.17g",
                      report.best_model.params.alpha(static_cast<Eigen::Index>(i)));
        selected.push_back(print_rule(report.best_rules.rules()[i], names) + buf);
    }
    j["selected_rules"] = std::move(selected);
    j["cache_hits"] = report.cache_hits;
    return j.dump(2) + "\n";
}

std::string selected_rules_text(const MiningReport& report, const NameTable& names) {
    std::string out;
    for (std::size_t i = 0; i < report.best_rules.size(); ++i) {
        char buf[48];
        std::snprintf(buf, sizeof buf, " # weight=%.17g",
                      report.best_model.params.alpha(static_cast<Eigen::Index>(i)));
        out += print_rule(report.best_rules.rules()[i], names) + buf + "\n";
    }
    return out;
}

std::string eval_report_to_json(const EvalReport& report, const std::string& model_hash) {
    ordered_json j;
    j["format_version"] = 1;
    j["kind"] = "hrtpp_eval_report";
    j["nll"] = report.nll;
    j["rmse"] = report.rmse;
    if (report.rule_accuracy)
        j["rule_accuracy"] = *report.rule_accuracy;
    else
        j["rule_accuracy"] = nullptr;
    if (report.rule_recall)
        j["rule_recall"] = *report.rule_recall;
    else
        j["rule_recall"] = nullptr;
    j["num_sequences"] = report.num_sequences;
    j["num_predictions"] = report.num_predictions;
    j["rmse_skipped_sequences"] = report.rmse_skipped_sequences;
    j["config_fingerprint"] = report.config_fingerprint;
    j["model_corpus_hash"] = model_hash;
    return j.dump(2) + "\n";
}

std::string eval_details_to_csv(const EvalReport& report) {
    std::string out = "index,nll,num_targets,num_predictions,squared_error_sum,rmse_skipped\n";
    char buf[160];
    for (const SequenceEvalRow& row : report.details) {
        std::snprintf(buf, sizeof buf, "%zu,%.17g,%zu,%zu,%.17g,%d\n", row.index, row.nll,
                      row.num_targets, row.num_predictions, row.squared_error_sum,
                      row.rmse_skipped ? 1 : 0);
        out += buf;
    }
    return out;
}

} // namespace hrtpp
