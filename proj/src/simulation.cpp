#include "hrtpp/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "hrtpp/encoders.hpp"
#include "hrtpp/intensity.hpp"

namespace hrtpp {

void ScenarioSpec::validate() const {
    if (num_types < 1) throw ValidationError("scenario num_types must be positive");
    if (target_type < 1 || target_type > num_types)
        throw ValidationError("scenario target_type out of range");
    if (!(horizon >= 0.0) || !std::isfinite(horizon))
        throw ValidationError("scenario horizon must be non-negative and finite");
    if (num_sequences < 1) throw ValidationError("scenario num_sequences must be >= 1");
    if (background_rates.size() != static_cast<std::size_t>(num_types))
        throw ValidationError("background_rates must have one entry per type");
    for (int k = 1; k <= num_types; ++k) {
        if (k == target_type) continue;
        const double r = background_rates[static_cast<std::size_t>(k - 1)];
        if (!(r >= 0.0) || !std::isfinite(r))
            throw ValidationError("background rate for type " + std::to_string(k) +
                                  " must be non-negative");
    }
    if (value_dists.size() != static_cast<std::size_t>(num_types))
        throw ValidationError("value_dists must have one entry per type");
    for (const ValueDistribution& d : value_dists)
        if (d.kind == ValueDistribution::Kind::Normal && !(d.stddev >= 0.0))
            throw ValidationError("value stddev must be non-negative");
    if (rules.target() != target_type && !rules.empty())
        throw ValidationError("planted rules must share the scenario target");
    for (const Rule& r : rules.rules())
        if (r.max_leaf_type() > num_types)
            throw ValidationError("planted rule references a type beyond num_types");
    if (alpha.size() != static_cast<Eigen::Index>(rules.size()))
        throw ValidationError("alpha must have one entry per planted rule");
    if (beta.size() != num_types) throw ValidationError("beta must have one entry per type");
    hyper.validate();
    if (!type_names.empty() && type_names.size() != static_cast<std::size_t>(num_types))
        throw ValidationError("type_names must have one entry per type when given");
}

ModelParams ScenarioSpec::true_params() const {
    ModelParams p = ModelParams::make(rules, num_types, hyper, MaskMode::FromRules);
    p.lambda0 = lambda0;
    p.alpha = alpha;
    p.beta = beta;
    p.gamma_raw = gamma_raw;
    return p;
}

NameTable ScenarioSpec::name_table() const {
    if (type_names.empty()) return NameTable::defaults(num_types);
    return NameTable(type_names);
}

std::string scenario_hash(const ScenarioSpec& spec) {
    std::string bytes;
    char buf[96];
    std::snprintf(buf, sizeof buf, "K=%d;Y=%d;T=%a;M=%zu;seed=%llu;l0=%a;g=%a", spec.num_types,
                  spec.target_type, spec.horizon, spec.num_sequences,
                  static_cast<unsigned long long>(spec.seed), spec.lambda0, spec.gamma_raw);
    bytes += buf;
    std::snprintf(buf, sizeof buf, ";d=%a;wr=%a;wn=%a", spec.hyper.delta,
                  spec.hyper.rule_decay_rate, spec.hyper.num_decay_rate);
    bytes += buf;
    for (double r : spec.background_rates) {
        std::snprintf(buf, sizeof buf, ";r=%a", r);
        bytes += buf;
    }
    for (const ValueDistribution& d : spec.value_dists) {
        std::snprintf(buf, sizeof buf, ";v=%d:%a:%a", static_cast<int>(d.kind), d.mean, d.stddev);
        bytes += buf;
    }
    for (Eigen::Index i = 0; i < spec.alpha.size(); ++i) {
        std::snprintf(buf, sizeof buf, ";a=%a", spec.alpha(i));
        bytes += buf;
    }
    for (Eigen::Index i = 0; i < spec.beta.size(); ++i) {
        std::snprintf(buf, sizeof buf, ";b=%a", spec.beta(i));
        bytes += buf;
    }
    for (const Rule& r : spec.rules.rules()) {
        bytes += ";R=";
        for (int x : r.encoding()) bytes += std::to_string(x) + ".";
    }
    // resolved names, so an explicit default table hashes like an empty one
    const NameTable names = spec.name_table();
    for (const std::string& n : names.names()) bytes += ";n=" + n;
    return hex64(fnv1a64(bytes));
}

namespace {

double draw_value(const ValueDistribution& dist, std::mt19937_64& rng) {
    if (dist.kind == ValueDistribution::Kind::Constant) return dist.mean;
    std::normal_distribution<double> normal(dist.mean, dist.stddev);
    return normal(rng);
}

} // namespace

EventSequence simulate_sequence(const ScenarioSpec& spec, std::uint64_t seed) {
    spec.validate();
    std::mt19937_64 rng(seed);
    std::vector<Event> events;

    // covariate streams first: homogeneous Poisson via exponential gaps,
    // drawn in ascending type order
    for (int k = 1; k <= spec.num_types; ++k) {
        if (k == spec.target_type) continue;
        const double rate = spec.background_rates[static_cast<std::size_t>(k - 1)];
        if (rate <= 0.0) continue;
        std::exponential_distribution<double> gap(rate);
        double t = gap(rng);
        while (t < spec.horizon) {
            events.push_back(
                Event{t, k, draw_value(spec.value_dists[static_cast<std::size_t>(k - 1)], rng)});
            t += gap(rng);
        }
    }
    std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        return a.time < b.time || (a.time == b.time && a.type < b.type);
    });

    if (spec.horizon <= 0.0)
        return EventSequence({}, std::max(spec.horizon, 1e-12), spec.num_types, spec.target_type);

    // the target never appears as a rule leaf and its mask is off, so the
    // target intensity depends on the covariate history only
    const EventSequence covariates(events, spec.horizon, spec.num_types, spec.target_type);
    const ModelParams params = spec.true_params();
    const std::vector<TriggerSet> triggers =
        compute_triggers(spec.rules, covariates, spec.hyper.delta);

    std::vector<double> breaks{0.0, spec.horizon};
    for (const Event& e : events) breaks.push_back(e.time);
    for (const TriggerSet& ts : triggers)
        for (double t : ts.times) breaks.push_back(t);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    const Eigen::Index J = static_cast<Eigen::Index>(spec.rules.size());
    Eigen::VectorXd rule_state = Eigen::VectorXd::Zero(J);     // e_j at the panel anchor
    Eigen::VectorXd num_state = Eigen::VectorXd::Zero(spec.num_types); // masked g_k
    std::vector<std::size_t> trig_ptr(static_cast<std::size_t>(J), 0);
    std::size_t event_ptr = 0;

    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<Event> targets;
    const double gamma = params.gamma();

    double anchor = 0.0;
    for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
        const double a = breaks[b];
        const double next = breaks[b + 1];
        if (a > anchor) {
            rule_state *= std::exp(-spec.hyper.rule_decay_rate * (a - anchor));
            num_state *= std::exp(-spec.hyper.num_decay_rate * (a - anchor));
        }
        anchor = a;
        for (Eigen::Index j = 0; j < J; ++j) {
            const std::vector<double>& ts = triggers[static_cast<std::size_t>(j)].times;
            std::size_t& p = trig_ptr[static_cast<std::size_t>(j)];
            while (p < ts.size() && ts[p] <= a) {
                if (ts[p] == a) rule_state(j) += 1.0;
                ++p;
            }
        }
        while (event_ptr < events.size() && events[event_ptr].time <= a) {
            const Event& e = events[event_ptr];
            if (e.time == a && params.mask[static_cast<std::size_t>(e.type - 1)])
                num_state(e.type - 1) += e.value;
            ++event_ptr;
        }

        // dominating bound on the panel: positive contributions are maximal at
        // the anchor, negative ones are bounded above by zero
        auto pre_activation = [&](double t) {
            const double rd = std::exp(-spec.hyper.rule_decay_rate * (t - a));
            const double nd = std::exp(-spec.hyper.num_decay_rate * (t - a));
            double x = params.lambda0;
            for (Eigen::Index j = 0; j < J; ++j) x += params.alpha(j) * rule_state(j) * rd;
            for (Eigen::Index k = 0; k < spec.num_types; ++k)
                x += params.beta(k) * num_state(k) * nd;
            return x;
        };
        double x_max = params.lambda0;
        for (Eigen::Index j = 0; j < J; ++j)
            x_max += std::max(params.alpha(j) * rule_state(j), 0.0);
        for (Eigen::Index k = 0; k < spec.num_types; ++k)
            x_max += std::max(params.beta(k) * num_state(k), 0.0);
        const double bound = softplus_scaled(x_max, gamma) + 1e-12;

        std::exponential_distribution<double> wait(bound);
        double s = a;
        while (true) {
            s += wait(rng);
            if (s >= next) break;
            const double lam = softplus_scaled(pre_activation(s), gamma);
            if (lam > bound * (1.0 + 1e-9))
                throw NumericError("thinning bound violated (internal bug)");
            if (unif(rng) * bound <= lam) {
                targets.push_back(Event{
                    s, spec.target_type,
                    draw_value(spec.value_dists[static_cast<std::size_t>(spec.target_type - 1)],
                               rng)});
            }
        }
    }

    events.insert(events.end(), targets.begin(), targets.end());
    std::stable_sort(events.begin(), events.end(), [](const Event& a, const Event& b) {
        return a.time < b.time || (a.time == b.time && a.type < b.type);
    });
    return EventSequence(std::move(events), spec.horizon, spec.num_types, spec.target_type);
}

std::pair<std::vector<EventSequence>, CorpusManifest> simulate_corpus(const ScenarioSpec& spec) {
    spec.validate();
    std::vector<EventSequence> corpus(spec.num_sequences);
    parallel_for(spec.num_sequences, [&](std::size_t i) {
        corpus[i] = simulate_sequence(spec, derive_seed(spec.seed, i));
    });

    CorpusManifest manifest;
    manifest.num_sequences = spec.num_sequences;
    manifest.seed = spec.seed;
    manifest.spec_hash = scenario_hash(spec);
    manifest.num_types = spec.num_types;
    manifest.target_type = spec.target_type;
    const NameTable names = spec.name_table();
    manifest.type_names = names.names();
    char buf[48];
    for (std::size_t j = 0; j < spec.rules.size(); ++j) {
        std::snprintf(buf, sizeof buf, " # weight=%.17g", spec.alpha(static_cast<Eigen::Index>(j)));
        manifest.true_rules.push_back(print_rule(spec.rules.rules()[j], names) + buf);
    }
    return {std::move(corpus), std::move(manifest)};
}

} // namespace hrtpp
