#include "hrtpp/training.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace hrtpp {

namespace {

constexpr double kGauss8X[8] = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr double kGauss8W[8] = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

double inverse_softplus(double y) {
    // solve log(1 + e^x) = y for gamma = 1
    if (y > 30.0) return y;
    return std::log(std::expm1(y));
}

void check_shared_schema(const std::vector<EventSequence>& corpus) {
    if (corpus.empty()) throw ValidationError("corpus is empty");
    for (const EventSequence& s : corpus) {
        if (s.num_types() != corpus.front().num_types() ||
            s.target_type() != corpus.front().target_type())
            throw ValidationError("corpus sequences disagree on num_types/target_type");
    }
}

double empirical_target_rate(const std::vector<EventSequence>& corpus) {
    double events = 0.0, time = 0.0;
    for (const EventSequence& s : corpus) {
        events += static_cast<double>(s.target_times().size());
        time += s.horizon();
    }
    return std::max(events / std::max(time, 1e-12), 1e-3);
}

std::string name_of_theta(Eigen::Index i, std::size_t num_rules, int num_types) {
    if (i == 0) return "lambda0";
    if (i <= static_cast<Eigen::Index>(num_rules)) return "alpha[" + std::to_string(i - 1) + "]";
    const Eigen::Index jk = i - 1 - static_cast<Eigen::Index>(num_rules);
    if (jk < num_types) return "beta[" + std::to_string(jk) + "]";
    return "gamma_raw";
}

struct Objective {
    const std::vector<const LikelihoodDesign*>& designs;
    std::size_t num_rules;
    int num_types;
    double l2;
    const std::vector<bool>* alpha_active;

    // mean NLL + l2 over active alpha and masked beta
    double value(const ModelParams& p, std::vector<double>& slots) const {
        parallel_for(designs.size(), [&](std::size_t i) {
            slots[i] = nll_from_design(*designs[i], p).total;
        });
        double sum = 0.0;
        for (double v : slots) sum += v;
        double obj = sum / static_cast<double>(designs.size());
        obj += l2 * (p.alpha.squaredNorm() + p.beta.squaredNorm());
        return obj;
    }

    double value_and_gradient(const ModelParams& p, Eigen::VectorXd& grad,
                              std::vector<double>& val_slots,
                              std::vector<Eigen::VectorXd>& grad_slots) const {
        parallel_for(designs.size(), [&](std::size_t i) {
            NLLBreakdown b;
            grad_slots[i] = nll_gradient_from_design(*designs[i], p, &b);
            val_slots[i] = b.total;
        });
        const double inv = 1.0 / static_cast<double>(designs.size());
        grad.setZero();
        double sum = 0.0;
        for (std::size_t i = 0; i < designs.size(); ++i) {
            grad += grad_slots[i];
            sum += val_slots[i];
        }
        grad *= inv;
        double obj = sum * inv;
        const Eigen::Index J = static_cast<Eigen::Index>(num_rules);
        grad.segment(1, J) += 2.0 * l2 * p.alpha;
        grad.segment(1 + J, num_types) += 2.0 * l2 * p.beta;
        obj += l2 * (p.alpha.squaredNorm() + p.beta.squaredNorm());
        if (alpha_active) {
            for (Eigen::Index j = 0; j < J; ++j)
                if (!(*alpha_active)[static_cast<std::size_t>(j)]) grad(1 + j) = 0.0;
        }
        return obj;
    }
};

} // namespace

void FitConfig::validate() const {
    if (max_epochs < 0) throw ValidationError("max_epochs must be >= 0");
    if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
    if (!(convergence_tol > 0.0)) throw ValidationError("convergence_tol must be positive");
    if (l2_weight < 0.0) throw ValidationError("l2_weight must be non-negative");
}

std::pair<std::size_t, std::string> corpus_fingerprint(
    const std::vector<EventSequence>& corpus) {
    std::string bytes;
    char buf[64];
    for (const EventSequence& s : corpus) {
        std::snprintf(buf, sizeof buf, "|%a;%d;%d", s.horizon(), s.num_types(), s.target_type());
        bytes += buf;
        for (const Event& e : s.events()) {
            std::snprintf(buf, sizeof buf, ",%a:%d:%a", e.time, e.type, e.value);
            bytes += buf;
        }
    }
    return {corpus.size(), hex64(fnv1a64(bytes))};
}

double mean_nll(const std::vector<EventSequence>& corpus, const RuleSet& rules,
                const ModelParams& params, const NLLOptions& options) {
    check_shared_schema(corpus);
    std::vector<double> slots(corpus.size());
    parallel_for(corpus.size(), [&](std::size_t i) {
        const LikelihoodDesign d =
            LikelihoodDesign::build(corpus[i], rules, params.hyper, options);
        slots[i] = nll_from_design(d, params).total;
    });
    double sum = 0.0;
    for (double v : slots) sum += v;
    return sum / static_cast<double>(corpus.size());
}

DesignFit fit_designs(const std::vector<const LikelihoodDesign*>& designs, std::size_t num_rules,
                      int num_types, const FitConfig& config, const Hyperparams& hyper,
                      std::vector<bool> mask, const std::vector<bool>* alpha_active,
                      double empirical_rate) {
    config.validate();
    if (designs.empty()) throw ValidationError("corpus is empty");

    ModelParams params;
    params.alpha = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(num_rules));
    params.beta = Eigen::VectorXd::Zero(num_types);
    params.hyper = hyper;
    params.mask = std::move(mask);
    params.lambda0 = inverse_softplus(empirical_rate > 0.0 ? empirical_rate : 1.0);

    const Objective obj{designs, num_rules, num_types, config.l2_weight, alpha_active};
    std::vector<double> val_slots(designs.size());
    std::vector<Eigen::VectorXd> grad_slots(designs.size());

    Eigen::VectorXd theta = pack_params(params);
    const Eigen::Index dim = theta.size();
    Eigen::VectorXd m = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd v = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd grad(dim);
    constexpr double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;

    double current = obj.value(params, val_slots);
    DesignFit out;
    out.nll_history.reserve(static_cast<std::size_t>(config.max_epochs));
    int moment_age = 0;

    ModelParams trial = params;
    for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
        const double at_theta = obj.value_and_gradient(params, grad, val_slots, grad_slots);
        if (!std::isfinite(at_theta)) throw NumericError("NLL became non-finite at epoch " +
                                                         std::to_string(epoch));
        for (Eigen::Index i = 0; i < dim; ++i)
            if (!std::isfinite(grad(i)))
                throw NumericError("gradient of " + name_of_theta(i, num_rules, num_types) +
                                   " became non-finite at epoch " + std::to_string(epoch));

        ++moment_age;
        m = b1 * m + (1.0 - b1) * grad;
        v = b2 * v + (1.0 - b2) * grad.cwiseProduct(grad);
        const double c1 = 1.0 - std::pow(b1, moment_age);
        const double c2 = 1.0 - std::pow(b2, moment_age);
        const Eigen::VectorXd step =
            (config.learning_rate / c1) *
            (m.array() / ((v.array() / c2).sqrt() + adam_eps)).matrix();

        // monotone guard: try the adaptive step at a few scales, then fall
        // back to plain steepest descent (always a descent direction) and
        // restart the moment estimates
        auto try_step = [&](const Eigen::VectorXd& direction, int max_halvings,
                            double& scale_out) {
            double scale = 1.0;
            for (int half = 0; half < max_halvings; ++half) {
                unpack_params(theta - scale * direction, trial);
                const double proposed = obj.value(trial, val_slots);
                if (std::isfinite(proposed) &&
                    proposed < current - 1e-14 * (1.0 + std::abs(current))) {
                    scale_out = scale;
                    return proposed;
                }
                scale *= 0.5;
            }
            return std::numeric_limits<double>::quiet_NaN();
        };

        const double previous = current;
        double scale = 1.0;
        double proposed = try_step(step, 8, scale);
        Eigen::VectorXd accepted_step = step;
        if (!std::isfinite(proposed)) {
            const double gnorm = grad.cwiseAbs().maxCoeff();
            if (gnorm > 0.0) {
                accepted_step = (config.learning_rate / gnorm) * grad;
                proposed = try_step(accepted_step, 60, scale);
            }
            m.setZero();
            v.setZero();
            moment_age = 0;
        }
        const bool accepted = std::isfinite(proposed);
        if (accepted) {
            theta -= scale * accepted_step;
            unpack_params(theta, params);
            current = proposed;
        }
        out.nll_history.push_back(current);
        out.epochs_run = epoch;
        if (std::abs(previous - current) <=
            config.convergence_tol * std::max(1.0, std::abs(previous)))
            break; // includes the no-descent-direction case
    }

    out.params = params;
    // reported NLL excludes the regularizer
    out.train_nll = current - config.l2_weight * (params.alpha.squaredNorm() +
                                                  params.beta.squaredNorm());
    return out;
}

FittedModel fit(const std::vector<EventSequence>& corpus, const RuleSet& rules,
                const FitConfig& config, const Hyperparams& hyper, MaskMode mask_mode,
                const NLLOptions& options) {
    check_shared_schema(corpus);
    const int num_types = corpus.front().num_types();
    for (const Rule& r : rules.rules())
        if (r.max_leaf_type() > num_types)
            throw ValidationError("rule references a type beyond the corpus num_types");

    std::vector<LikelihoodDesign> designs(corpus.size());
    parallel_for(corpus.size(), [&](std::size_t i) {
        designs[i] = LikelihoodDesign::build(corpus[i], rules, hyper, options);
    });
    std::vector<const LikelihoodDesign*> ptrs(designs.size());
    for (std::size_t i = 0; i < designs.size(); ++i) ptrs[i] = &designs[i];

    const ModelParams init = ModelParams::make(rules, num_types, hyper, mask_mode);
    DesignFit df = fit_designs(ptrs, rules.size(), num_types, config, hyper, init.mask, nullptr,
                               empirical_target_rate(corpus));

    FittedModel model;
    model.rules = rules;
    model.params = std::move(df.params);
    model.num_types = num_types;
    model.mask_mode = mask_mode;
    model.options = options;
    model.train_nll = df.train_nll;
    model.epochs_run = df.epochs_run;
    model.config = config;
    model.nll_history = std::move(df.nll_history);
    const auto [count, hash] = corpus_fingerprint(corpus);
    model.corpus_count = count;
    model.corpus_hash = hash;
    return model;
}

FrozenIntensity freeze_history(const FittedModel& model, const EventSequence& history,
                               double t_from) {
    if (!history.events().empty() && history.events().back().time > t_from)
        throw ValidationError("t_from must be >= the last history event");
    const ModelParams& p = model.params;
    FrozenIntensity f;
    f.t0 = t_from;
    f.lambda0 = p.lambda0;
    f.gamma = p.gamma();
    f.rule_rate = p.hyper.rule_decay_rate;
    f.num_rate = p.hyper.num_decay_rate;

    const std::vector<TriggerSet> triggers = compute_triggers(model.rules, history, p.hyper.delta);
    const DecayKernel rule_kernel{DecayKernel::Kind::Exponential, p.hyper.rule_decay_rate};
    const DecayKernel num_kernel{DecayKernel::Kind::Exponential, p.hyper.num_decay_rate};
    for (std::size_t j = 0; j < triggers.size(); ++j)
        f.rule_amp += p.alpha(static_cast<Eigen::Index>(j)) *
                      rule_signal(triggers[j], rule_kernel, t_from);
    for (int k = 1; k <= history.num_types(); ++k)
        f.num_amp += p.beta(k - 1) * numeric_signal(history, k,
                                                    p.mask[static_cast<std::size_t>(k - 1)],
                                                    num_kernel, t_from);
    return f;
}

namespace {

// One Gauss panel of the frozen intensity over [a, b].
double panel_integral(const FrozenIntensity& f, double a, double b) {
    const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
    double sum = 0.0;
    for (int q = 0; q < 8; ++q) sum += half * kGauss8W[q] * f.intensity(mid + half * kGauss8X[q]);
    return sum;
}

double panel_width(const FrozenIntensity& f) {
    const double scale = std::max({f.asymptotic_intensity(), f.intensity(f.t0), f.rule_rate,
                                   f.num_rate, 1e-3});
    return 0.5 / scale;
}

} // namespace

double survival(const FrozenIntensity& frozen, double t) {
    if (t <= frozen.t0) return 1.0;
    const double h = panel_width(frozen);
    double cum = 0.0;
    double a = frozen.t0;
    while (a < t) {
        const double b = std::min(a + h, t);
        cum += panel_integral(frozen, a, b);
        a = b;
    }
    return std::exp(-cum);
}

double next_event_density(const FittedModel& model, const EventSequence& history, double t_from,
                          double t_query) {
    if (t_query < t_from) throw ValidationError("t_query must be >= t_from");
    const FrozenIntensity f = freeze_history(model, history, t_from);
    return f.intensity(t_query) * survival(f, t_query);
}

namespace {

// Amplitudes decayed to nothing relative to the asymptotic rate: from here on
// the intensity is the constant lambda_inf and the tail is closed-form.
bool amplitudes_negligible(const FrozenIntensity& f, double a, double lambda_inf) {
    const double ra = f.rule_amp * std::exp(-f.rule_rate * (a - f.t0));
    const double na = f.num_amp * std::exp(-f.num_rate * (a - f.t0));
    return std::abs(ra) + std::abs(na) <= 1e-14 * std::max(lambda_inf, 1e-300);
}

} // namespace

double predict_next_time(const FittedModel& model, const EventSequence& history, double t_from,
                         double survival_eps) {
    const FrozenIntensity f = freeze_history(model, history, t_from);
    const double lambda_inf = f.asymptotic_intensity();
    const double h = panel_width(f);
    const double limit = 1e6 / std::max(lambda_inf, 1e-300);

    double cum = 0.0;       // compensator from t_from
    double expectation = 0.0; // integral of the survival function
    double a = t_from;
    while (std::exp(-cum) >= survival_eps) {
        if (amplitudes_negligible(f, a, lambda_inf)) {
            // survival would stay above the threshold for more than 1e6 mean
            // gaps only when the asymptotic rate has vanished entirely
            if (!(lambda_inf > 0.0))
                throw NumericError("prediction diverged: survival stayed above threshold");
            expectation += std::exp(-cum) / lambda_inf;
            return t_from + expectation;
        }
        if (a - t_from > limit)
            throw NumericError("prediction diverged: survival stayed above threshold");
        const double b = a + h;
        const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
        for (int q = 0; q < 8; ++q) {
            const double tq = mid + half * kGauss8X[q];
            // survival at the node needs the compensator up to the node
            const double lam_q = cum + panel_integral(f, a, tq);
            expectation += half * kGauss8W[q] * std::exp(-lam_q);
        }
        cum += panel_integral(f, a, b);
        a = b;
    }
    // asymptotic-rate tail: survival decays as exp(-lambda_inf * t) past a
    expectation += std::exp(-cum) / std::max(lambda_inf, 1e-300);
    return t_from + expectation;
}

double sample_next_time(const FittedModel& model, const EventSequence& history, double t_from,
                        std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const double u = std::max(unif(rng), 1e-300);
    const double target = -std::log(u); // solve compensator(tau) == target
    const FrozenIntensity f = freeze_history(model, history, t_from);
    const double h = panel_width(f);
    const double limit = 1e6 / std::max(f.asymptotic_intensity(), 1e-300);

    double cum = 0.0;
    double a = t_from;
    while (true) {
        if (amplitudes_negligible(f, a, f.asymptotic_intensity())) {
            const double rate = f.asymptotic_intensity();
            if (!(rate > 0.0)) throw NumericError("sample_next_time: compensator diverged");
            return a + (target - cum) / rate; // constant-rate region, exact
        }
        if (a - t_from > limit) throw NumericError("sample_next_time: compensator diverged");
        const double step = panel_integral(f, a, a + h);
        if (cum + step >= target) break;
        cum += step;
        a += h;
    }
    // bisect inside [a, a+h]
    double lo = a, hi = a + h;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (cum + panel_integral(f, a, mid) < target)
            lo = mid;
        else
            hi = mid;
        if (hi - lo < 1e-12 * std::max(1.0, hi)) break;
    }
    return 0.5 * (lo + hi);
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> train_test_split(
    std::size_t n, double test_fraction, std::uint64_t seed) {
    if (test_fraction < 0.0 || test_fraction >= 1.0)
        throw ValidationError("test_fraction must be in [0, 1)");
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 rng(derive_seed(seed, 0x5117));
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t n_test = static_cast<std::size_t>(std::floor(test_fraction *
                                                                   static_cast<double>(n)));
    std::vector<std::size_t> test(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_test), order.end());
    std::sort(train.begin(), train.end());
    std::sort(test.begin(), test.end());
    return {train, test};
}

} // namespace hrtpp
