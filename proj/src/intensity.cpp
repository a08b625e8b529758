#include "hrtpp/intensity.hpp"

#include <algorithm>
#include <cmath>

namespace hrtpp {

namespace {

// 8-node Gauss-Legendre abscissae/weights on [-1, 1].
constexpr int kGaussNodes = 8;
constexpr double kGaussX[kGaussNodes] = {
    -0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
    0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
constexpr double kGaussW[kGaussNodes] = {
    0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
    0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};

// Masked linear parameter vector [lambda0, alpha, mask*beta] matching the
// design's column layout.
Eigen::VectorXd effective_linear(const ModelParams& params, Eigen::Index num_rules,
                                 Eigen::Index num_types) {
    Eigen::VectorXd w(1 + num_rules + num_types);
    w(0) = params.lambda0;
    w.segment(1, num_rules) = params.alpha;
    for (Eigen::Index k = 0; k < num_types; ++k)
        w(1 + num_rules + k) =
            params.mask[static_cast<std::size_t>(k)] ? params.beta(k) : 0.0;
    return w;
}

} // namespace

LikelihoodDesign LikelihoodDesign::build(const EventSequence& sequence, const RuleSet& rules,
                                         const Hyperparams& hyper, const NLLOptions& options,
                                         const std::vector<double>* value_times) {
    hyper.validate();
    LikelihoodDesign d;
    d.num_rules_ = static_cast<Eigen::Index>(rules.size());
    d.num_types_ = sequence.num_types();

    const std::vector<TriggerSet> triggers = compute_triggers(rules, sequence, hyper.delta);
    d.target_times_ = value_times ? *value_times : sequence.target_times();
    for (std::size_t i = 1; i < d.target_times_.size(); ++i)
        if (d.target_times_[i] < d.target_times_[i - 1])
            throw ValidationError("target times must be sorted");
    for (double t : d.target_times_)
        if (t < 0.0 || t > sequence.horizon())
            throw ValidationError("target time outside [0, horizon]");

    const double upper = options.integrate_to_horizon
                             ? sequence.horizon()
                             : (d.target_times_.empty() ? 0.0 : d.target_times_.back());

    std::vector<double> breaks;
    breaks.push_back(0.0);
    breaks.push_back(upper);
    for (const Event& e : sequence.events())
        if (e.time <= upper) breaks.push_back(e.time);
    for (const TriggerSet& ts : triggers)
        for (double t : ts.times)
            if (t <= upper) breaks.push_back(t);
    for (double t : d.target_times_) breaks.push_back(t);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    const Eigen::Index J = d.num_rules_;
    const Eigen::Index K = d.num_types_;
    const Eigen::Index cols = 1 + J + K;
    const Eigen::Index panels = static_cast<Eigen::Index>(breaks.size()) - 1;
    d.node_features_.resize(panels * kGaussNodes, cols);
    d.node_weights_.resize(panels * kGaussNodes);
    d.node_interval_.resize(static_cast<std::size_t>(panels * kGaussNodes));
    d.target_features_.resize(static_cast<Eigen::Index>(d.target_times_.size()), cols);

    // Rolling signal states at the current breakpoint (right-continuous).
    Eigen::VectorXd rule_state = Eigen::VectorXd::Zero(J);
    Eigen::VectorXd num_state = Eigen::VectorXd::Zero(K);

    std::vector<std::size_t> trig_ptr(static_cast<std::size_t>(J), 0);
    std::size_t event_ptr = 0;
    std::size_t target_row = 0;
    std::size_t interval_ptr = 0; // index into target_times_ for bucket labels

    double anchor = 0.0;
    Eigen::Index row = 0;
    for (std::size_t b = 0; b < breaks.size(); ++b) {
        const double t = breaks[b];
        // decay both states from the previous breakpoint
        if (t > anchor) {
            rule_state *= std::exp(-hyper.rule_decay_rate * (t - anchor));
            num_state *= std::exp(-hyper.num_decay_rate * (t - anchor));
            anchor = t;
        }
        // left-limit rows for every value time equal to this breakpoint
        while (target_row < d.target_times_.size() && d.target_times_[target_row] == t) {
            const Eigen::Index r = static_cast<Eigen::Index>(target_row);
            d.target_features_(r, 0) = 1.0;
            d.target_features_.row(r).segment(1, J) = rule_state.transpose();
            d.target_features_.row(r).segment(1 + J, K) = num_state.transpose();
            ++target_row;
        }
        // contributions landing exactly at this breakpoint
        for (Eigen::Index j = 0; j < J; ++j) {
            const std::vector<double>& times = triggers[static_cast<std::size_t>(j)].times;
            std::size_t& p = trig_ptr[static_cast<std::size_t>(j)];
            while (p < times.size() && times[p] <= t) {
                if (times[p] == t) rule_state(j) += 1.0;
                ++p;
            }
        }
        while (event_ptr < sequence.events().size() && sequence.events()[event_ptr].time <= t) {
            const Event& e = sequence.events()[event_ptr];
            if (e.time == t) num_state(e.type - 1) += e.value;
            ++event_ptr;
        }
        if (b + 1 >= breaks.size()) break;

        const double next = breaks[b + 1];
        while (interval_ptr < d.target_times_.size() && d.target_times_[interval_ptr] <= t)
            ++interval_ptr;
        const double half = 0.5 * (next - t);
        const double mid = 0.5 * (next + t);
        for (int q = 0; q < kGaussNodes; ++q) {
            const double tq = mid + half * kGaussX[q];
            d.node_features_(row, 0) = 1.0;
            const double rd = std::exp(-hyper.rule_decay_rate * (tq - t));
            const double nd = std::exp(-hyper.num_decay_rate * (tq - t));
            d.node_features_.row(row).segment(1, J) = (rule_state * rd).transpose();
            d.node_features_.row(row).segment(1 + J, K) = (num_state * nd).transpose();
            d.node_weights_(row) = half * kGaussW[q];
            d.node_interval_[static_cast<std::size_t>(row)] = static_cast<int>(interval_ptr);
            ++row;
        }
    }
    return d;
}

Eigen::VectorXd pack_params(const ModelParams& params) {
    const Eigen::Index J = params.alpha.size();
    const Eigen::Index K = params.beta.size();
    Eigen::VectorXd theta(2 + J + K);
    theta(0) = params.lambda0;
    theta.segment(1, J) = params.alpha;
    theta.segment(1 + J, K) = params.beta;
    theta(1 + J + K) = params.gamma_raw;
    return theta;
}

void unpack_params(const Eigen::VectorXd& theta, ModelParams& params) {
    const Eigen::Index J = params.alpha.size();
    const Eigen::Index K = params.beta.size();
    if (theta.size() != 2 + J + K) throw ValidationError("parameter vector size mismatch");
    params.lambda0 = theta(0);
    params.alpha = theta.segment(1, J);
    params.beta = theta.segment(1 + J, K);
    params.gamma_raw = theta(1 + J + K);
}

NLLBreakdown nll_from_design(const LikelihoodDesign& design, const ModelParams& params) {
    params.validate(static_cast<std::size_t>(design.num_rules()),
                    static_cast<int>(design.num_types()));
    const double gamma = params.gamma();
    const Eigen::VectorXd w = effective_linear(params, design.num_rules(), design.num_types());

    NLLBreakdown out;
    const Eigen::VectorXd x_nodes = design.node_features() * w;
    for (Eigen::Index q = 0; q < x_nodes.size(); ++q)
        out.integral_term += design.node_weights()(q) * softplus_scaled(x_nodes(q), gamma);

    const Eigen::VectorXd x_targets = design.target_features() * w;
    for (Eigen::Index i = 0; i < x_targets.size(); ++i)
        out.log_term -= std::log(softplus_scaled(x_targets(i), gamma));

    out.total = out.log_term + out.integral_term;
    return out;
}

Eigen::VectorXd nll_gradient_from_design(const LikelihoodDesign& design,
                                         const ModelParams& params, NLLBreakdown* value_out) {
    params.validate(static_cast<std::size_t>(design.num_rules()),
                    static_cast<int>(design.num_types()));
    const double gamma = params.gamma();
    const Eigen::Index J = design.num_rules();
    const Eigen::Index K = design.num_types();
    const Eigen::VectorXd w = effective_linear(params, J, K);

    NLLBreakdown value;
    double grad_gamma_raw = 0.0;

    // integral term: sum_q w_q * softplus(x_q); d/dlin = w_q * sigma(x_q/gamma) * u_q
    const Eigen::VectorXd x_nodes = design.node_features() * w;
    Eigen::VectorXd node_coeff(x_nodes.size());
    for (Eigen::Index q = 0; q < x_nodes.size(); ++q) {
        const double sp = softplus_scaled(x_nodes(q), gamma);
        const double sig = logistic(x_nodes(q) / gamma);
        value.integral_term += design.node_weights()(q) * sp;
        node_coeff(q) = design.node_weights()(q) * sig;
        grad_gamma_raw += design.node_weights()(q) * (sp - x_nodes(q) * sig);
    }
    Eigen::VectorXd grad_lin = design.node_features().transpose() * node_coeff;

    // log term: -sum_i log softplus(x_i); d/dlin = -(sigma_i / lambda_i) * u_i
    const Eigen::VectorXd x_targets = design.target_features() * w;
    if (x_targets.size() > 0) {
        Eigen::VectorXd target_coeff(x_targets.size());
        for (Eigen::Index i = 0; i < x_targets.size(); ++i) {
            const double sp = softplus_scaled(x_targets(i), gamma);
            const double sig = logistic(x_targets(i) / gamma);
            value.log_term -= std::log(sp);
            target_coeff(i) = -sig / sp;
            grad_gamma_raw -= (sp - x_targets(i) * sig) / sp;
        }
        grad_lin += design.target_features().transpose() * target_coeff;
    }
    value.total = value.log_term + value.integral_term;
    if (value_out) *value_out = value;

    Eigen::VectorXd grad(2 + J + K);
    grad(0) = grad_lin(0);
    grad.segment(1, J) = grad_lin.segment(1, J);
    for (Eigen::Index k = 0; k < K; ++k)
        grad(1 + J + k) = params.mask[static_cast<std::size_t>(k)] ? grad_lin(1 + J + k) : 0.0;
    grad(1 + J + K) = grad_gamma_raw;
    return grad;
}

std::vector<double> compensator_increments_from_design(const LikelihoodDesign& design,
                                                       const ModelParams& params) {
    const double gamma = params.gamma();
    const Eigen::VectorXd w = effective_linear(params, design.num_rules(), design.num_types());
    std::vector<double> increments(design.target_times().size(), 0.0);
    const Eigen::VectorXd x_nodes = design.node_features() * w;
    for (Eigen::Index q = 0; q < x_nodes.size(); ++q) {
        const std::size_t bucket = static_cast<std::size_t>(design.node_interval()[
            static_cast<std::size_t>(q)]);
        if (bucket < increments.size())
            increments[bucket] += design.node_weights()(q) * softplus_scaled(x_nodes(q), gamma);
    }
    return increments;
}

IntensityContext::IntensityContext(EventSequence sequence, RuleSet rules, ModelParams params,
                                   NLLOptions options)
    : sequence_(std::move(sequence)), rules_(std::move(rules)), params_(std::move(params)),
      options_(options) {
    params_.validate(rules_.size(), sequence_.num_types());
    triggers_ = compute_triggers(rules_, sequence_, params_.hyper.delta);
    design_ = LikelihoodDesign::build(sequence_, rules_, params_.hyper, options_);
}

double IntensityContext::pre_activation(double t, bool left_limit) const {
    const DecayKernel rule_kernel{DecayKernel::Kind::Exponential, params_.hyper.rule_decay_rate};
    const DecayKernel num_kernel{DecayKernel::Kind::Exponential, params_.hyper.num_decay_rate};
    double x = params_.lambda0;
    for (std::size_t j = 0; j < triggers_.size(); ++j) {
        double e = 0.0;
        for (double tj : triggers_[j].times) {
            if (tj > t || (left_limit && tj == t)) break;
            e += rule_kernel(t - tj);
        }
        x += params_.alpha(static_cast<Eigen::Index>(j)) * e;
    }
    for (int k = 1; k <= sequence_.num_types(); ++k) {
        if (!params_.mask[static_cast<std::size_t>(k - 1)]) continue;
        double g = 0.0;
        for (const Event& e : sequence_.events()) {
            if (e.time > t || (left_limit && e.time == t)) break;
            if (e.type == k) g += e.value * num_kernel(t - e.time);
        }
        x += params_.beta(k - 1) * g;
    }
    return x;
}

double intensity_at(const IntensityContext& ctx, double t) {
    return softplus_scaled(ctx.pre_activation(t, false), ctx.params().gamma());
}

double intensity_before(const IntensityContext& ctx, double t) {
    return softplus_scaled(ctx.pre_activation(t, true), ctx.params().gamma());
}

NLLBreakdown nll(const IntensityContext& ctx) {
    return nll_from_design(ctx.design(), ctx.params());
}

NLLBreakdown nll(const IntensityContext& ctx, const std::vector<double>& target_times) {
    if (target_times == ctx.design().target_times())
        return nll_from_design(ctx.design(), ctx.params());
    const LikelihoodDesign design = LikelihoodDesign::build(
        ctx.sequence(), ctx.rules(), ctx.params().hyper, ctx.options(), &target_times);
    return nll_from_design(design, ctx.params());
}

Eigen::VectorXd nll_gradient(const IntensityContext& ctx) {
    return nll_gradient_from_design(ctx.design(), ctx.params());
}

double compensator(const IntensityContext& ctx, double from, double to) {
    if (!(from <= to)) throw ValidationError("compensator: from must be <= to");
    // fresh panels over [from, to], split at every event/trigger inside
    std::vector<double> breaks{from, to};
    for (const Event& e : ctx.sequence().events())
        if (e.time > from && e.time < to) breaks.push_back(e.time);
    for (const TriggerSet& ts : ctx.triggers())
        for (double t : ts.times)
            if (t > from && t < to) breaks.push_back(t);
    std::sort(breaks.begin(), breaks.end());
    breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

    double total = 0.0;
    for (std::size_t b = 0; b + 1 < breaks.size(); ++b) {
        const double half = 0.5 * (breaks[b + 1] - breaks[b]);
        const double mid = 0.5 * (breaks[b + 1] + breaks[b]);
        for (int q = 0; q < kGaussNodes; ++q)
            total += half * kGaussW[q] * intensity_at(ctx, mid + half * kGaussX[q]);
    }
    return total;
}

std::vector<double> compensator_increments(const IntensityContext& ctx) {
    return compensator_increments_from_design(ctx.design(), ctx.params());
}

} // namespace hrtpp
