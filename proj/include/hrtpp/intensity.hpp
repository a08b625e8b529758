#pragma once

#include <Eigen/Dense>

#include <vector>

#include "hrtpp/core.hpp"
#include "hrtpp/encoders.hpp"

namespace hrtpp {

// Scaled softplus gamma*log(1 + exp(x/gamma)), evaluated stably for large |x|.
[[nodiscard]] inline double softplus_scaled(double x, double gamma) noexcept {
    return std::max(x, 0.0) + gamma * std::log1p(std::exp(-std::abs(x) / gamma));
}

[[nodiscard]] inline double logistic(double z) noexcept {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

struct NLLBreakdown {
    double log_term = 0.0;      // -sum_i log lambda(t_i | H_{t_i})
    double integral_term = 0.0; // compensator over the integration domain
    double total = 0.0;
};

struct NLLOptions {
    // Default integrates to the sequence horizon (tail treated as censored
    // observation time); false stops at the last target event instead.
    bool integrate_to_horizon = true;
};

// Quadrature/feature cache for one sequence and one rule set. Signals are
// parameter-free, so rows are built once and any parameter vector evaluates
// with dense matrix products.
//
// Feature column layout: [1 | e_1..e_J | g_1..g_K] with g unmasked; masks are
// applied to the parameter vector at evaluation time.
class LikelihoodDesign {
public:
    [[nodiscard]] static LikelihoodDesign build(const EventSequence& sequence,
                                                const RuleSet& rules, const Hyperparams& hyper,
                                                const NLLOptions& options = {},
                                                const std::vector<double>* value_times = nullptr);

    [[nodiscard]] Eigen::Index num_rules() const noexcept { return num_rules_; }
    [[nodiscard]] Eigen::Index num_types() const noexcept { return num_types_; }
    [[nodiscard]] Eigen::Index cols() const noexcept { return 1 + num_rules_ + num_types_; }
    [[nodiscard]] const Eigen::MatrixXd& node_features() const noexcept { return node_features_; }
    [[nodiscard]] const Eigen::VectorXd& node_weights() const noexcept { return node_weights_; }
    [[nodiscard]] const Eigen::MatrixXd& target_features() const noexcept { return target_features_; }
    [[nodiscard]] const std::vector<double>& target_times() const noexcept { return target_times_; }
    // For node q, the index i such that the node lies in (t_{i-1}, t_i] between
    // consecutive target times (i == target count for the censored tail).
    [[nodiscard]] const std::vector<int>& node_interval() const noexcept { return node_interval_; }

private:
    Eigen::Index num_rules_ = 0;
    Eigen::Index num_types_ = 0;
    Eigen::MatrixXd node_features_;
    Eigen::VectorXd node_weights_;
    Eigen::MatrixXd target_features_;
    std::vector<double> target_times_;
    std::vector<int> node_interval_;
};

// Parameter vector layout used by the optimizer: [lambda0, alpha_1..J,
// beta_1..K, gamma_raw].
[[nodiscard]] Eigen::VectorXd pack_params(const ModelParams& params);
void unpack_params(const Eigen::VectorXd& theta, ModelParams& params);

// NLL of one sequence from its design; the masked parameter vector enters the
// features linearly and the softplus transform supplies positivity.
[[nodiscard]] NLLBreakdown nll_from_design(const LikelihoodDesign& design,
                                           const ModelParams& params);

// Analytic gradient of NLLBreakdown::total with respect to the packed
// parameter vector; quadrature panels are shared with nll_from_design so the
// value and gradient are mutually consistent. Optionally returns the value.
[[nodiscard]] Eigen::VectorXd nll_gradient_from_design(const LikelihoodDesign& design,
                                                       const ModelParams& params,
                                                       NLLBreakdown* value_out = nullptr);

// Compensator increments between consecutive target events (the first
// increment starts at 0). Under the true model these are Exponential(1).
[[nodiscard]] std::vector<double> compensator_increments_from_design(
    const LikelihoodDesign& design, const ModelParams& params);

// One sequence + rule set + parameters, with trigger sets and the quadrature
// design precomputed.
class IntensityContext {
public:
    IntensityContext(EventSequence sequence, RuleSet rules, ModelParams params,
                     NLLOptions options = {});

    [[nodiscard]] const EventSequence& sequence() const noexcept { return sequence_; }
    [[nodiscard]] const RuleSet& rules() const noexcept { return rules_; }
    [[nodiscard]] const ModelParams& params() const noexcept { return params_; }
    [[nodiscard]] const std::vector<TriggerSet>& triggers() const noexcept { return triggers_; }
    [[nodiscard]] const LikelihoodDesign& design() const noexcept { return design_; }
    [[nodiscard]] const NLLOptions& options() const noexcept { return options_; }

    // Pre-softplus sum at t; `left_limit` excludes contributions at exactly t.
    [[nodiscard]] double pre_activation(double t, bool left_limit = false) const;

private:
    EventSequence sequence_;
    RuleSet rules_;
    ModelParams params_;
    NLLOptions options_;
    std::vector<TriggerSet> triggers_;
    LikelihoodDesign design_;
};

// Overall intensity at t (right-continuous; strictly positive).
[[nodiscard]] double intensity_at(const IntensityContext& ctx, double t);

// Intensity with history strictly before t, as used at event instants.
[[nodiscard]] double intensity_before(const IntensityContext& ctx, double t);

// NLL over the context's own target times.
[[nodiscard]] NLLBreakdown nll(const IntensityContext& ctx);

// NLL with explicit evaluation times for the log term (they must be sorted and
// within [0, horizon]).
[[nodiscard]] NLLBreakdown nll(const IntensityContext& ctx,
                               const std::vector<double>& target_times);

[[nodiscard]] Eigen::VectorXd nll_gradient(const IntensityContext& ctx);

// Partial compensator over [from, to] computed with fresh panels; slower than
// the design path but works on arbitrary sub-intervals.
[[nodiscard]] double compensator(const IntensityContext& ctx, double from, double to);

[[nodiscard]] std::vector<double> compensator_increments(const IntensityContext& ctx);

} // namespace hrtpp
