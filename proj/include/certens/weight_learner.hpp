#pragma once

// Learning voting weights that maximize a smoothed certified-robust-accuracy
// surrogate over a record set.
//
// For a record (x, y) the vote margin is
//     margin = v(y, 1) - v(*, 0) - max_{j != y} v(j, 1),
// and the weighted-vote answer is (y, 1) exactly when margin > kVoteEps, a
// rounding allowance. The surrogate replaces the indicator with sigma_t: the
// logistic function on positive margins and a temperature-flattened logistic
// on the rest. The objective is the mean of sigma_t(margin) over the records.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "certens/core.hpp"
#include "certens/ensemblers.hpp"

namespace certens {

inline double logistic(double x)
{
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

/// sigma(x) for x > 0, sigma(x / t) otherwise.
inline double sigma_t(double x, double t)
{
    if (!(t > 0.0)) throw PreconditionError("sigma_t: temperature must be positive");
    return x > 0.0 ? logistic(x) : logistic(x / t);
}

/// d sigma_t / dx (the one-sided value x <= 0 is used at the kink).
inline double sigma_t_derivative(double x, double t)
{
    if (x > 0.0) {
        const double s = logistic(x);
        return s * (1.0 - s);
    }
    const double s = logistic(x / t);
    return s * (1.0 - s) / t;
}

namespace detail {

struct MarginTerms {
    double value = 0.0;
    /// Label attaining the rival max (smallest such label).
    std::uint32_t rival = 0;
};

inline MarginTerms margin_terms(const VoteTally& t, Label y)
{
    MarginTerms m;
    double rival_votes = -std::numeric_limits<double>::infinity();
    for (std::uint32_t j = 0; j < t.class_count(); ++j) {
        if (j == y.value) continue;
        const double v = t.at(Label{j}, true);
        if (v > rival_votes) {
            rival_votes = v;
            m.rival = j;
        }
    }
    // Grouped like the vote's certificate test so that value > kVoteEps
    // holds exactly when weighted voting certifies y, rounding included.
    m.value = t.at(y, true) - (t.total(false) + rival_votes);
    return m;
}

} // namespace detail

/// Vote margin of `outputs` for label `y`. Lies in [-1, 1] for normalized
/// weights; positive exactly when weighted voting answers (y, 1).
inline double margin(std::span<const CertOutput> outputs, const WeightVector& w, Label y,
                     std::size_t class_count = 0)
{
    if (class_count != 0 && y.value >= class_count)
        throw PreconditionError("margin: label out of range");
    VoteTally t = tally(outputs, w, std::max<std::size_t>(class_count, y.value + 1));
    return detail::margin_terms(t, y).value;
}

namespace detail {

inline void require_records(const RecordSet& rs, std::size_t n_weights, const char* who)
{
    if (rs.empty()) throw PreconditionError(std::string(who) + ": record set is empty");
    if (rs.constituents != n_weights)
        throw DimensionError(std::string(who) + ": " + std::to_string(n_weights) + " weights for " +
                             std::to_string(rs.constituents) + " constituents");
}

} // namespace detail

/// Mean of sigma_t over per-record margins.
inline double objective(const RecordSet& rs, const WeightVector& w, double t)
{
    detail::require_records(rs, w.size(), "objective");
    double sum = 0.0;
    for (const auto& r : rs.records) sum += sigma_t(margin(r.outputs, w, r.true_label, rs.class_count), t);
    return sum / static_cast<double>(rs.size());
}

/// Fraction of records with a positive margin: the certified robust
/// accuracy of weighted voting with weights `w`.
inline double exact_objective(const RecordSet& rs, const WeightVector& w)
{
    detail::require_records(rs, w.size(), "exact_objective");
    std::size_t hits = 0;
    for (const auto& r : rs.records)
        if (margin(r.outputs, w, r.true_label, rs.class_count) > kVoteEps) ++hits;
    return static_cast<double>(hits) / static_cast<double>(rs.size());
}

/// Gradient of `objective` with respect to the weights themselves. The max
/// in the margin contributes the subgradient of its smallest attaining label.
inline std::vector<double> objective_gradient(const RecordSet& rs, std::span<const double> w, double t)
{
    detail::require_records(rs, w.size(), "objective_gradient");
    const std::size_t n = w.size();
    std::vector<double> grad(n, 0.0);
    for (const auto& r : rs.records) {
        VoteTally tl(std::max<std::size_t>(rs.class_count, r.true_label.value + 1));
        for (std::size_t i = 0; i < n; ++i) tl.add(r.outputs[i], w[i]);
        const auto terms = detail::margin_terms(tl, r.true_label);
        const double ds = sigma_t_derivative(terms.value, t);
        if (ds == 0.0) continue;
        for (std::size_t i = 0; i < n; ++i) {
            const CertOutput& o = r.outputs[i];
            double d = 0.0;
            if (!o.cert)
                d = -1.0;
            else if (o.label == r.true_label)
                d = 1.0;
            else if (o.label.value == terms.rival)
                d = -1.0;
            grad[i] += ds * d;
        }
    }
    for (double& g : grad) g /= static_cast<double>(rs.size());
    return grad;
}

inline std::vector<double> softmax(std::span<const double> theta)
{
    std::vector<double> w(theta.begin(), theta.end());
    if (w.empty()) return w;
    const double mx = *std::max_element(w.begin(), w.end());
    double sum = 0.0;
    for (double& x : w) {
        x = std::exp(x - mx);
        sum += x;
    }
    for (double& x : w) x /= sum;
    return w;
}

/// Surrogate objective as a function of softmax logits.
inline double objective_theta(const RecordSet& rs, std::span<const double> theta, double t)
{
    auto w = softmax(theta);
    return objective(rs, WeightVector::normalized(std::move(w)), t);
}

/// Gradient of `objective_theta`: chain rule through the softmax Jacobian,
/// dJ/dtheta_k = w_k * (g_k - sum_i w_i g_i).
inline std::vector<double> objective_gradient_theta(const RecordSet& rs, std::span<const double> theta, double t)
{
    const auto w = softmax(theta);
    const auto g = objective_gradient(rs, w, t);
    double mean = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) mean += w[i] * g[i];
    std::vector<double> out(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) out[k] = w[k] * g[k] - w[k] * mean;
    return out;
}

/// Euclidean projection onto the probability simplex (sort-and-threshold).
inline std::vector<double> project_to_simplex(std::span<const double> v)
{
    const std::size_t n = v.size();
    if (n == 0) return {};
    std::vector<double> u(v.begin(), v.end());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0, tau = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        cumsum += u[k];
        const double candidate = (cumsum - 1.0) / static_cast<double>(k + 1);
        if (u[k] - candidate > 0.0) tau = candidate;
    }
    std::vector<double> w(n);
    for (std::size_t i = 0; i < n; ++i) w[i] = std::max(v[i] - tau, 0.0);
    return w;
}

enum class Parameterization { SoftmaxReparam, ProjectedAscent };
enum class Optimizer { Adam, Plain };

struct LearnerConfig {
    double temperature = 1e5;
    double learning_rate = 1e-2;
    std::size_t epochs = 500;
    std::uint64_t seed = 0;
    Parameterization parameterization = Parameterization::SoftmaxReparam;
    Optimizer optimizer = Optimizer::Adam;
    /// Stop once the best objective has improved by less than this over the
    /// last `patience` epochs.
    double convergence_tol = 1e-7;
    std::size_t patience = 50;
    /// Standard deviation of the random logit perturbation at start; 0 keeps
    /// the uniform starting point.
    double init_jitter = 0.0;

    void validate() const
    {
        if (!(temperature > 0.0)) throw PreconditionError("temperature must be positive");
        if (!(learning_rate > 0.0)) throw PreconditionError("learning rate must be positive");
        if (epochs < 1) throw PreconditionError("epochs must be at least 1");
        if (convergence_tol < 0.0) throw PreconditionError("convergence tolerance must be nonnegative");
        if (init_jitter < 0.0) throw PreconditionError("init jitter must be nonnegative");
    }
};

struct LearnerTrace {
    /// Surrogate objective at the iterate of each epoch (index 0 = start).
    std::vector<double> objectives;
    /// Best-so-far surrogate objective per epoch.
    std::vector<double> best_objectives;
    /// Best-objective iterate found by gradient ascent.
    WeightVector learned;
    double learned_objective = 0.0;
    double learned_exact = 0.0;
    /// Weights after comparing `learned` against every one-hot vector under
    /// the exact objective.
    WeightVector selected;
    double selected_exact = 0.0;
    /// -1 when the learned weights were kept, otherwise the one-hot index.
    int selected_one_hot = -1;
    std::size_t epochs_run = 0;
};

namespace detail {

struct AdamState {
    std::vector<double> m, v;
    std::size_t step = 0;

    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}

    /// Ascent direction for gradient g.
    std::vector<double> direction(const std::vector<double>& g)
    {
        constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        ++step;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
        std::vector<double> d(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            d[i] = (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
        }
        return d;
    }
};

} // namespace detail

struct SafetyNetChoice {
    WeightVector weights;
    double exact = 0.0;
    /// -1 when the candidate was kept, otherwise the winning one-hot index.
    int one_hot = -1;
};

/// Compares `candidate` against every one-hot weight vector under the exact
/// objective and keeps the best (the candidate wins ties). Weighted voting
/// with a one-hot vector reproduces that constituent, so the result is never
/// worse than the best single constituent on `rs`.
inline SafetyNetChoice safety_net(const RecordSet& rs, const WeightVector& candidate)
{
    SafetyNetChoice best{candidate, exact_objective(rs, candidate), -1};
    for (std::size_t i = 0; i < candidate.size(); ++i) {
        WeightVector hot = WeightVector::one_hot(candidate.size(), i);
        const double e = exact_objective(rs, hot);
        if (e > best.exact) best = {std::move(hot), e, static_cast<int>(i)};
    }
    return best;
}

struct LearnResult {
    /// Best-objective iterate of gradient ascent (before the safety net).
    WeightVector weights;
    LearnerTrace trace;
};

/// Gradient ascent on the surrogate objective. The returned weights are the
/// best-objective iterate, not necessarily the last one; the trace also
/// records the safety-net selection.
inline LearnResult learn(const RecordSet& rs, const LearnerConfig& cfg = {})
{
    cfg.validate();
    if (rs.empty()) throw PreconditionError("learn: record set is empty");
    const std::size_t n = rs.constituents;
    if (n == 0) throw PreconditionError("learn: no constituents");

    LearnerTrace trace;
    const double t = cfg.temperature;
    const bool use_softmax = cfg.parameterization == Parameterization::SoftmaxReparam;

    std::vector<double> params;
    if (use_softmax) {
        params.assign(n, 0.0);
        if (cfg.init_jitter > 0.0) {
            std::mt19937_64 rng(cfg.seed);
            std::normal_distribution<double> noise(0.0, cfg.init_jitter);
            for (double& p : params) p = noise(rng);
        }
    } else {
        params.assign(n, 1.0 / static_cast<double>(n));
        if (cfg.init_jitter > 0.0) {
            std::mt19937_64 rng(cfg.seed);
            std::normal_distribution<double> noise(0.0, cfg.init_jitter);
            for (double& p : params) p += noise(rng);
            params = project_to_simplex(params);
        }
    }
    auto weights_of = [&](const std::vector<double>& p) {
        return WeightVector::normalized(use_softmax ? softmax(p) : p);
    };

    WeightVector current = weights_of(params);
    double current_obj = objective(rs, current, t);
    WeightVector best = current;
    double best_obj = current_obj;
    trace.objectives.push_back(current_obj);
    trace.best_objectives.push_back(best_obj);

    detail::AdamState adam(n);
    std::size_t epoch = 0;
    for (; epoch < cfg.epochs; ++epoch) {
        std::vector<double> g = use_softmax ? objective_gradient_theta(rs, params, t)
                                            : objective_gradient(rs, current.values(), t);
        if (cfg.optimizer == Optimizer::Adam) g = adam.direction(g);
        for (std::size_t i = 0; i < n; ++i) params[i] += cfg.learning_rate * g[i];
        if (!use_softmax) params = project_to_simplex(params);

        current = weights_of(params);
        current_obj = objective(rs, current, t);
        if (current_obj > best_obj) {
            best_obj = current_obj;
            best = current;
        }
        trace.objectives.push_back(current_obj);
        trace.best_objectives.push_back(best_obj);

        const auto& hist = trace.best_objectives;
        if (hist.size() > cfg.patience && hist.back() - hist[hist.size() - 1 - cfg.patience] < cfg.convergence_tol) {
            ++epoch;
            break;
        }
    }
    trace.epochs_run = epoch;
    trace.learned = best;
    trace.learned_objective = best_obj;
    trace.learned_exact = exact_objective(rs, best);

    const SafetyNetChoice choice = safety_net(rs, best);
    trace.selected = choice.weights;
    trace.selected_exact = choice.exact;
    trace.selected_one_hot = choice.one_hot;
    return {best, std::move(trace)};
}

} // namespace certens
