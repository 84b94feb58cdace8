#pragma once

// Two-dimensional toy lab.
//
// Constituents are linear classifiers whose certificates come from the exact
// distance to the nearest decision boundary, optionally shrunk by a
// completeness factor rho <= 1. Shrinking only ever drops certificates, so
// every constituent is sound by construction. Evaluating such constituents on
// a grid and scanning epsilon-neighbourhoods for label changes refutes the
// soundness of an ensembler whenever a violation turns up.
//
// The scan is a refuter, not a verifier: an empty result only says no
// violation exists between grid points.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "certens/core.hpp"
#include "certens/ensemblers.hpp"

namespace certens {

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Point2&) const = default;
};

inline double distance(Point2 a, Point2 b, Norm norm)
{
    const double dx = std::abs(a.x - b.x), dy = std::abs(a.y - b.y);
    return norm == Norm::L2 ? std::hypot(dx, dy) : std::max(dx, dy);
}

/// Norm dual to `norm` (L2 -> L2, Linf -> L1) of a 2D vector.
inline double dual_norm(std::array<double, 2> v, Norm norm)
{
    return norm == Norm::L2 ? std::hypot(v[0], v[1]) : std::abs(v[0]) + std::abs(v[1]);
}

/// Half-plane {p : normal . p + offset >= 0} on which a different
/// completeness factor applies.
struct RhoRegion {
    std::array<double, 2> normal{1.0, 0.0};
    double offset = 0.0;
    double rho = 1.0;

    bool contains(Point2 p) const { return normal[0] * p.x + normal[1] * p.y + offset >= 0.0; }
};

/// Multiclass linear classifier with an exact margin certifier.
struct LinearClassifier {
    std::vector<std::array<double, 2>> weights;
    std::vector<double> biases;
    Norm norm = Norm::L2;
    double rho = 1.0;
    std::optional<RhoRegion> region;

    std::size_t class_count() const noexcept { return weights.size(); }

    double rho_at(Point2 p) const { return region && region->contains(p) ? region->rho : rho; }

    void validate() const
    {
        if (weights.size() < 2) throw PreconditionError("linear classifier needs at least 2 classes");
        if (biases.size() != weights.size()) throw DimensionError("linear classifier: bias count mismatch");
        auto ok = [](double r) { return r > 0.0 && r <= 1.0; };
        if (!ok(rho) || (region && !ok(region->rho)))
            throw PreconditionError("completeness factor must lie in (0, 1]");
    }

    std::vector<double> logits(Point2 p) const
    {
        std::vector<double> z(weights.size());
        for (std::size_t k = 0; k < z.size(); ++k) z[k] = weights[k][0] * p.x + weights[k][1] * p.y + biases[k];
        return z;
    }

    Label predict(Point2 p) const
    {
        const auto z = logits(p);
        return Label{static_cast<std::uint32_t>(std::max_element(z.begin(), z.end()) - z.begin())};
    }

    /// Exact distance (under `norm`) from p to the region where the
    /// predicted label changes.
    double exact_radius(Point2 p) const
    {
        const auto z = logits(p);
        const std::size_t top = static_cast<std::size_t>(std::max_element(z.begin(), z.end()) - z.begin());
        double r = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < z.size(); ++k) {
            if (k == top) continue;
            const std::array<double, 2> diff{weights[top][0] - weights[k][0], weights[top][1] - weights[k][1]};
            const double dn = dual_norm(diff, norm);
            // parallel rows never cross
            if (dn == 0.0) continue;
            r = std::min(r, (z[top] - z[k]) / dn);
        }
        return r;
    }
};

/// Label by argmax (smallest index on ties); certified iff rho(x) * r > eps
/// where r is the exact robustness radius.
inline CertOutput certify_linear(const LinearClassifier& c, Point2 x, double epsilon)
{
    const Label label = c.predict(x);
    const double r = c.exact_radius(x);
    return {label, c.rho_at(x) * r > epsilon};
}

// ---------------------------------------------------------------------------
// Scenarios
// ---------------------------------------------------------------------------

struct ToyScenario {
    std::string name;
    std::vector<LinearClassifier> constituents;
    LinearClassifier truth;
    std::size_t class_count = 2;
    /// Point pair (x, x') at which the cascade answers (y, 1) and (y', 1)
    /// with y != y' although the points are epsilon-close.
    std::optional<std::pair<Point2, Point2>> witness;
};

namespace detail {

/// Three-class classifier whose regions are 120-degree sectors around
/// `center`, rotated by `rotation_deg`. Class 0 points up.
inline LinearClassifier sector_classifier(double rotation_deg, Point2 center, Norm norm)
{
    LinearClassifier c;
    c.norm = norm;
    for (int k = 0; k < 3; ++k) {
        const double a = (90.0 + rotation_deg + 120.0 * k) * std::numbers::pi / 180.0;
        const std::array<double, 2> w{std::cos(a), std::sin(a)};
        c.weights.push_back(w);
        c.biases.push_back(-(w[0] * center.x + w[1] * center.y));
    }
    return c;
}

/// Binary classifier split at x = at; `left_label` is predicted for x < at.
inline LinearClassifier vertical_split(double at, std::uint32_t left_label, Norm norm)
{
    LinearClassifier c;
    c.norm = norm;
    const double s = left_label == 0 ? -1.0 : 1.0;
    c.weights = {{s, 0.0}, {-s, 0.0}};
    c.biases = {-s * at, s * at};
    return c;
}

inline LinearClassifier random_linear(std::mt19937_64& rng, std::size_t classes, Norm norm)
{
    std::normal_distribution<double> wdist(0.0, 1.0), bdist(0.0, 0.4);
    LinearClassifier c;
    c.norm = norm;
    for (std::size_t k = 0; k < classes; ++k) {
        c.weights.push_back({wdist(rng), wdist(rng)});
        c.biases.push_back(bdist(rng));
    }
    return c;
}

} // namespace detail

/// Random scenario: 2-5 random linear constituents over 2-4 classes, each
/// with a random global completeness factor and, half of the time, a random
/// half-plane with its own factor.
inline ToyScenario random_scenario(std::uint64_t seed, Norm norm = Norm::L2)
{
    std::mt19937_64 rng(detail::splitmix64(seed));
    std::uniform_int_distribution<std::size_t> n_dist(2, 5), m_dist(2, 4);
    std::uniform_real_distribution<double> rho_dist(0.3, 1.0), angle(0.0, 2.0 * std::numbers::pi),
        offset(-0.5, 0.5), coin(0.0, 1.0);
    ToyScenario s;
    s.name = "random";
    const std::size_t n = n_dist(rng);
    s.class_count = m_dist(rng);
    s.truth = detail::random_linear(rng, s.class_count, norm);
    for (std::size_t i = 0; i < n; ++i) {
        LinearClassifier c = detail::random_linear(rng, s.class_count, norm);
        c.rho = rho_dist(rng);
        if (coin(rng) < 0.5) {
            const double a = angle(rng);
            c.region = RhoRegion{{std::cos(a), std::sin(a)}, offset(rng), rho_dist(rng)};
        }
        s.constituents.push_back(std::move(c));
    }
    return s;
}

/// Named scenarios:
///  - "fig1": three perturbed three-sector classifiers with regionally
///    weakened certifiers; the cascade over them is unsound on the grid.
///  - "agree": three identical constituents.
///  - "thm1-minimal": two binary constituents realizing the cascade
///    counterexample at the pair (0.05, 0), (0.12, 0) for epsilon = 0.08.
///  - "random": `random_scenario(seed)`.
/// Only "random" depends on the seed.
inline ToyScenario gen_toy(const std::string& tag, std::uint64_t seed = 0, Norm norm = Norm::L2)
{
    ToyScenario s;
    s.name = tag;
    if (tag == "fig1") {
        s.class_count = 3;
        s.truth = detail::sector_classifier(0.0, {0.0, 0.0}, norm);
        LinearClassifier c0 = detail::sector_classifier(0.0, {0.051, 0.037}, norm);
        c0.region = RhoRegion{{-1.0, 0.0}, -0.013, 0.5};
        LinearClassifier c1 = detail::sector_classifier(13.0, {-0.043, 0.021}, norm);
        c1.rho = 0.85;
        LinearClassifier c2 = detail::sector_classifier(-11.0, {0.023, -0.067}, norm);
        c2.region = RhoRegion{{0.0, 1.0}, -0.31, 0.6};
        s.constituents = {c0, c1, c2};
    } else if (tag == "agree") {
        s.class_count = 3;
        s.truth = detail::sector_classifier(0.0, {0.0, 0.0}, norm);
        const LinearClassifier c = detail::sector_classifier(7.0, {0.031, -0.017}, norm);
        s.constituents = {c, c, c};
    } else if (tag == "thm1-minimal") {
        s.class_count = 2;
        s.truth = detail::vertical_split(0.093, 1, norm);
        // constituent 0 predicts 0 right of 0.003; constituent 1 predicts 1
        // left of 0.183
        s.constituents = {detail::vertical_split(0.003, 1, norm), detail::vertical_split(0.183, 1, norm)};
        s.witness = std::make_pair(Point2{0.05, 0.0}, Point2{0.12, 0.0});
    } else if (tag == "random") {
        return random_scenario(seed, norm);
    } else {
        throw PreconditionError("unknown toy scenario '" + tag + "'");
    }
    return s;
}

// ---------------------------------------------------------------------------
// Grids
// ---------------------------------------------------------------------------

struct GridSpec {
    double xmin = -1.0, xmax = 1.0, ymin = -1.0, ymax = 1.0;
    double h = 0.01;
};

/// Points of a 2D region with each constituent's answer at every point.
/// Points are stored row by row, x varying fastest.
struct ToyGrid {
    double xmin = 0.0, xmax = 0.0, ymin = 0.0, ymax = 0.0;
    double h = 0.0;
    std::size_t nx = 0, ny = 0;
    std::size_t class_count = 2;
    std::size_t constituents = 0;
    double epsilon = 0.0;
    Norm norm = Norm::L2;
    std::vector<Point2> points;
    std::vector<Label> truth;
    /// outputs[p][i]: constituent i at point p.
    std::vector<std::vector<CertOutput>> outputs;

    std::size_t size() const noexcept { return points.size(); }
};

inline ToyGrid build_grid(const ToyScenario& s, const GridSpec& spec, double epsilon)
{
    if (!(spec.h > 0.0)) throw PreconditionError("grid step must be positive");
    if (!(spec.xmax >= spec.xmin && spec.ymax >= spec.ymin)) throw PreconditionError("empty bounding box");
    if (!(epsilon >= 0.0)) throw PreconditionError("epsilon must be nonnegative");
    for (const auto& c : s.constituents) c.validate();

    ToyGrid g;
    g.xmin = spec.xmin;
    g.xmax = spec.xmax;
    g.ymin = spec.ymin;
    g.ymax = spec.ymax;
    g.h = spec.h;
    g.nx = static_cast<std::size_t>(std::llround((spec.xmax - spec.xmin) / spec.h)) + 1;
    g.ny = static_cast<std::size_t>(std::llround((spec.ymax - spec.ymin) / spec.h)) + 1;
    g.class_count = s.class_count;
    g.constituents = s.constituents.size();
    g.epsilon = epsilon;
    g.norm = s.constituents.empty() ? Norm::L2 : s.constituents.front().norm;
    g.points.reserve(g.nx * g.ny);
    for (std::size_t j = 0; j < g.ny; ++j)
        for (std::size_t i = 0; i < g.nx; ++i)
            g.points.push_back({spec.xmin + static_cast<double>(i) * spec.h, spec.ymin + static_cast<double>(j) * spec.h});
    g.truth.reserve(g.points.size());
    g.outputs.reserve(g.points.size());
    for (const Point2& p : g.points) {
        g.truth.push_back(s.truth.predict(p));
        std::vector<CertOutput> row;
        row.reserve(s.constituents.size());
        for (const auto& c : s.constituents) row.push_back(certify_linear(c, p, epsilon));
        g.outputs.push_back(std::move(row));
    }
    return g;
}

/// One record per grid point, identified as "p<index>".
inline RecordSet to_records(const ToyGrid& g)
{
    RecordSet rs;
    rs.class_count = g.class_count;
    rs.constituents = g.constituents;
    rs.epsilon = g.epsilon;
    rs.norm = g.norm;
    rs.records.reserve(g.size());
    for (std::size_t p = 0; p < g.size(); ++p)
        rs.records.push_back({"p" + std::to_string(p), g.truth[p], g.outputs[p]});
    return rs;
}

/// Ensemble answer at every grid point.
inline std::vector<CertOutput> ensemble_over_grid(const ToyGrid& g, const EnsemblerKind& kind)
{
    std::vector<CertOutput> out;
    if (g.size() == 0) return out;
    check_arity(kind, g.constituents);
    out.reserve(g.size());
    for (const auto& row : g.outputs) out.push_back(ensemble_output(kind, row, g.class_count));
    return out;
}

/// Answers of one constituent at every grid point.
inline std::vector<CertOutput> constituent_over_grid(const ToyGrid& g, std::size_t i)
{
    if (i >= g.constituents) throw PreconditionError("constituent index out of range");
    std::vector<CertOutput> out;
    out.reserve(g.size());
    for (const auto& row : g.outputs) out.push_back(row[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Violation search
// ---------------------------------------------------------------------------

/// A certified point p and a point q within epsilon of it whose label differs.
struct Violation {
    std::size_t p = 0, q = 0;
    Point2 p_point, q_point;
    double distance = 0.0;
    CertOutput at_p, at_q;
};

/// Every (p, q) with answers[p] certified, dist(p, q) <= epsilon and a
/// different label at q, sorted by (p, q). Requires h <= epsilon / 4.
inline std::vector<Violation> find_violations(const ToyGrid& g, std::span<const CertOutput> answers,
                                              double epsilon, Norm norm)
{
    if (answers.size() != g.size()) throw DimensionError("find_violations: one answer per grid point required");
    if (!(epsilon > 0.0)) throw PreconditionError("find_violations: epsilon must be positive");
    if (g.h > epsilon / 4.0 * (1.0 + 1e-12))
        throw PreconditionError("find_violations: grid step " + std::to_string(g.h) + " exceeds epsilon/4 = " +
                                std::to_string(epsilon / 4.0));
    std::vector<Violation> found;
    if (g.size() == 0) return found;

    // Buckets of side epsilon: any epsilon-neighbour (L2 or Linf) lies in
    // the 3x3 block around a point's bucket.
    double minx = g.points[0].x, miny = g.points[0].y, maxx = minx, maxy = miny;
    for (const auto& p : g.points) {
        minx = std::min(minx, p.x);
        miny = std::min(miny, p.y);
        maxx = std::max(maxx, p.x);
        maxy = std::max(maxy, p.y);
    }
    const auto bx_count = static_cast<std::size_t>((maxx - minx) / epsilon) + 1;
    const auto by_count = static_cast<std::size_t>((maxy - miny) / epsilon) + 1;
    auto bucket_of = [&](Point2 p) {
        const auto bx = std::min(static_cast<std::size_t>((p.x - minx) / epsilon), bx_count - 1);
        const auto by = std::min(static_cast<std::size_t>((p.y - miny) / epsilon), by_count - 1);
        return std::pair{bx, by};
    };
    std::vector<std::vector<std::size_t>> buckets(bx_count * by_count);
    for (std::size_t i = 0; i < g.size(); ++i) {
        const auto [bx, by] = bucket_of(g.points[i]);
        buckets[by * bx_count + bx].push_back(i);
    }

    for (std::size_t p = 0; p < g.size(); ++p) {
        if (!answers[p].cert) continue;
        const auto [bx, by] = bucket_of(g.points[p]);
        const std::size_t first = found.size();
        for (std::size_t yy = by == 0 ? 0 : by - 1; yy <= std::min(by + 1, by_count - 1); ++yy) {
            for (std::size_t xx = bx == 0 ? 0 : bx - 1; xx <= std::min(bx + 1, bx_count - 1); ++xx) {
                for (std::size_t q : buckets[yy * bx_count + xx]) {
                    if (answers[q].label == answers[p].label) continue;
                    const double d = distance(g.points[p], g.points[q], norm);
                    if (d <= epsilon) found.push_back({p, q, g.points[p], g.points[q], d, answers[p], answers[q]});
                }
            }
        }
        std::sort(found.begin() + static_cast<std::ptrdiff_t>(first), found.end(),
                  [](const Violation& a, const Violation& b) { return a.q < b.q; });
    }
    return found;
}

inline std::vector<Violation> find_violations(const ToyGrid& g, const EnsemblerKind& kind, double epsilon, Norm norm)
{
    const auto answers = ensemble_over_grid(g, kind);
    return find_violations(g, answers, epsilon, norm);
}

// ---------------------------------------------------------------------------
// Record-set fixtures
// ---------------------------------------------------------------------------

namespace detail {

/// Record set with `n` constituents over `k` records and `m` classes whose
/// true labels are i mod m. Constituent c answers (y, 1) on the records
/// where `good(c, i)` holds and `off` elsewhere.
template <class Good, class Off>
RecordSet interval_fixture(std::size_t n, std::size_t k, std::size_t m, Good good, Off off)
{
    RecordSet rs;
    rs.class_count = m;
    rs.constituents = n;
    rs.epsilon = 0.1;
    rs.norm = Norm::Linf;
    for (std::size_t i = 0; i < k; ++i) {
        PredictionRecord r;
        r.input_id = "x" + std::to_string(i);
        r.true_label = Label{static_cast<std::uint32_t>(i % m)};
        for (std::size_t c = 0; c < n; ++c)
            r.outputs.push_back(good(c, i) ? CertOutput{r.true_label, true} : off(c, r.true_label));
        rs.records.push_back(std::move(r));
    }
    return rs;
}

inline bool in_range(std::size_t i, std::size_t lo, std::size_t hi) { return i >= lo && i <= hi; }

} // namespace detail

/// What constituents answer outside their certified-correct ranges.
enum class OffRangeAnswer { WrongUncertified, WrongCertified };

inline CertOutput off_range_answer(OffRangeAnswer kind, Label y, std::size_t m)
{
    return {Label{static_cast<std::uint32_t>((y.value + 1) % m)}, kind == OffRangeAnswer::WrongCertified};
}

/// Three constituents over 100 records (10 classes), certified-correct on
/// [0,49], [25,74] and [0,24] u [50,74] respectively.
inline RecordSet build_example1_fixture(OffRangeAnswer off = OffRangeAnswer::WrongUncertified)
{
    using detail::in_range;
    return detail::interval_fixture(
        3, 100, 10,
        [](std::size_t c, std::size_t i) {
            switch (c) {
            case 0: return in_range(i, 0, 49);
            case 1: return in_range(i, 25, 74);
            default: return in_range(i, 0, 24) || in_range(i, 50, 74);
            }
        },
        [off](std::size_t, Label y) { return off_range_answer(off, y, 10); });
}

/// Constituent 0 certified-correct on 90% of 100 records; constituents 1
/// and 2 on disjoint 5% slivers of the rest.
inline RecordSet build_dominant_fixture()
{
    using detail::in_range;
    return detail::interval_fixture(
        3, 100, 10,
        [](std::size_t c, std::size_t i) {
            return c == 0 ? in_range(i, 0, 89) : c == 1 ? in_range(i, 90, 94) : in_range(i, 95, 99);
        },
        [](std::size_t, Label y) { return off_range_answer(OffRangeAnswer::WrongUncertified, y, 10); });
}

/// Near-disjoint certified-correct sets as produced by sequential cascade
/// training: [0,59], [60,79], [80,89]; nobody is certified on [90,99].
inline RecordSet build_cascade_style_fixture()
{
    using detail::in_range;
    return detail::interval_fixture(
        3, 100, 10,
        [](std::size_t c, std::size_t i) {
            return c == 0 ? in_range(i, 0, 59) : c == 1 ? in_range(i, 60, 79) : in_range(i, 80, 89);
        },
        [](std::size_t, Label y) { return off_range_answer(OffRangeAnswer::WrongUncertified, y, 10); });
}

/// Three constituents with identical answers.
inline RecordSet build_symmetric_fixture()
{
    return detail::interval_fixture(
        3, 100, 10, [](std::size_t, std::size_t i) { return i % 3 != 0; },
        [](std::size_t, Label y) { return off_range_answer(OffRangeAnswer::WrongUncertified, y, 10); });
}

} // namespace certens
