#pragma once

// Domain types for the outputs of certifiable classifiers and the weighted
// vote tally shared by every ensembler.
//
// A certifiable classifier answers a query at one input with a pair
// (label, cert): the predicted class and whether its certifier proved the
// prediction locally robust. Everything in this library operates on those
// pairs alone; no logits or model internals are ever consulted.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "certens/errors.hpp"

namespace certens {

/// Class index in {0, ..., m-1}.
struct Label {
    std::uint32_t value = 0;

    constexpr Label() = default;
    constexpr explicit Label(std::uint32_t v) : value(v) {}

    constexpr auto operator<=>(const Label&) const = default;
};

/// One constituent's answer at one input.
struct CertOutput {
    Label label;
    bool cert = false;

    constexpr auto operator<=>(const CertOutput&) const = default;
};

enum class Norm { L2, Linf };

inline std::string to_string(Norm n) { return n == Norm::L2 ? "l2" : "linf"; }

inline std::optional<Norm> parse_norm(std::string s)
{
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "l2") return Norm::L2;
    if (s == "linf" || s == "l_inf" || s == "inf") return Norm::Linf;
    return std::nullopt;
}

/// One input: its identity, true label and the N constituent answers.
struct PredictionRecord {
    std::string input_id;
    Label true_label;
    std::vector<CertOutput> outputs;

    bool operator==(const PredictionRecord&) const = default;
};

/// A dataset of prediction records with its dataset-wide metadata.
///
/// `class_count` is carried explicitly so classes that never appear in the
/// records still take part in argmax ties and certificate conditions.
/// `epsilon` and `norm` are metadata only; no ensembler reads them.
struct RecordSet {
    std::vector<PredictionRecord> records;
    std::size_t class_count = 2;
    std::size_t constituents = 0;
    double epsilon = 0.0;
    Norm norm = Norm::Linf;
    std::vector<std::string> model_names;

    std::size_t size() const noexcept { return records.size(); }
    bool empty() const noexcept { return records.empty(); }

    bool operator==(const RecordSet&) const = default;

    /// Throws DataError naming the first offending record.
    void validate() const
    {
        if (class_count < 2) throw DataError("class count must be at least 2");
        if (constituents == 0) throw DataError("constituent count must be at least 1");
        if (!model_names.empty() && model_names.size() != constituents)
            throw DataError("model_names has " + std::to_string(model_names.size()) +
                            " entries, expected " + std::to_string(constituents));
        for (const auto& r : records) {
            if (r.outputs.size() != constituents)
                throw DataError("record '" + r.input_id + "' has " + std::to_string(r.outputs.size()) +
                                " outputs, expected " + std::to_string(constituents));
            if (r.true_label.value >= class_count)
                throw DataError("record '" + r.input_id + "' true_label out of range");
            for (const auto& o : r.outputs)
                if (o.label.value >= class_count)
                    throw DataError("record '" + r.input_id + "' output label out of range");
        }
    }
};

inline constexpr double kWeightSumTolerance = 1e-9;

/// How far certified votes must exceed the rival side before a vote is
/// certified. Normalized weights are rounded, so an exact tie such as
/// 2/12 + 4/12 against 3/12 + 1/12 + 2/12 can come out a few ulps ahead and
/// would otherwise be certified. Ties are never certified; genuine margins
/// below this are treated as ties too.
inline constexpr double kVoteEps = 1e-12;

/// Nonnegative constituent weights summing to one.
class WeightVector {
public:
    WeightVector() = default;

    /// Normalizes any nonnegative vector with a positive sum.
    static WeightVector normalized(std::vector<double> raw)
    {
        if (raw.empty()) throw PreconditionError("weight vector must be non-empty");
        double sum = 0.0;
        for (double x : raw) {
            if (!std::isfinite(x) || x < 0.0)
                throw PreconditionError("weights must be finite and nonnegative");
            sum += x;
        }
        if (!(sum > 0.0)) throw PreconditionError("weights must have a positive sum");
        for (double& x : raw) x /= sum;
        return WeightVector(std::move(raw));
    }

    /// Accepts an already-normalized vector, checking the simplex invariant.
    static WeightVector from_normalized(std::vector<double> w)
    {
        if (w.empty()) throw PreconditionError("weight vector must be non-empty");
        double sum = 0.0;
        for (double x : w) {
            if (!std::isfinite(x) || x < 0.0 || x > 1.0)
                throw PreconditionError("weights must lie in [0, 1]");
            sum += x;
        }
        if (std::abs(sum - 1.0) > kWeightSumTolerance)
            throw PreconditionError("weights must sum to 1");
        return WeightVector(std::move(w));
    }

    static WeightVector uniform(std::size_t n)
    {
        if (n == 0) throw PreconditionError("weight vector must be non-empty");
        return WeightVector(std::vector<double>(n, 1.0 / static_cast<double>(n)));
    }

    static WeightVector one_hot(std::size_t n, std::size_t i)
    {
        if (i >= n) throw PreconditionError("one-hot index out of range");
        std::vector<double> w(n, 0.0);
        w[i] = 1.0;
        return WeightVector(std::move(w));
    }

    std::size_t size() const noexcept { return w_.size(); }
    double operator[](std::size_t i) const { return w_[i]; }
    std::span<const double> values() const noexcept { return w_; }

    bool operator==(const WeightVector&) const = default;

private:
    explicit WeightVector(std::vector<double> w) : w_(std::move(w)) {}

    std::vector<double> w_;
};

/// Total weight per (label, cert) pair at one input.
///
/// Stored densely per label; labels absent from the outputs read as zero.
class VoteTally {
public:
    VoteTally() = default;
    explicit VoteTally(std::size_t class_count)
        : certified_(class_count, 0.0), uncertified_(class_count, 0.0) {}

    std::size_t class_count() const noexcept { return certified_.size(); }

    /// v(j, c)
    double at(Label j, bool cert) const
    {
        if (j.value >= class_count()) return 0.0;
        return cert ? certified_[j.value] : uncertified_[j.value];
    }

    /// v(j) = v(j, 0) + v(j, 1)
    double votes(Label j) const { return at(j, false) + at(j, true); }

    /// v(*, c)
    double total(bool cert) const
    {
        double s = 0.0;
        for (double x : cert ? certified_ : uncertified_) s += x;
        return s;
    }

    double grand_total() const { return total(false) + total(true); }

    void add(CertOutput o, double weight)
    {
        if (o.label.value >= class_count()) {
            certified_.resize(o.label.value + 1, 0.0);
            uncertified_.resize(o.label.value + 1, 0.0);
        }
        (o.cert ? certified_ : uncertified_)[o.label.value] += weight;
    }

private:
    std::vector<double> certified_;
    std::vector<double> uncertified_;
};

/// Number of classes a tally over `outputs` must cover: the declared count,
/// widened to include every observed label, and never below 2.
inline std::size_t effective_class_count(std::span<const CertOutput> outputs, std::size_t class_count)
{
    std::size_t m = std::max<std::size_t>(class_count, 2);
    for (const auto& o : outputs) m = std::max<std::size_t>(m, o.label.value + 1);
    return m;
}

/// Weighted vote tally v(j, c) = sum_i w_i * [outputs[i] == (j, c)].
inline VoteTally tally(std::span<const CertOutput> outputs, const WeightVector& w, std::size_t class_count = 0)
{
    if (outputs.size() != w.size())
        throw DimensionError("tally: " + std::to_string(outputs.size()) + " outputs but " +
                             std::to_string(w.size()) + " weights");
    VoteTally t(effective_class_count(outputs, class_count));
    for (std::size_t i = 0; i < outputs.size(); ++i) t.add(outputs[i], w[i]);
    return t;
}

/// Label with the most votes regardless of certificate; ties go to the
/// smallest label.
inline Label argmax_label(const VoteTally& t)
{
    std::uint32_t best = 0;
    double best_votes = t.class_count() > 0 ? t.votes(Label{0}) : 0.0;
    for (std::uint32_t j = 1; j < t.class_count(); ++j) {
        double v = t.votes(Label{j});
        if (v > best_votes) {
            best = j;
            best_votes = v;
        }
    }
    return Label{best};
}

} // namespace certens
