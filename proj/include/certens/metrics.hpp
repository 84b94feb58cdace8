#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "certens/core.hpp"
#include "certens/ensemblers.hpp"
#include "certens/weight_learner.hpp"

namespace certens {

namespace detail {

inline void require_predictions(std::span<const CertOutput> preds, const RecordSet& rs, const char* who)
{
    if (preds.size() != rs.size())
        throw DimensionError(std::string(who) + ": " + std::to_string(preds.size()) + " predictions for " +
                             std::to_string(rs.size()) + " records");
    if (rs.empty()) throw PreconditionError(std::string(who) + ": record set is empty");
}

} // namespace detail

/// Certified robust accuracy: fraction of records answered (true_label, 1).
inline double cra(std::span<const CertOutput> predictions, const RecordSet& rs)
{
    detail::require_predictions(predictions, rs, "cra");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < rs.size(); ++i)
        if (predictions[i].cert && predictions[i].label == rs.records[i].true_label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(rs.size());
}

/// Standard accuracy, certificates ignored.
inline double accuracy(std::span<const CertOutput> predictions, const RecordSet& rs)
{
    detail::require_predictions(predictions, rs, "accuracy");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < rs.size(); ++i)
        if (predictions[i].label == rs.records[i].true_label) ++hits;
    return static_cast<double>(hits) / static_cast<double>(rs.size());
}

/// Answers of constituent `i` across the record set.
inline std::vector<CertOutput> constituent_outputs(const RecordSet& rs, std::size_t i)
{
    if (i >= rs.constituents) throw PreconditionError("constituent index out of range");
    std::vector<CertOutput> out;
    out.reserve(rs.size());
    for (const auto& r : rs.records) out.push_back(r.outputs[i]);
    return out;
}

enum class SingleModelRule { Best, First };

struct EvalRow {
    std::string system;
    double cra = 0.0;
    double acc = 0.0;
    std::size_t support = 0;
    std::optional<WeightVector> weights;
};

struct EvalReport {
    std::vector<EvalRow> rows;
    /// Constituent chosen for the "Single Model" row.
    std::size_t single_model = 0;

    const EvalRow* find(const std::string& system) const
    {
        for (const auto& r : rows)
            if (r.system == system) return &r;
        return nullptr;
    }
};

namespace system_names {
inline const std::string kSingleModel = "Single Model";
inline const std::string kCascade = "Cascading";
inline const std::string kUniform = "Uniform Voting";
inline const std::string kWeighted = "Weighted Voting";
inline const std::string kPermutation = "Permutation Cascade";

inline std::string constituent(const RecordSet& rs, std::size_t i)
{
    return i < rs.model_names.size() ? rs.model_names[i] : "Model " + std::to_string(i);
}
} // namespace system_names

/// One row per constituent, then the single-model baseline and every
/// ensembler. Without `weights`, weighted voting uses weights learned on
/// the same records (default config) after the one-hot safety net. The
/// permutation cascade row is present only for odd constituent counts.
inline EvalReport evaluate_all(const RecordSet& rs, const std::optional<WeightVector>& weights = std::nullopt,
                               SingleModelRule single = SingleModelRule::Best)
{
    rs.validate();
    if (rs.empty()) throw PreconditionError("evaluate_all: record set is empty");
    EvalReport report;
    auto row = [&](std::string name, const std::vector<CertOutput>& preds) {
        return EvalRow{std::move(name), cra(preds, rs), accuracy(preds, rs), rs.size(), std::nullopt};
    };

    std::vector<EvalRow> constituents;
    for (std::size_t i = 0; i < rs.constituents; ++i)
        constituents.push_back(row(system_names::constituent(rs, i), constituent_outputs(rs, i)));

    if (single == SingleModelRule::Best) {
        for (std::size_t i = 1; i < constituents.size(); ++i)
            if (constituents[i].cra > constituents[report.single_model].cra) report.single_model = i;
    }
    report.rows = constituents;
    EvalRow best = constituents[report.single_model];
    best.system = system_names::kSingleModel;
    report.rows.push_back(best);

    report.rows.push_back(row(system_names::kCascade, apply(Cascade{}, rs)));
    report.rows.push_back(row(system_names::kUniform, apply(UniformVoting{}, rs)));

    const WeightVector w = weights ? *weights : learn(rs).trace.selected;
    EvalRow weighted = row(system_names::kWeighted, apply(WeightedVoting{w}, rs));
    weighted.weights = w;
    report.rows.push_back(std::move(weighted));

    if (rs.constituents % 2 == 1)
        report.rows.push_back(row(system_names::kPermutation, apply(PermutationCascade{}, rs)));
    return report;
}

struct OverlapStats {
    std::size_t constituents = 0;
    std::size_t support = 0;
    /// Number of records each constituent answers (true_label, 1).
    std::vector<std::size_t> certified_correct;
    /// Row-major N x N fractions of records where both constituents are
    /// certified-correct; the diagonal holds each constituent's own CRA.
    std::vector<double> pairwise;

    double at(std::size_t i, std::size_t j) const { return pairwise[i * constituents + j]; }
};

inline OverlapStats overlap(const RecordSet& rs)
{
    OverlapStats s;
    s.constituents = rs.constituents;
    s.support = rs.size();
    s.certified_correct.assign(rs.constituents, 0);
    s.pairwise.assign(rs.constituents * rs.constituents, 0.0);
    if (rs.empty()) return s;

    std::vector<std::size_t> both(rs.constituents * rs.constituents, 0);
    std::vector<char> good(rs.constituents);
    for (const auto& r : rs.records) {
        for (std::size_t i = 0; i < rs.constituents; ++i)
            good[i] = r.outputs[i].cert && r.outputs[i].label == r.true_label;
        for (std::size_t i = 0; i < rs.constituents; ++i) {
            if (!good[i]) continue;
            ++s.certified_correct[i];
            for (std::size_t j = 0; j < rs.constituents; ++j)
                if (good[j]) ++both[i * rs.constituents + j];
        }
    }
    for (std::size_t k = 0; k < both.size(); ++k)
        s.pairwise[k] = static_cast<double>(both[k]) / static_cast<double>(rs.size());
    return s;
}

} // namespace certens
