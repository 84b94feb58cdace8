#pragma once

// Black-box ensemblers: each maps the N constituent answers at one input to a
// single (label, cert) answer, looking at nothing but those answers.

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "certens/core.hpp"

namespace certens {

/// First certified constituent wins; if none is certified the last
/// constituent's answer is returned whole (its cert is then 0).
inline CertOutput cascade(std::span<const CertOutput> outputs)
{
    if (outputs.empty()) throw DimensionError("cascade: no constituent outputs");
    for (const auto& o : outputs)
        if (o.cert) return o;
    return outputs.back();
}

/// Weighted voting.
///
/// The label is the weighted plurality regardless of certificates. The
/// answer is certified only if, for every other label j,
///     v(label, 1) > v(*, 0) + v(j, 1),
/// i.e. even if every uncertified constituent moved its whole weight to the
/// strongest rival, the certified votes for the label would still win.
inline CertOutput weighted_vote(std::span<const CertOutput> outputs, const WeightVector& w,
                                std::size_t class_count = 0)
{
    const VoteTally t = tally(outputs, w, class_count);
    const Label top = argmax_label(t);
    const double certified_top = t.at(top, true);
    const double uncertified = t.total(false);
    bool cert = true;
    for (std::uint32_t j = 0; j < t.class_count() && cert; ++j) {
        if (j == top.value) continue;
        cert = certified_top - (uncertified + t.at(Label{j}, true)) > kVoteEps;
    }
    return {top, cert};
}

inline CertOutput uniform_vote(std::span<const CertOutput> outputs, std::size_t class_count = 0)
{
    if (outputs.empty()) throw DimensionError("uniform_vote: no constituent outputs");
    return weighted_vote(outputs, WeightVector::uniform(outputs.size()), class_count);
}

// ---------------------------------------------------------------------------
// Permutation-based cascading
// ---------------------------------------------------------------------------

/// Label returned (uncertified) when no agreement condition holds.
struct FallbackPolicy {
    enum class Mode { Plurality, SeededRandom };

    Mode mode = Mode::Plurality;
    std::uint64_t seed = 0;

    static FallbackPolicy plurality() { return {}; }
    static FallbackPolicy seeded_random(std::uint64_t s) { return {Mode::SeededRandom, s}; }

    bool operator==(const FallbackPolicy&) const = default;
};

/// How the agreeing-prefix quantifier j >= (N+1)/2 is read.
///  - Literal: index bound on j, so a prefix of length j+1 >= (N+3)/2 must agree.
///  - Relaxed: prefix length >= (N+1)/2, i.e. a strict majority.
enum class PrefixBound { Literal, Relaxed };

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline void require_odd(std::size_t n, const char* who)
{
    if (n == 0 || n % 2 == 0)
        throw PreconditionError(std::string(who) + ": constituent count must be odd, got " + std::to_string(n));
}

/// Smallest admissible index j for the agreement conditions.
inline std::size_t min_agree_index(std::size_t n, PrefixBound bound)
{
    return bound == PrefixBound::Literal ? (n + 1) / 2 : (n - 1) / 2;
}

} // namespace detail

/// Number of constituents that must agree for the permutation cascade to
/// answer without falling back.
inline std::size_t required_agreement(std::size_t n, PrefixBound bound)
{
    return detail::min_agree_index(n, bound) + 1;
}

/// Fallback label. Plurality breaks ties toward the smallest label.
/// SeededRandom draws uniformly from {0..m-1} with an RNG keyed on the seed
/// and the outputs themselves, so identical answer vectors always map to the
/// same label.
inline Label fallback_label(std::span<const CertOutput> outputs, const FallbackPolicy& policy,
                            std::size_t class_count)
{
    const std::size_t m = effective_class_count(outputs, class_count);
    if (policy.mode == FallbackPolicy::Mode::SeededRandom) {
        std::uint64_t h = detail::splitmix64(policy.seed);
        for (const auto& o : outputs)
            h = detail::splitmix64(h ^ ((static_cast<std::uint64_t>(o.label.value) << 1) | (o.cert ? 1u : 0u)));
        std::mt19937_64 rng(h);
        std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(m - 1));
        return Label{pick(rng)};
    }
    std::vector<std::size_t> counts(m, 0);
    for (const auto& o : outputs) ++counts[o.label.value];
    const auto best = std::max_element(counts.begin(), counts.end());
    return Label{static_cast<std::uint32_t>(best - counts.begin())};
}

/// Permutation-based cascade, closed form.
///
/// Over all orderings of the constituents, an agreeing prefix of length
/// `required_agreement(N, bound)` exists exactly when that many constituents
/// share the same answer. So:
///  - some (y, 1) output by enough constituents  -> (y, 1)
///  - else some label y predicted by enough      -> (y, 0)
///  - else                                        -> (fallback, 0)
/// `required_agreement` exceeds N/2, so each winner is unique when it exists.
inline CertOutput permutation_cascade(std::span<const CertOutput> outputs,
                                      const FallbackPolicy& fallback = {},
                                      PrefixBound bound = PrefixBound::Literal,
                                      std::size_t class_count = 0)
{
    detail::require_odd(outputs.size(), "permutation_cascade");
    const std::size_t need = required_agreement(outputs.size(), bound);
    const std::size_t m = effective_class_count(outputs, class_count);

    std::vector<std::size_t> certified(m, 0), predicted(m, 0);
    for (const auto& o : outputs) {
        ++predicted[o.label.value];
        if (o.cert) ++certified[o.label.value];
    }

    std::size_t c1_winners = 0;
    std::uint32_t c1_label = 0;
    for (std::uint32_t j = 0; j < m; ++j) {
        if (certified[j] >= need) return {Label{j}, true};
        if (predicted[j] >= need) {
            ++c1_winners;
            c1_label = j;
        }
    }
    if (c1_winners > 1) throw std::logic_error("permutation_cascade: more than one majority label");
    if (c1_winners == 1) return {Label{c1_label}, false};
    return {fallback_label(outputs, fallback, class_count), false};
}

inline constexpr std::size_t kMaxBruteForceConstituents = 7;

/// Permutation-based cascade evaluated by enumerating all N! orderings.
/// Test oracle for `permutation_cascade`.
inline CertOutput permutation_cascade_bruteforce(std::span<const CertOutput> outputs,
                                                 const FallbackPolicy& fallback = {},
                                                 PrefixBound bound = PrefixBound::Literal,
                                                 std::size_t class_count = 0)
{
    detail::require_odd(outputs.size(), "permutation_cascade_bruteforce");
    const std::size_t n = outputs.size();
    if (n > kMaxBruteForceConstituents)
        throw ResourceGuardError("permutation_cascade_bruteforce: N=" + std::to_string(n) + " exceeds " +
                                 std::to_string(kMaxBruteForceConstituents));
    const std::size_t jmin = detail::min_agree_index(n, bound);

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);

    std::optional<CertOutput> c2_answer;
    std::optional<Label> c1_answer;
    do {
        bool c1 = false, c2 = false;
        for (std::size_t j = jmin; j < n; ++j) {
            const CertOutput& last = outputs[perm[j]];
            bool same_label = true, same_output = true;
            for (std::size_t i = 0; i < j; ++i) {
                const CertOutput& o = outputs[perm[i]];
                same_label = same_label && o.label == last.label;
                same_output = same_output && o == last;
            }
            c1 = c1 || same_label;
            c2 = c2 || (same_output && last.cert);
        }
        const CertOutput& head = outputs[perm[0]];
        if (c2) {
            if (c2_answer && *c2_answer != head)
                throw std::logic_error("permutation_cascade_bruteforce: conflicting c2 permutations");
            c2_answer = head;
        }
        if (c1) {
            if (c1_answer && *c1_answer != head.label)
                throw std::logic_error("permutation_cascade_bruteforce: conflicting c1 permutations");
            c1_answer = head.label;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    if (c2_answer) return *c2_answer;
    if (c1_answer) return {*c1_answer, false};
    return {fallback_label(outputs, fallback, class_count), false};
}

// ---------------------------------------------------------------------------
// Ensembler selection and application over record sets
// ---------------------------------------------------------------------------

struct Cascade {
    bool operator==(const Cascade&) const = default;
};
struct UniformVoting {
    bool operator==(const UniformVoting&) const = default;
};
struct WeightedVoting {
    WeightVector weights;
    bool operator==(const WeightedVoting&) const = default;
};
struct PermutationCascade {
    FallbackPolicy fallback;
    PrefixBound bound = PrefixBound::Literal;
    bool operator==(const PermutationCascade&) const = default;
};

using EnsemblerKind = std::variant<Cascade, UniformVoting, WeightedVoting, PermutationCascade>;

inline std::string ensembler_name(const EnsemblerKind& kind)
{
    struct Namer {
        std::string operator()(const Cascade&) const { return "cascade"; }
        std::string operator()(const UniformVoting&) const { return "uniform"; }
        std::string operator()(const WeightedVoting&) const { return "weighted"; }
        std::string operator()(const PermutationCascade&) const { return "permutation"; }
    };
    return std::visit(Namer{}, kind);
}

/// Throws PreconditionError if `kind` cannot combine `n` constituents.
inline void check_arity(const EnsemblerKind& kind, std::size_t n)
{
    if (n == 0) throw PreconditionError("ensembler needs at least one constituent");
    if (const auto* wv = std::get_if<WeightedVoting>(&kind); wv && wv->weights.size() != n)
        throw PreconditionError("weighted voting has " + std::to_string(wv->weights.size()) +
                                " weights for " + std::to_string(n) + " constituents");
    if (std::holds_alternative<PermutationCascade>(kind)) detail::require_odd(n, "permutation cascade");
}

/// Ensemble answer at one input.
inline CertOutput ensemble_output(const EnsemblerKind& kind, std::span<const CertOutput> outputs,
                                  std::size_t class_count = 0)
{
    struct Apply {
        std::span<const CertOutput> outputs;
        std::size_t m;
        CertOutput operator()(const Cascade&) const { return cascade(outputs); }
        CertOutput operator()(const UniformVoting&) const { return uniform_vote(outputs, m); }
        CertOutput operator()(const WeightedVoting& k) const { return weighted_vote(outputs, k.weights, m); }
        CertOutput operator()(const PermutationCascade& k) const
        {
            return permutation_cascade(outputs, k.fallback, k.bound, m);
        }
    };
    return std::visit(Apply{outputs, class_count}, kind);
}

/// Maps the ensembler over every record, preserving order.
inline std::vector<CertOutput> apply(const EnsemblerKind& kind, const RecordSet& records)
{
    std::vector<CertOutput> out;
    if (records.empty()) return out;
    check_arity(kind, records.constituents);
    out.reserve(records.size());
    for (const auto& r : records.records) {
        if (r.outputs.size() != records.constituents)
            throw DataError("record '" + r.input_id + "': " + std::to_string(r.outputs.size()) +
                            " outputs, expected " + std::to_string(records.constituents));
        try {
            out.push_back(ensemble_output(kind, r.outputs, records.class_count));
        } catch (const Error& e) {
            throw DataError("record '" + r.input_id + "': " + e.what());
        }
    }
    return out;
}

} // namespace certens
