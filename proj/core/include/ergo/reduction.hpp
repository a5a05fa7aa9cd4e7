#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "ergo/nilseq.hpp"

namespace ergo {

/// The shift automorphism of the sequence group, alpha(p)(v) = p(v - 1),
/// raised to `power`. The shifted variable is the sequence argument: n for
/// level-0 sequences, m_r for level-r group elements.
NilSeq alpha_shift(const NilSeq& p, long power);

/// Name of the variable alpha_shift acts on.
std::string index_var(const NilSeq& p);

/// D(p)(n) = p(n + m)^{-1} p(n) with a fresh offset variable m_{r+1}.
/// The result lives one level up.
NilSeq difference(const NilSeq& p);
NilSeq difference(const NilSeq& p, const std::string& newvar);

/// <p|q>(n) = q(n + m) * D(p)(n), combined over all offsets m = m_{r+1}.
NilSeq bracket(const NilSeq& p, const NilSeq& q);
NilSeq bracket(const NilSeq& p, const NilSeq& q, const std::string& newvar);

/// The system reduction: (p_1, ..., p_k) becomes
/// (lift p_1, ..., lift p_{k-1}, <p_k|e>, <p_k|p_1>, ..., <p_k|p_{k-1}>),
/// a (2k-1)-entry system one level up.
GSystem reduce(const GSystem& sys);

/// result[i] = sys[perm[i]]; perm must be a permutation of 0..k-1.
GSystem reorder(const GSystem& sys, const std::vector<std::size_t>& perm);

struct DedupeResult {
    GSystem system;
    std::vector<std::size_t> removed; // indices dropped, ascending
};
/// Keep the first occurrence of each distinct entry, preserving order.
DedupeResult dedupe(const GSystem& sys);

/// True iff every entry is constant in the sequence variable n.
bool is_trivial(const GSystem& sys);

/// One operation of a reduction trace.
struct TraceStep {
    enum class Op { Reorder, Dedupe, Reduce };
    Op op;
    std::vector<std::size_t> perm;    // Reorder
    std::vector<std::size_t> removed; // Dedupe
    GSystem snapshot;                 // state after the operation
};

/// Replayable witness of a complexity search: the initial system plus the
/// operation list. Replaying the steps reproduces every snapshot.
struct ReductionTrace {
    GSystem initial;
    std::vector<TraceStep> steps;
    int reductions = 0;

    /// Re-applies every step from `initial` and checks each snapshot.
    bool replays() const;
};

/// dedupe followed by sorting entries by their serialization; the trace
/// steps performing it are appended to `steps` when non-trivial.
GSystem canonicalize(const GSystem& sys, std::vector<TraceStep>* steps = nullptr);

struct ComplexityOptions {
    int max_depth = 6;
    /// Free re-ordering before the very first reduction. Both conventions
    /// are supported; counting is unaffected for systems where they agree.
    bool allow_initial_reorder = true;
    /// Heuristic: drop sibling states whose entry set contains another
    /// sibling's. Off by default; may report an upper bound when on.
    bool prune_dominated = false;
};

struct ComplexityResult {
    int value = 0;
    ReductionTrace trace;
};

/// Least number of reductions (re-orderings and duplicate removals are free)
/// taking `sys` to a tuple of constants, found by iterative deepening over
/// canonical states. Returns nullopt if no trivial system is reachable
/// within max_depth reductions.
std::optional<ComplexityResult> complexity(const GSystem& sys,
                                           const ComplexityOptions& opts = {});

} // namespace ergo
