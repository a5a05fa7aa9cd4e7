#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ergo/dynamics.hpp"
#include "ergo/nilseq.hpp"

namespace ergo {

/// Entrywise coefficient reduction compatible with a finite system's action:
/// identifies group elements that induce the same coordinate process.
/// An empty map is the exact (no reduction) mode.
class CanonMap {
public:
    CanonMap() = default;
    explicit CanonMap(std::vector<Int> entry_moduli) : moduli_(std::move(entry_moduli)) {}
    static CanonMap for_system(const DynSystem& sys) { return CanonMap(sys.canon_moduli()); }

    bool trivial() const;
    NilSeq apply(const NilSeq& q) const;
    bool operator==(const CanonMap& o) const = default;
    const std::vector<Int>& moduli() const { return moduli_; }

private:
    std::vector<Int> moduli_;
};

/// Element of the semidirect product of the sequence group with the shift:
/// (p, alpha^n), with product (p, alpha^n)(p', alpha^n') = (p alpha^n(p'),
/// alpha^{n+n'}). rho(p, alpha^n) acts on group elements by q -> p alpha^n(q).
struct HElement {
    NilSeq part;
    long alpha_pow = 0;

    HElement mul(const HElement& o) const;
    NilSeq rho(const NilSeq& q) const;
};

/// Finite ordered index window W inside the sequence group: level >= 1
/// elements in normal form (after canonical reduction), with closure
/// annotations for the coordinate-permuting action.
class IndexWindow {
public:
    IndexWindow(std::vector<NilSeq> elements, CanonMap canon);

    std::size_t size() const { return elements_.size(); }
    const NilSeq& operator[](std::size_t i) const { return elements_[i]; }
    const std::vector<NilSeq>& elements() const { return elements_; }
    const CanonMap& canon() const { return canon_; }
    int dim() const { return dim_; }
    int level() const { return level_; }

    NilSeq canonical(const NilSeq& q) const { return canon_.apply(q); }
    std::optional<std::size_t> index_of(const NilSeq& q) const;

    /// Coordinate source map for S^r: (S^r y)_{W[i]} = y_{perm[i]}.
    /// nullopt when some r^{-1} W[i] falls outside the window.
    std::optional<std::vector<std::size_t>> translation_perm(const NilSeq& r) const;
    /// Coordinate source map for S^alpha: (S^alpha y)_{W[i]} = y_{perm[i]}.
    std::optional<std::vector<std::size_t>> alpha_perm() const;

    bool closed_under_translation(const NilSeq& r) const;
    bool closed_under_alpha() const;

    /// Precomputed S^r coordinate maps for every window element (present on
    /// subgroup-closed windows; derived along the closure BFS).
    bool has_perm_table() const { return !perm_table_.empty(); }
    void set_perm_table(std::vector<std::vector<std::uint32_t>> table);

private:
    std::vector<NilSeq> elements_;
    CanonMap canon_;
    std::map<std::string, std::size_t> index_;
    int dim_ = 0;
    int level_ = 1;
    std::vector<std::vector<std::uint32_t>> perm_table_;
    mutable std::optional<std::optional<std::vector<std::size_t>>> alpha_cache_;
};

struct WindowOptions {
    long n_from = 0;
    long n_to = 0;                  // bracket evaluations for n in [n_from, n_to]
    std::vector<NilSeq> extra;      // additional level-1 elements
    bool close_under_alpha = true;  // both alpha and alpha^{-1}
    bool close_under_group = true;  // translations by the system's group generators
    /// Complete to the subgroup generated by the window, so that every
    /// element's translation is closed (the marginal checks apply to all).
    bool close_to_subgroup = false;
    std::vector<NilSeq> close_under; // further left-translators (level-1 elements)
    std::size_t cap = 100000;       // closure size bound; exceeded -> ClosureError
};

/// The finite materialization of the index set: the identity, p_k, the
/// products p_k p_i^{-1}, the bracket evaluations <p_k|p_i>(n) and
/// <p_k|e>(n) over the range, plus extras, completed under the requested
/// closure operations modulo the system's canonical reduction.
IndexWindow build_window(const DynSystem& sys, const GSystem& gsys,
                         const WindowOptions& opts);

/// Exact-mode window (no canonical reduction, no closure completion).
IndexWindow build_window_exact(const GSystem& gsys, long n_from, long n_to,
                               const std::vector<NilSeq>& extra = {});

/// Finite-support coupling on X x K^W built from orbit evaluations:
/// the Cesaro average over n in [1, N] of point masses at
/// (x, (f_1(T^{q(n)^{-1}} x), ..., f_{k-1}(...), last(...))_{q in W}).
/// Exact rational weights; the X-marginal is uniform by construction.
class EmpiricalCoupling {
public:
    /// Coordinate block: |W| * k entries, row-major by window element; each
    /// entry indexes the coupling's value table (observable values repeat
    /// heavily, and index blocks permute and compare much faster).
    using Block = std::vector<std::uint16_t>;

    EmpiricalCoupling(std::shared_ptr<const IndexWindow> window, DynSystem sys,
                      GSystem gsys, std::vector<Observable> fs, Observable last,
                      long N);

    const IndexWindow& window() const { return *window_; }
    std::shared_ptr<const IndexWindow> window_ptr() const { return window_; }
    const DynSystem& system() const { return sys_; }
    const GSystem& gsystem() const { return gsys_; }
    const std::vector<Observable>& fs() const { return fs_; }
    const Observable& last() const { return last_; }
    long N() const { return N_; }
    std::size_t k() const { return fs_.size() + 1; }

    const std::vector<Block>& blocks() const { return blocks_; }
    /// Distinct coordinate values; Block entries index into this table.
    const std::vector<Rat>& values() const { return values_; }
    Rat value(std::uint16_t id) const { return values_[id]; }
    /// Atoms as ((state, block id) -> weight), sorted.
    const std::map<std::pair<std::size_t, std::size_t>, Rat>& atoms() const {
        return atoms_;
    }

    /// X-marginal per state (must equal 1/|X| for every state).
    std::vector<Rat> x_marginal() const;
    /// Y-marginal as (block content -> weight).
    std::map<Block, Rat> y_marginal() const;

    /// Copy with weights rescaled by `factor(state)` and renormalized;
    /// breaks the marginal invariants on purpose (negative controls).
    EmpiricalCoupling reweighted_by_state(const std::vector<Rat>& factor) const;

    /// Rebuild from parsed parts (used by the JSON loader).
    static EmpiricalCoupling from_parts(std::shared_ptr<const IndexWindow> window,
                                        DynSystem sys, GSystem gsys,
                                        std::vector<Observable> fs, Observable last,
                                        long N, std::vector<Rat> values,
                                        std::vector<Block> blocks,
                                        std::map<std::pair<std::size_t, std::size_t>, Rat>
                                            atoms);

private:
    struct Raw {};
    EmpiricalCoupling(Raw, std::shared_ptr<const IndexWindow> window, DynSystem sys,
                      GSystem gsys, std::vector<Observable> fs, Observable last, long N,
                      std::vector<Rat> values, std::vector<Block> blocks,
                      std::map<std::pair<std::size_t, std::size_t>, Rat> atoms);

    std::shared_ptr<const IndexWindow> window_;
    DynSystem sys_;
    GSystem gsys_;
    std::vector<Observable> fs_;
    Observable last_ = Observable::constant_one();
    long N_ = 0;
    std::vector<Rat> values_;
    std::vector<Block> blocks_;
    std::map<std::pair<std::size_t, std::size_t>, Rat> atoms_;
};

EmpiricalCoupling empirical_coupling(const DynSystem& sys, const GSystem& gsys,
                                     const std::vector<Observable>& fs,
                                     const Observable& last,
                                     std::shared_ptr<const IndexWindow> window, long N);

/// Exact invariance under the diagonal action (T^g x S^{iota(g)}).
/// Throws ClosureError when the window is not closed under iota(g)^{-1}.
bool check_diag_invariance(const EmpiricalCoupling& c, const IntMatrix& g);

/// Exact total-variation distance || (id x S^alpha)_* lambda - lambda ||
/// (L1 norm of the signed difference). Always <= 2/N; 0 at periodized N.
Rat check_alpha_invariance(const EmpiricalCoupling& c);

/// Independent prediction of the alpha-shift distance from boundary-term
/// counting: 2 |{(x): block(x, N+1) != block(x, 1)}| / (N |X|).
Rat alpha_boundary_prediction(const EmpiricalCoupling& c);

/// Exact S^r-invariance of the Y-marginal for a window element r.
bool check_marginal_S_invariance(const EmpiricalCoupling& c, const NilSeq& r);

struct PairingResult {
    Rat coupling_side;  // integral of f_k * gtilde against the coupling
    Rat dynamics_side;  // <Lambda_N(f..., f_k), Lambda_N(f..., last)>
    bool agree() const { return coupling_side == dynamics_side; }
};

PairingResult pairing(const EmpiricalCoupling& c, const Observable& f_k);

/// The conditional expectation E(gtilde | X) as an exact table on X.
std::vector<Rat> basic_function(const EmpiricalCoupling& c, const GSystem& gsys);

struct IdentityChainReport {
    Rat chain_discrepancy;  // |Lambda_M(f..., g) - E(Lambda~_M(f~..., g~)|X)|, max over X
    Rat alpha_discrepancy;  // rearranged (coordinate-at-e) form vs the same, max over X
    Rat budget;             // 2 M / N bound for the alpha substitution step
    bool alpha_exact = false; // the coupling was exactly alpha-invariant
};

/// Verifies the two-step conditional-expectation identity chain with outer
/// Cesaro length M against the coupling's empirical measure.
IdentityChainReport cond_exp_identity_check(const EmpiricalCoupling& c, long M);

/// The two coordinate indices of the rearrangement lemma, computed through
/// independent code paths. They must be equal for all (r, p, n).
struct RearrangeIndices {
    NilSeq via_shift_of_product;  // iota(r(n))^{-1} alpha^{-n}(r p^{-1})
    NilSeq via_bracket_inverse;   // (<r|p>(n))^{-1} from the per-offset definition
    bool equal() const { return via_shift_of_product == via_bracket_inverse; }
};

RearrangeIndices canon_rearrange_indices(const NilSeq& r, const NilSeq& p, long n);

/// Evaluates both sides of the rearrangement lemma on a coordinate block:
/// successive S-permutations against the direct coordinate read.
bool canon_rearrange_check(const IndexWindow& window, const NilSeq& r, const NilSeq& p,
                           long n, const EmpiricalCoupling::Block& y, std::size_t k,
                           std::size_t slot);

/// JSON dump with window serialization, atom list and exact rational weights.
/// Bit-exact round trip via coupling_from_json.
std::string coupling_to_json(const EmpiricalCoupling& c);
EmpiricalCoupling coupling_from_json(const std::string& text, const DynSystem& sys,
                                     const GSystem& gsys,
                                     const std::vector<Observable>& fs,
                                     const Observable& last);

} // namespace ergo
