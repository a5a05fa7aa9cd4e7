#include "ergo/couplings.hpp"

#include <algorithm>
#include <deque>
#include <set>

#include <json.hpp>

#include "ergo/reduction.hpp"

namespace ergo {

bool CanonMap::trivial() const {
    return std::all_of(moduli_.begin(), moduli_.end(), [](const Int& m) { return m == 0; });
}

NilSeq CanonMap::apply(const NilSeq& q) const {
    if (moduli_.empty() || trivial()) return q;
    if (moduli_.size() != static_cast<std::size_t>(q.dim()) * q.dim())
        throw StructuralError("canonical map dimension mismatch");
    return q.coeffs_mod_matrix(moduli_);
}

HElement HElement::mul(const HElement& o) const {
    return {part * alpha_shift(o.part, alpha_pow), alpha_pow + o.alpha_pow};
}

NilSeq HElement::rho(const NilSeq& q) const { return part * alpha_shift(q, alpha_pow); }

IndexWindow::IndexWindow(std::vector<NilSeq> elements, CanonMap canon)
    : canon_(std::move(canon)) {
    if (elements.empty()) throw StructuralError("index window must be nonempty");
    dim_ = elements.front().dim();
    level_ = elements.front().level();
    if (level_ < 1) throw StructuralError("window elements must have level >= 1");
    std::map<std::string, NilSeq> canonical;
    for (auto& e : elements) {
        if (e.dim() != dim_ || e.level() != level_)
            throw StructuralError("window elements must share dimension and level");
        NilSeq c = canon_.apply(e);
        canonical.emplace(c.key(), std::move(c));
    }
    for (auto& [key, e] : canonical) {
        index_.emplace(key, elements_.size());
        elements_.push_back(std::move(e));
    }
}

std::optional<std::size_t> IndexWindow::index_of(const NilSeq& q) const {
    auto it = index_.find(canon_.apply(q).key());
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

void IndexWindow::set_perm_table(std::vector<std::vector<std::uint32_t>> table) {
    if (table.size() != elements_.size())
        throw StructuralError("permutation table size mismatch");
    perm_table_ = std::move(table);
}

std::optional<std::vector<std::size_t>> IndexWindow::translation_perm(
    const NilSeq& r) const {
    if (!perm_table_.empty()) {
        auto idx = index_of(r);
        if (idx) {
            const auto& row = perm_table_[*idx];
            return std::vector<std::size_t>(row.begin(), row.end());
        }
    }
    NilSeq rinv = canon_.apply(r).inverse();
    std::vector<std::size_t> perm(elements_.size());
    for (std::size_t i = 0; i < elements_.size(); ++i) {
        auto idx = index_of(rinv * elements_[i]);
        if (!idx) return std::nullopt;
        perm[i] = *idx;
    }
    return perm;
}

std::optional<std::vector<std::size_t>> IndexWindow::alpha_perm() const {
    if (alpha_cache_) return *alpha_cache_;
    std::vector<std::size_t> perm(elements_.size());
    bool ok = true;
    for (std::size_t i = 0; i < elements_.size() && ok; ++i) {
        auto idx = index_of(alpha_shift(elements_[i], -1));
        if (!idx)
            ok = false;
        else
            perm[i] = *idx;
    }
    alpha_cache_ = ok ? std::optional<std::vector<std::size_t>>(perm) : std::nullopt;
    return *alpha_cache_;
}

bool IndexWindow::closed_under_translation(const NilSeq& r) const {
    return translation_perm(r).has_value();
}

bool IndexWindow::closed_under_alpha() const { return alpha_perm().has_value(); }

namespace {

std::vector<NilSeq> group_generators(const DynSystem& sys) {
    std::vector<NilSeq> gens;
    int d = sys.dim();
    if (sys.kind() == SystemKind::CyclicProduct) {
        for (int c = 1; c < d; ++c) {
            IntMatrix g = IntMatrix::identity(d);
            g.at(0, c) = 1;
            gens.push_back(element_from_matrix(g, 1));
        }
    } else if (sys.kind() == SystemKind::GroupTranslation) {
        for (int i = 0; i < d; ++i)
            for (int j = i + 1; j < d; ++j) {
                IntMatrix g = IntMatrix::identity(d);
                g.at(i, j) = 1;
                gens.push_back(element_from_matrix(g, 1));
            }
    }
    return gens;
}

} // namespace

namespace {

// the identity, p_k, the ratios p_k p_i^{-1}, and the bracket evaluations
// <p_k|e>(n), <p_k|p_i>(n) over [n_from, n_to], all at level 1
std::vector<NilSeq> window_base(const GSystem& gsys, long n_from, long n_to) {
    if (gsys.level() != 0) throw StructuralError("windows are built from level-0 systems");
    if (n_from > n_to) throw StructuralError("empty evaluation range");
    std::size_t k = gsys.size();
    std::vector<NilSeq> base;
    base.push_back(NilSeq::identity(gsys.dim(), 1));
    NilSeq pk = seq_as_element(gsys[k - 1]);
    for (std::size_t i = 0; i + 1 < k; ++i)
        base.push_back(pk * seq_as_element(gsys[i]).inverse());
    base.push_back(pk);
    NilSeq bracket_e = bracket(gsys[k - 1], NilSeq::identity(gsys.dim(), 0));
    std::vector<NilSeq> brackets_i;
    for (std::size_t i = 0; i + 1 < k; ++i)
        brackets_i.push_back(bracket(gsys[k - 1], gsys[i]));
    for (long n = n_from; n <= n_to; ++n) {
        base.push_back(bracket_e.substitute("n", n));
        for (const auto& b : brackets_i) base.push_back(b.substitute("n", n));
    }
    return base;
}

} // namespace

IndexWindow build_window_exact(const GSystem& gsys, long n_from, long n_to,
                               const std::vector<NilSeq>& extra) {
    std::vector<NilSeq> base = window_base(gsys, n_from, n_to);
    for (const auto& e : extra) base.push_back(e);
    return IndexWindow(std::move(base), CanonMap());
}

IndexWindow build_window(const DynSystem& sys, const GSystem& gsys,
                         const WindowOptions& opts) {
    if (gsys.dim() != sys.dim())
        throw StructuralError("system and sequence dimensions differ");

    CanonMap canon = CanonMap::for_system(sys);
    std::vector<NilSeq> base = window_base(gsys, opts.n_from, opts.n_to);
    for (const auto& e : opts.extra) base.push_back(e);
    for (const auto& r : opts.close_under) base.push_back(r);

    // translators applied as q -> canon(t^{-1} q)
    std::vector<NilSeq> translators;
    if (opts.close_under_group)
        for (const auto& g : group_generators(sys)) {
            translators.push_back(g);
            translators.push_back(g.inverse());
        }
    for (const auto& r : opts.close_under) translators.push_back(canon.apply(r));
    if (opts.close_to_subgroup) {
        // alpha has finite order modulo the canonical reduction, so the
        // alpha-orbit of the base generators is finite; the subgroup they
        // generate is alpha-invariant and closed under division by every
        // element, which is what the marginal checks want.
        long period = sys.period();
        if (period <= 0)
            throw ClosureError("subgroup closure needs a finite system");
        for (const auto& b : base)
            for (long j = 0; j < period; ++j) {
                NilSeq shifted = canon.apply(alpha_shift(b, j));
                translators.push_back(shifted);
                translators.push_back(canon.apply(shifted.inverse()));
            }
    }
    std::vector<NilSeq> tr_inv;
    for (const auto& t : translators) tr_inv.push_back(canon.apply(t.inverse()));

    bool needs_closure = opts.close_under_alpha || !translators.empty();
    if (needs_closure && canon.trivial())
        throw ClosureError(
            "closure completion needs a finite system's canonical reduction; "
            "symbolic windows over the integers cannot be closed");

    // BFS closure; each discovered element remembers how it was produced so
    // that coordinate permutations can later be composed instead of recomputed.
    struct Entry {
        NilSeq element;
        long parent = -1;     // index into the BFS order
        int translator = -1;  // -1: root or alpha move
        int alpha = 0;        // +-1 when produced by a shift
    };
    std::vector<Entry> order;
    std::map<std::string, std::size_t> seen;
    std::deque<std::size_t> work;
    auto discover = [&](NilSeq c, long parent, int translator, int alpha) {
        std::string key = c.key();
        auto [it, inserted] = seen.emplace(key, order.size());
        if (!inserted) return;
        if (order.size() >= opts.cap)
            throw ClosureError("window closure exceeded the size cap (" +
                               std::to_string(opts.cap) + ")");
        order.push_back({std::move(c), parent, translator, alpha});
        work.push_back(order.size() - 1);
    };
    for (auto& e : base) discover(canon.apply(e), -1, -1, 0);
    while (!work.empty()) {
        std::size_t cur = work.front();
        work.pop_front();
        if (opts.close_under_alpha) {
            discover(canon.apply(alpha_shift(order[cur].element, 1)),
                     static_cast<long>(cur), -1, 1);
            discover(canon.apply(alpha_shift(order[cur].element, -1)),
                     static_cast<long>(cur), -1, -1);
        }
        for (std::size_t ti = 0; ti < tr_inv.size(); ++ti)
            discover(canon.apply(tr_inv[ti] * order[cur].element),
                     static_cast<long>(cur), static_cast<int>(ti), 0);
    }

    std::vector<NilSeq> elements;
    elements.reserve(order.size());
    for (const auto& e : order) elements.push_back(e.element);
    IndexWindow window(std::move(elements), canon);

    if (opts.close_to_subgroup && window.closed_under_alpha()) {
        // pi_r[i] = idx(r^{-1} W[i]); for r = t^{-1} p this is pi_p composed
        // with left multiplication by t, and for r = alpha^{s}(p) it is
        // alpha-conjugation of pi_p. Roots are computed directly.
        std::size_t n = window.size();
        auto lookup = [&](const NilSeq& q) {
            auto idx = window.index_of(q);
            if (!idx) throw ClosureError("subgroup closure is not closed");
            return static_cast<std::uint32_t>(*idx);
        };
        std::vector<std::vector<std::uint32_t>> left(translators.size());
        for (std::size_t ti = 0; ti < translators.size(); ++ti) {
            left[ti].resize(n);
            for (std::size_t i = 0; i < n; ++i)
                left[ti][i] = lookup(translators[ti] * window[i]);
        }
        std::vector<std::uint32_t> alpha_fwd(n), alpha_inv(n);
        for (std::size_t i = 0; i < n; ++i) {
            alpha_fwd[i] = lookup(alpha_shift(window[i], 1));
            alpha_inv[i] = lookup(alpha_shift(window[i], -1));
        }

        std::vector<std::vector<std::uint32_t>> table(n);
        for (const auto& e : order) {
            std::uint32_t self = lookup(e.element);
            if (!table[self].empty()) continue;
            if (e.parent < 0) {
                NilSeq rinv = e.element.inverse();
                auto& row = table[self];
                row.resize(n);
                for (std::size_t i = 0; i < n; ++i) row[i] = lookup(rinv * window[i]);
            } else {
                std::uint32_t parent = lookup(order[static_cast<std::size_t>(e.parent)].element);
                const auto& prow = table[parent];
                if (prow.empty())
                    throw StructuralError("closure bookkeeping out of order");
                auto& row = table[self];
                row.resize(n);
                if (e.translator >= 0) {
                    // r = t^{-1} p: r^{-1} W[i] = p^{-1} (t W[i])
                    const auto& lt = left[static_cast<std::size_t>(e.translator)];
                    for (std::size_t i = 0; i < n; ++i) row[i] = prow[lt[i]];
                } else {
                    // r = alpha^{s}(p): r^{-1} W[i] = alpha^{s}(p^{-1} alpha^{-s}(W[i]))
                    const auto& pre = e.alpha > 0 ? alpha_inv : alpha_fwd;
                    const auto& post = e.alpha > 0 ? alpha_fwd : alpha_inv;
                    for (std::size_t i = 0; i < n; ++i) row[i] = post[prow[pre[i]]];
                }
            }
        }
        window.set_perm_table(std::move(table));
    }
    return window;
}

EmpiricalCoupling::EmpiricalCoupling(std::shared_ptr<const IndexWindow> window,
                                     DynSystem sys, GSystem gsys,
                                     std::vector<Observable> fs, Observable last, long N)
    : window_(std::move(window)),
      sys_(std::move(sys)),
      gsys_(std::move(gsys)),
      fs_(std::move(fs)),
      last_(std::move(last)),
      N_(N) {
    if (!sys_.finite())
        throw StructuralError("empirical couplings need a finite system");
    if (gsys_.level() != 0)
        throw StructuralError("couplings are built over level-0 systems");
    if (fs_.size() + 1 != gsys_.size())
        throw StructuralError("need k-1 observables plus `last` for a k-entry system");
    for (const auto& f : fs_)
        if (!f.rational_valued() || !f.bounded_by_one())
            throw StructuralError("coupling observables must be rational and bounded by 1");
    if (!last_.rational_valued() || !last_.bounded_by_one())
        throw StructuralError("`last` must be rational-valued and bounded by 1");
    if (window_->dim() != sys_.dim())
        throw StructuralError("window dimension does not match the system");
    if (window_->level() != 1)
        throw StructuralError("coupling windows live at level 1");
    if (N_ < 1) throw StructuralError("N must be >= 1");

    std::size_t nstates = sys_.state_count();
    std::size_t w = window_->size();
    std::size_t kk = k();
    long period = sys_.period();

    // f values per state, interned into the value table
    std::map<Rat, std::uint16_t> value_ids;
    auto intern = [&](const Rat& v) {
        auto [it, inserted] = value_ids.emplace(v, values_.size());
        if (inserted) {
            if (values_.size() >= 65535)
                throw StructuralError("too many distinct observable values");
            values_.push_back(v);
        }
        return it->second;
    };
    std::vector<std::vector<std::uint16_t>> fvals(kk,
                                                  std::vector<std::uint16_t>(nstates));
    for (std::size_t j = 0; j + 1 < kk; ++j)
        for (std::size_t x = 0; x < nstates; ++x)
            fvals[j][x] = intern(fs_[j].eval_rat(sys_, x));
    for (std::size_t x = 0; x < nstates; ++x)
        fvals[kk - 1][x] = intern(last_.eval_rat(sys_, x));

    // state maps x -> T^{q(n)^{-1}} x, per window element and n mod period
    std::vector<std::vector<std::vector<std::uint32_t>>> maps(
        w, std::vector<std::vector<std::uint32_t>>(static_cast<std::size_t>(period)));
    for (std::size_t qi = 0; qi < w; ++qi)
        for (long r = 0; r < period; ++r) {
            IntMatrix g = (*window_)[qi].eval_arg(Int(r)).inverse();
            maps[qi][static_cast<std::size_t>(r)] = sys_.act_permutation(g);
        }

    // distinct blocks per (n mod period, x)
    std::map<Block, std::size_t> pool;
    std::vector<std::vector<std::size_t>> block_id(
        static_cast<std::size_t>(period), std::vector<std::size_t>(nstates));
    for (long r = 0; r < period; ++r)
        for (std::size_t x = 0; x < nstates; ++x) {
            Block b(w * kk);
            for (std::size_t qi = 0; qi < w; ++qi) {
                std::size_t xs = maps[qi][static_cast<std::size_t>(r)][x];
                for (std::size_t j = 0; j < kk; ++j) b[qi * kk + j] = fvals[j][xs];
            }
            auto [it, inserted] = pool.emplace(std::move(b), pool.size());
            block_id[static_cast<std::size_t>(r)][x] = it->second;
        }
    blocks_.resize(pool.size());
    for (auto& [content, id] : pool) blocks_[id] = content;

    Rat unit = frac(1, static_cast<long>(N_) * static_cast<long>(nstates));
    for (long n = 1; n <= N_; ++n) {
        std::size_t slot = static_cast<std::size_t>(n % period);
        for (std::size_t x = 0; x < nstates; ++x)
            atoms_[{x, block_id[slot][x]}] += unit;
    }

    // the X-marginal extends the uniform measure by construction; verify
    Rat mu = frac(1, static_cast<long>(nstates));
    std::vector<Rat> marg = x_marginal();
    for (const auto& v : marg)
        if (v != mu)
            throw InvariantViolation("X-marginal of an empirical coupling is not uniform");
}

std::vector<Rat> EmpiricalCoupling::x_marginal() const {
    std::vector<Rat> m(sys_.state_count(), Rat(0));
    for (const auto& [key, wgt] : atoms_) m[key.first] += wgt;
    return m;
}

std::map<EmpiricalCoupling::Block, Rat> EmpiricalCoupling::y_marginal() const {
    std::map<Block, Rat> nu;
    for (const auto& [key, wgt] : atoms_) nu[blocks_[key.second]] += wgt;
    return nu;
}

EmpiricalCoupling EmpiricalCoupling::reweighted_by_state(
    const std::vector<Rat>& factor) const {
    if (factor.size() != sys_.state_count())
        throw StructuralError("need one weight factor per state");
    EmpiricalCoupling c = *this;
    Rat total(0);
    for (auto& [key, wgt] : c.atoms_) {
        wgt *= factor[key.first];
        total += wgt;
    }
    if (total == 0) throw StructuralError("reweighting annihilated the coupling");
    for (auto& [key, wgt] : c.atoms_) wgt /= total;
    return c;
}

EmpiricalCoupling::EmpiricalCoupling(
    Raw, std::shared_ptr<const IndexWindow> window, DynSystem sys, GSystem gsys,
    std::vector<Observable> fs, Observable last, long N, std::vector<Rat> values,
    std::vector<Block> blocks,
    std::map<std::pair<std::size_t, std::size_t>, Rat> atoms)
    : window_(std::move(window)),
      sys_(std::move(sys)),
      gsys_(std::move(gsys)),
      fs_(std::move(fs)),
      last_(std::move(last)),
      N_(N),
      values_(std::move(values)),
      blocks_(std::move(blocks)),
      atoms_(std::move(atoms)) {}

EmpiricalCoupling EmpiricalCoupling::from_parts(
    std::shared_ptr<const IndexWindow> window, DynSystem sys, GSystem gsys,
    std::vector<Observable> fs, Observable last, long N, std::vector<Rat> values,
    std::vector<Block> blocks,
    std::map<std::pair<std::size_t, std::size_t>, Rat> atoms) {
    return EmpiricalCoupling(Raw{}, std::move(window), std::move(sys), std::move(gsys),
                             std::move(fs), std::move(last), N, std::move(values),
                             std::move(blocks), std::move(atoms));
}

EmpiricalCoupling empirical_coupling(const DynSystem& sys, const GSystem& gsys,
                                     const std::vector<Observable>& fs,
                                     const Observable& last,
                                     std::shared_ptr<const IndexWindow> window, long N) {
    return EmpiricalCoupling(std::move(window), sys, gsys, fs, last, N);
}

namespace {

using AtomMap = std::map<std::pair<std::size_t, EmpiricalCoupling::Block>, Rat>;

AtomMap expanded_atoms(const EmpiricalCoupling& c) {
    AtomMap out;
    for (const auto& [key, wgt] : c.atoms())
        out[{key.first, c.blocks()[key.second]}] += wgt;
    return out;
}

EmpiricalCoupling::Block permuted_block(const EmpiricalCoupling::Block& b,
                                        const std::vector<std::size_t>& perm,
                                        std::size_t k) {
    EmpiricalCoupling::Block out(b.size());
    for (std::size_t i = 0; i < perm.size(); ++i)
        for (std::size_t j = 0; j < k; ++j) out[i * k + j] = b[perm[i] * k + j];
    return out;
}

} // namespace

bool check_diag_invariance(const EmpiricalCoupling& c, const IntMatrix& g) {
    NilSeq iota = element_from_matrix(g, 1);
    auto perm = c.window().translation_perm(iota);
    if (!perm)
        throw ClosureError("window is not closed under translation by iota(g)^{-1}; "
                           "enlarge the window to test this group element");
    AtomMap original = expanded_atoms(c);
    AtomMap pushed;
    for (const auto& [key, wgt] : c.atoms()) {
        std::size_t nx = c.system().act(g, key.first);
        pushed[{nx, permuted_block(c.blocks()[key.second], *perm, c.k())}] += wgt;
    }
    return pushed == original;
}

Rat check_alpha_invariance(const EmpiricalCoupling& c) {
    auto perm = c.window().alpha_perm();
    if (!perm)
        throw ClosureError("window is not closed under the inverse shift; "
                           "alpha-invariance cannot be evaluated on this truncation");
    AtomMap original = expanded_atoms(c);
    AtomMap pushed;
    for (const auto& [key, wgt] : c.atoms())
        pushed[{key.first, permuted_block(c.blocks()[key.second], *perm, c.k())}] += wgt;

    Rat tv(0);
    for (const auto& [key, wgt] : original) {
        auto it = pushed.find(key);
        Rat other = it == pushed.end() ? Rat(0) : it->second;
        Rat d = wgt - other;
        if (d < 0) d = -d;
        tv += d;
    }
    for (const auto& [key, wgt] : pushed)
        if (!original.count(key)) tv += wgt;
    return tv;
}

Rat alpha_boundary_prediction(const EmpiricalCoupling& c) {
    // The shifted Cesaro sum replaces the n = 1 block with the n = N + 1 one;
    // each state where those differ contributes two boundary terms.
    const DynSystem& sys = c.system();
    std::size_t nstates = sys.state_count();
    long period = sys.period();
    std::size_t w = c.window().size();
    std::size_t k = c.k();

    auto block_at = [&](long n, std::size_t x) {
        std::vector<Rat> b(w * k);
        for (std::size_t qi = 0; qi < w; ++qi) {
            IntMatrix g = c.window()[qi].eval_arg(Int(n % period)).inverse();
            std::size_t xs = sys.act(g, x);
            for (std::size_t j = 0; j + 1 < k; ++j) b[qi * k + j] = c.fs()[j].eval_rat(sys, xs);
            b[qi * k + k - 1] = c.last().eval_rat(sys, xs);
        }
        return b;
    };

    long mismatches = 0;
    for (std::size_t x = 0; x < nstates; ++x)
        if (block_at(1, x) != block_at(c.N() + 1, x)) ++mismatches;
    return frac(2 * mismatches, c.N() * static_cast<long>(nstates));
}

bool check_marginal_S_invariance(const EmpiricalCoupling& c, const NilSeq& r) {
    auto perm = c.window().translation_perm(r);
    if (!perm)
        throw ClosureError("window is not closed under translation by r^{-1}; "
                           "marginal invariance cannot be evaluated for this element");
    std::map<EmpiricalCoupling::Block, Rat> nu = c.y_marginal();
    std::map<EmpiricalCoupling::Block, Rat> pushed;
    for (const auto& [block, wgt] : nu)
        pushed[permuted_block(block, *perm, c.k())] += wgt;
    return pushed == nu;
}

namespace {

struct GTilde {
    std::vector<std::size_t> coord; // window index per slot (k entries)

    Rat eval(const EmpiricalCoupling& c, const EmpiricalCoupling::Block& b) const {
        std::size_t k = c.k();
        Rat v(1);
        for (std::size_t j = 0; j < k; ++j) v *= c.value(b[coord[j] * k + j]);
        return v;
    }
};

// coordinates p_k p_i^{-1} (slot i) and p_k (slot k-1)
GTilde gtilde_coords(const EmpiricalCoupling& c) {
    const GSystem& gsys = c.gsystem();
    std::size_t k = c.k();
    NilSeq pk = seq_as_element(gsys[k - 1]);
    GTilde g;
    g.coord.resize(k);
    for (std::size_t i = 0; i + 1 < k; ++i) {
        auto idx = c.window().index_of(pk * seq_as_element(gsys[i]).inverse());
        if (!idx)
            throw ClosureError("window lacks the coordinate p_k p_i^{-1}");
        g.coord[i] = *idx;
    }
    auto idx = c.window().index_of(pk);
    if (!idx) throw ClosureError("window lacks the coordinate p_k");
    g.coord[k - 1] = *idx;
    return g;
}

} // namespace

PairingResult pairing(const EmpiricalCoupling& c, const Observable& f_k) {
    if (!f_k.rational_valued())
        throw StructuralError("pairing needs a rational-valued f_k");

    // The re-arrangement identity pairs Lambda_N against A_N = Lambda_N(f...,
    // last), and the coupling entering the integral carries A_N in its last
    // coordinate slot. Plug the Cesaro average in and integrate.
    std::vector<Observable> with_last = c.fs();
    with_last.push_back(c.last());
    auto a_n = lambda_exact(c.system(), c.gsystem(), with_last, c.N());
    EmpiricalCoupling plugged(c.window_ptr(), c.system(), c.gsystem(), c.fs(),
                              Observable::tabulated(a_n), c.N());
    GTilde gt = gtilde_coords(plugged);

    PairingResult res;
    res.coupling_side = Rat(0);
    for (const auto& [key, wgt] : plugged.atoms())
        res.coupling_side += wgt * f_k.eval_rat(c.system(), key.first) *
                             gt.eval(plugged, plugged.blocks()[key.second]);

    std::vector<Observable> with_fk = c.fs();
    with_fk.push_back(f_k);
    auto la = lambda_exact(c.system(), c.gsystem(), with_fk, c.N());
    res.dynamics_side = Rat(0);
    for (std::size_t x = 0; x < la.size(); ++x) res.dynamics_side += la[x] * a_n[x];
    res.dynamics_side /= static_cast<long>(la.size());
    return res;
}

std::vector<Rat> basic_function(const EmpiricalCoupling& c, const GSystem& gsys) {
    if (!(gsys == c.gsystem()))
        throw StructuralError("basic_function must use the coupling's own system");
    GTilde gt = gtilde_coords(c);
    std::size_t nstates = c.system().state_count();
    std::vector<Rat> num(nstates, Rat(0)), den(nstates, Rat(0));
    for (const auto& [key, wgt] : c.atoms()) {
        num[key.first] += wgt * gt.eval(c, c.blocks()[key.second]);
        den[key.first] += wgt;
    }
    std::vector<Rat> g(nstates, Rat(0));
    for (std::size_t x = 0; x < nstates; ++x) {
        if (den[x] == 0)
            throw InvariantViolation("coupling misses a state; X-marginal not uniform");
        g[x] = num[x] / den[x];
    }
    return g;
}

RearrangeIndices canon_rearrange_indices(const NilSeq& r, const NilSeq& p, long n) {
    if (r.dim() != p.dim() || r.level() != p.level() || r.level() < 1)
        throw StructuralError("rearrangement needs two level >= 1 elements");
    NilSeq iota_rn = element_from_matrix(r.eval_arg(Int(n)), r.level());

    RearrangeIndices out{
        // iota(r(n))^{-1} alpha^{-n}(r p^{-1})
        iota_rn.inverse() * alpha_shift(r * p.inverse(), -n),
        // (<r|p>(n))^{-1} with <r|p>_m(n) = p(n+m) r(n+m)^{-1} r(n)
        (alpha_shift(p, -n) * alpha_shift(r, -n).inverse() * iota_rn).inverse(),
    };
    return out;
}

bool canon_rearrange_check(const IndexWindow& window, const NilSeq& r, const NilSeq& p,
                           long n, const EmpiricalCoupling::Block& y, std::size_t k,
                           std::size_t slot) {
    if (y.size() != window.size() * k)
        throw StructuralError("block size does not match the window");
    auto alpha = window.alpha_perm();
    if (!alpha) throw ClosureError("window is not closed under the shift");

    // left side: apply S^{alpha^n}, then S^{iota(r(n))}, read at r p^{-1}
    EmpiricalCoupling::Block cur = y;
    if (n >= 0) {
        for (long t = 0; t < n; ++t) cur = permuted_block(cur, *alpha, k);
    } else {
        std::vector<std::size_t> inv(alpha->size());
        for (std::size_t i = 0; i < alpha->size(); ++i) inv[(*alpha)[i]] = i;
        for (long t = 0; t < -n; ++t) cur = permuted_block(cur, inv, k);
    }
    NilSeq iota_rn = element_from_matrix(r.eval_arg(Int(n)), r.level());
    auto tperm = window.translation_perm(iota_rn);
    if (!tperm) throw ClosureError("window is not closed under iota(r(n))^{-1}");
    cur = permuted_block(cur, *tperm, k);
    auto read_idx = window.index_of(r * p.inverse());
    if (!read_idx) throw ClosureError("window lacks the coordinate r p^{-1}");
    std::uint16_t lhs = cur[*read_idx * k + slot];

    // right side: direct read at (<r|p>(n))^{-1}
    auto indices = canon_rearrange_indices(r, p, n);
    auto rhs_idx = window.index_of(indices.via_bracket_inverse);
    if (!rhs_idx) throw ClosureError("window lacks the bracket coordinate");
    std::uint16_t rhs = y[*rhs_idx * k + slot];
    return lhs == rhs;
}

IdentityChainReport cond_exp_identity_check(const EmpiricalCoupling& c, long M) {
    if (M < 1) throw StructuralError("outer average length must be >= 1");
    const DynSystem& sys = c.system();
    const GSystem& gsys = c.gsystem();
    std::size_t k = c.k();
    std::size_t nstates = sys.state_count();

    // g := E(gtilde | X) and the plain average Lambda_M(f_1, ..., f_{k-1}, g)
    std::vector<Rat> g = basic_function(c, gsys);
    std::vector<Observable> with_g = c.fs();
    with_g.push_back(Observable::tabulated(g));
    std::vector<Rat> expr1 = lambda_exact(sys, gsys, with_g, M);

    NilSeq pk = seq_as_element(gsys[k - 1]);
    NilSeq e1 = NilSeq::identity(gsys.dim(), 1);
    std::vector<NilSeq> ratios; // p_k p_i^{-1}
    for (std::size_t i = 0; i + 1 < k; ++i)
        ratios.push_back(pk * seq_as_element(gsys[i]).inverse());

    auto want = [&](const NilSeq& q) {
        auto idx = c.window().index_of(q);
        if (!idx)
            throw ClosureError("window lacks a coordinate required by the identity chain");
        return *idx;
    };

    std::vector<Rat> expr2(nstates, Rat(0)), expr3(nstates, Rat(0));
    std::vector<Rat> xmarg = c.x_marginal();

    for (long m = 1; m <= M; ++m) {
        NilSeq iota_inv = element_from_matrix(gsys[k - 1].eval({{"n", Int(m)}}), 1).inverse();

        // E(gtilde o T~^{p_k(m)} | X): coordinates iota(p_k(m))^{-1} q
        GTilde c2;
        c2.coord.resize(k);
        for (std::size_t i = 0; i + 1 < k; ++i) c2.coord[i] = want(iota_inv * ratios[i]);
        c2.coord[k - 1] = want(iota_inv * pk);

        // rearranged form: coordinates (<p_k|p_i>(m))^{-1} via the lemma path
        GTilde c3;
        c3.coord.resize(k);
        for (std::size_t i = 0; i + 1 < k; ++i)
            c3.coord[i] = want(
                canon_rearrange_indices(pk, seq_as_element(gsys[i]), m).via_bracket_inverse);
        c3.coord[k - 1] = want(canon_rearrange_indices(pk, e1, m).via_bracket_inverse);

        // prod_{i<k} f_i(T^{p_i(m)} x), constant over the fibre at x
        std::vector<Rat> prod_f(nstates, Rat(1));
        for (std::size_t i = 0; i + 1 < k; ++i) {
            auto perm = sys.act_permutation(gsys[i].eval({{"n", Int(m)}}));
            for (std::size_t x = 0; x < nstates; ++x)
                prod_f[x] *= c.fs()[i].eval_rat(sys, perm[x]);
        }

        std::vector<Rat> cond2(nstates, Rat(0)), cond3(nstates, Rat(0));
        for (const auto& [key, wgt] : c.atoms()) {
            const auto& b = c.blocks()[key.second];
            cond2[key.first] += wgt * c2.eval(c, b);
            cond3[key.first] += wgt * c3.eval(c, b);
        }
        for (std::size_t x = 0; x < nstates; ++x) {
            expr2[x] += prod_f[x] * cond2[x] / xmarg[x];
            expr3[x] += prod_f[x] * cond3[x] / xmarg[x];
        }
    }

    IdentityChainReport rep;
    rep.chain_discrepancy = Rat(0);
    rep.alpha_discrepancy = Rat(0);
    for (std::size_t x = 0; x < nstates; ++x) {
        Rat d1 = expr1[x] - expr2[x] / M;
        if (d1 < 0) d1 = -d1;
        if (d1 > rep.chain_discrepancy) rep.chain_discrepancy = d1;
        Rat d2 = expr3[x] / M - expr2[x] / M;
        if (d2 < 0) d2 = -d2;
        if (d2 > rep.alpha_discrepancy) rep.alpha_discrepancy = d2;
    }
    rep.budget = frac(2 * M, c.N());
    rep.alpha_exact = check_alpha_invariance(c) == 0;
    return rep;
}

namespace {

nlohmann::ordered_json rat_json(const Rat& r) {
    return nlohmann::ordered_json::array(
        {r.get_num().get_str(), r.get_den().get_str()});
}

Rat rat_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 2)
        throw StructuralError("rational values are [numerator, denominator] pairs");
    Rat r(Int(j[0].get<std::string>()), Int(j[1].get<std::string>()));
    r.canonicalize();
    return r;
}

} // namespace

std::string coupling_to_json(const EmpiricalCoupling& c) {
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["dim"] = c.window().dim();
    j["level"] = c.window().level();
    j["k"] = c.k();
    j["N"] = c.N();
    j["canon_moduli"] = nlohmann::ordered_json::array();
    for (const auto& m : c.window().canon().moduli())
        j["canon_moduli"].push_back(m.get_str());
    j["window"] = nlohmann::ordered_json::array();
    for (const auto& q : c.window().elements()) j["window"].push_back(q.to_string());
    j["blocks"] = nlohmann::ordered_json::array();
    for (const auto& b : c.blocks()) {
        nlohmann::ordered_json jb = nlohmann::ordered_json::array();
        for (std::uint16_t id : b) jb.push_back(rat_json(c.value(id)));
        j["blocks"].push_back(std::move(jb));
    }
    j["atoms"] = nlohmann::ordered_json::array();
    for (const auto& [key, wgt] : c.atoms()) {
        nlohmann::ordered_json ja;
        ja["x"] = key.first;
        ja["block"] = key.second;
        ja["weight"] = rat_json(wgt);
        j["atoms"].push_back(std::move(ja));
    }
    return j.dump(2) + "\n";
}

EmpiricalCoupling coupling_from_json(const std::string& text, const DynSystem& sys,
                                     const GSystem& gsys,
                                     const std::vector<Observable>& fs,
                                     const Observable& last) {
    nlohmann::json j = nlohmann::json::parse(text);
    int dim = j.at("dim").get<int>();
    int level = j.at("level").get<int>();
    std::size_t k = j.at("k").get<std::size_t>();
    long N = j.at("N").get<long>();

    std::vector<Int> moduli;
    for (const auto& m : j.at("canon_moduli")) moduli.emplace_back(m.get<std::string>());
    std::vector<NilSeq> elements;
    for (const auto& q : j.at("window"))
        elements.push_back(NilSeq::parse(q.get<std::string>(), dim, level));
    auto window = std::make_shared<IndexWindow>(std::move(elements), CanonMap(moduli));

    std::vector<Rat> values;
    std::map<Rat, std::uint16_t> value_ids;
    auto intern = [&](const Rat& v) {
        auto [it, inserted] = value_ids.emplace(v, values.size());
        if (inserted) values.push_back(v);
        return it->second;
    };
    std::vector<EmpiricalCoupling::Block> blocks;
    for (const auto& jb : j.at("blocks")) {
        EmpiricalCoupling::Block b;
        for (const auto& v : jb) b.push_back(intern(rat_from_json(v)));
        if (b.size() != window->size() * k)
            throw StructuralError("block size does not match the window");
        blocks.push_back(std::move(b));
    }
    std::map<std::pair<std::size_t, std::size_t>, Rat> atoms;
    for (const auto& ja : j.at("atoms")) {
        std::size_t x = ja.at("x").get<std::size_t>();
        std::size_t bid = ja.at("block").get<std::size_t>();
        if (bid >= blocks.size()) throw StructuralError("atom references a missing block");
        atoms[{x, bid}] += rat_from_json(ja.at("weight"));
    }
    return EmpiricalCoupling::from_parts(window, sys, gsys, fs, last, N,
                                         std::move(values), std::move(blocks),
                                         std::move(atoms));
}

} // namespace ergo
