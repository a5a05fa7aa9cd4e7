#include "ergo/reduction.hpp"

#include <algorithm>
#include <numeric>
#include <unordered_map>

namespace ergo {

std::string index_var(const NilSeq& p) {
    return p.level() == 0 ? "n" : "m" + std::to_string(p.level());
}

NilSeq alpha_shift(const NilSeq& p, long power) {
    if (power == 0) return p;
    NilSeq r = p;
    std::string v = index_var(p);
    for (int i = 0; i < p.dim(); ++i)
        for (int j = i + 1; j < p.dim(); ++j)
            r.set(i, j, p.at(i, j).shift_var_const(v, Int(-power)));
    return r;
}

namespace {

std::string fresh_var(const NilSeq& p) { return "m" + std::to_string(p.level() + 1); }

void check_newvar(const NilSeq& p, const std::string& newvar) {
    const auto& vars = p.vars();
    if (std::find(vars.begin(), vars.end(), newvar) != vars.end())
        throw StructuralError("offset variable '" + newvar + "' already in use");
    if (newvar != fresh_var(p))
        throw StructuralError("offset variable must be the next in the fixed order (" +
                              fresh_var(p) + ")");
}

} // namespace

NilSeq difference(const NilSeq& p) { return difference(p, fresh_var(p)); }

NilSeq difference(const NilSeq& p, const std::string& newvar) {
    check_newvar(p, newvar);
    NilSeq up = p.lifted();
    NilSeq shifted = up.shift_var("n", newvar);
    return shifted.inverse() * up;
}

NilSeq bracket(const NilSeq& p, const NilSeq& q) { return bracket(p, q, fresh_var(p)); }

NilSeq bracket(const NilSeq& p, const NilSeq& q, const std::string& newvar) {
    if (p.dim() != q.dim() || p.level() != q.level())
        throw StructuralError("bracket arguments must share dimension and level");
    check_newvar(p, newvar);
    NilSeq q_shifted = q.lifted().shift_var("n", newvar);
    return q_shifted * difference(p, newvar);
}

GSystem reduce(const GSystem& sys) {
    std::size_t k = sys.size();
    const NilSeq& last = sys[k - 1];
    std::vector<NilSeq> out;
    out.reserve(2 * k - 1);
    for (std::size_t i = 0; i + 1 < k; ++i) out.push_back(sys[i].lifted());
    out.push_back(bracket(last, NilSeq::identity(sys.dim(), sys.level())));
    for (std::size_t i = 0; i + 1 < k; ++i) out.push_back(bracket(last, sys[i]));
    return GSystem(std::move(out));
}

GSystem reorder(const GSystem& sys, const std::vector<std::size_t>& perm) {
    std::size_t k = sys.size();
    if (perm.size() != k)
        throw StructuralError("permutation size mismatch");
    std::vector<bool> seen(k, false);
    std::vector<NilSeq> out;
    out.reserve(k);
    for (std::size_t i : perm) {
        if (i >= k || seen[i]) throw StructuralError("invalid permutation");
        seen[i] = true;
        out.push_back(sys[i]);
    }
    return GSystem(std::move(out));
}

DedupeResult dedupe(const GSystem& sys) {
    std::vector<NilSeq> out;
    std::vector<std::size_t> removed;
    for (std::size_t i = 0; i < sys.size(); ++i) {
        bool dup = std::any_of(out.begin(), out.end(),
                               [&](const NilSeq& s) { return s == sys[i]; });
        if (dup)
            removed.push_back(i);
        else
            out.push_back(sys[i]);
    }
    return {GSystem(std::move(out)), std::move(removed)};
}

bool is_trivial(const GSystem& sys) {
    return std::all_of(sys.entries().begin(), sys.entries().end(),
                       [](const NilSeq& s) { return s.is_independent_of("n"); });
}

GSystem canonicalize(const GSystem& sys, std::vector<TraceStep>* steps) {
    auto [deduped, removed] = dedupe(sys);
    if (!removed.empty() && steps)
        steps->push_back({TraceStep::Op::Dedupe, {}, removed, deduped});

    std::vector<std::size_t> perm(deduped.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) {
        return deduped[a].key() < deduped[b].key();
    });
    bool is_id = std::is_sorted(perm.begin(), perm.end());
    GSystem sorted = is_id ? deduped : reorder(deduped, perm);
    if (!is_id && steps)
        steps->push_back({TraceStep::Op::Reorder, perm, {}, sorted});
    return sorted;
}

bool ReductionTrace::replays() const {
    GSystem cur = initial;
    for (const auto& step : steps) {
        switch (step.op) {
            case TraceStep::Op::Reorder: cur = reorder(cur, step.perm); break;
            case TraceStep::Op::Dedupe: {
                auto [sys, removed] = dedupe(cur);
                if (removed != step.removed) return false;
                cur = sys;
                break;
            }
            case TraceStep::Op::Reduce: cur = reduce(cur); break;
        }
        if (!(cur == step.snapshot)) return false;
    }
    return true;
}

namespace {

struct SearchCtx {
    ComplexityOptions opts;
    std::unordered_map<std::string, int> seen_budget; // state -> best remaining budget
    std::vector<TraceStep> steps;
    long nodes = 0;
};

// Move entry j to the back, keeping the rest in order.
std::vector<std::size_t> move_to_back(std::size_t k, std::size_t j) {
    std::vector<std::size_t> perm;
    perm.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
        if (i != j) perm.push_back(i);
    perm.push_back(j);
    return perm;
}

struct Successor {
    std::size_t choice;
    GSystem reduced;              // state right after the reduction
    GSystem state;                // canonical form of `reduced`
    std::vector<TraceStep> canon_steps;
    std::string skey;
};

Successor make_successor(const GSystem& state, std::size_t j) {
    std::size_t k = state.size();
    Successor s;
    s.choice = j;
    s.reduced = reduce(j + 1 == k ? state : reorder(state, move_to_back(k, j)));
    s.state = canonicalize(s.reduced, &s.canon_steps);
    s.skey = s.state.key();
    return s;
}

bool entry_superset(const GSystem& big, const GSystem& small) {
    for (const auto& e : small.entries()) {
        bool found = std::any_of(big.entries().begin(), big.entries().end(),
                                 [&](const NilSeq& x) { return x == e; });
        if (!found) return false;
    }
    return true;
}

bool dfs(SearchCtx& ctx, const GSystem& state, int remaining, bool allow_reorder) {
    if (is_trivial(state)) return true;
    if (remaining == 0) return false;
    ++ctx.nodes;

    std::string key = state.key() + (allow_reorder ? "" : "!");
    auto it = ctx.seen_budget.find(key);
    if (it != ctx.seen_budget.end() && it->second >= remaining) return false;
    ctx.seen_budget[key] = remaining;

    std::size_t k = state.size();
    std::vector<Successor> succ;
    if (!allow_reorder) {
        succ.push_back(make_successor(state, k - 1));
    } else {
        succ.reserve(k);
        for (std::size_t j = 0; j < k; ++j) succ.push_back(make_successor(state, j));
        std::sort(succ.begin(), succ.end(), [](const Successor& a, const Successor& b) {
            return a.skey != b.skey ? a.skey < b.skey : a.choice < b.choice;
        });
        succ.erase(std::unique(succ.begin(), succ.end(),
                               [](const Successor& a, const Successor& b) {
                                   return a.skey == b.skey;
                               }),
                   succ.end());
        if (ctx.opts.prune_dominated && succ.size() > 1) {
            std::vector<Successor> kept;
            for (const auto& s : succ) {
                bool dominated = std::any_of(
                    succ.begin(), succ.end(), [&](const Successor& o) {
                        return o.skey != s.skey && o.state.size() < s.state.size() &&
                               entry_superset(s.state, o.state);
                    });
                if (!dominated) kept.push_back(s);
            }
            succ = std::move(kept);
        }
    }

    for (const auto& s : succ) {
        std::size_t nsteps = ctx.steps.size();
        std::size_t j = s.choice;
        if (allow_reorder && j + 1 != k) {
            auto perm = move_to_back(k, j);
            ctx.steps.push_back({TraceStep::Op::Reorder, perm, {}, reorder(state, perm)});
        }
        ctx.steps.push_back({TraceStep::Op::Reduce, {}, {}, s.reduced});
        for (const auto& cs : s.canon_steps) ctx.steps.push_back(cs);

        if (dfs(ctx, s.state, remaining - 1, true)) return true;
        ctx.steps.resize(nsteps);
    }
    return false;
}

} // namespace

std::optional<ComplexityResult> complexity(const GSystem& sys,
                                           const ComplexityOptions& opts) {
    SearchCtx ctx;
    ctx.opts = opts;

    GSystem start = sys;
    std::vector<TraceStep> prologue;
    if (opts.allow_initial_reorder) {
        start = canonicalize(sys, &prologue);
    } else {
        auto [deduped, removed] = dedupe(sys);
        if (!removed.empty())
            prologue.push_back({TraceStep::Op::Dedupe, {}, removed, deduped});
        start = deduped;
    }

    for (int bound = 0; bound <= opts.max_depth; ++bound) {
        ctx.seen_budget.clear();
        ctx.steps = prologue;
        if (dfs(ctx, start, bound, opts.allow_initial_reorder)) {
            ComplexityResult res;
            res.value = bound;
            res.trace.initial = sys;
            res.trace.steps = ctx.steps;
            res.trace.reductions = bound;
            return res;
        }
    }
    return std::nullopt;
}

} // namespace ergo
