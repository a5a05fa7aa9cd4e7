#include "ergo/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>

namespace ergo {

namespace {

long lcm_of(const std::vector<long>& xs) {
    long r = 1;
    for (long x : xs) r = std::lcm(r, x);
    return r;
}

std::complex<double> unit_phase(double turns) {
    double a = 2.0 * std::numbers::pi * turns;
    return {std::cos(a), std::sin(a)};
}

} // namespace

DynSystem DynSystem::cyclic_product(std::vector<long> moduli) {
    if (moduli.empty()) throw StructuralError("cyclic product needs at least one modulus");
    DynSystem s;
    s.kind_ = SystemKind::CyclicProduct;
    s.moduli_ = std::move(moduli);
    s.dim_ = static_cast<int>(s.moduli_.size()) + 1;
    s.states_ = 1;
    for (long q : s.moduli_) {
        if (q < 2) throw StructuralError("modulus must be >= 2");
        s.states_ *= static_cast<std::size_t>(q);
    }
    return s;
}

DynSystem DynSystem::group_translation(long modulus, int dim) {
    if (modulus < 2) throw StructuralError("modulus must be >= 2");
    if (dim < 2) throw StructuralError("group translation needs dim >= 2");
    DynSystem s;
    s.kind_ = SystemKind::GroupTranslation;
    s.modulus_ = modulus;
    s.dim_ = dim;
    s.states_ = 1;
    for (int i = 0; i < dim * (dim - 1) / 2; ++i)
        s.states_ *= static_cast<std::size_t>(modulus);
    return s;
}

DynSystem DynSystem::torus_rotation(std::vector<double> rotation) {
    if (rotation.empty()) throw StructuralError("rotation vector must be nonempty");
    DynSystem s;
    s.kind_ = SystemKind::TorusRotation;
    s.rotation_ = std::move(rotation);
    s.dim_ = static_cast<int>(s.rotation_.size()) + 1;
    return s;
}

std::size_t DynSystem::state_count() const {
    if (!finite()) throw StructuralError("torus systems have no finite state space");
    return states_;
}

void DynSystem::require_first_row(const IntMatrix& g) const {
    if (g.dim != dim_) throw StructuralError("acting element has wrong dimension");
    for (int i = 1; i < g.dim; ++i)
        for (int j = i + 1; j < g.dim; ++j)
            if (g.at(i, j) != 0)
                throw StructuralError(
                    "this system only supports first-row (abelian) group elements");
    if (!g.is_unitriangular()) throw StructuralError("group element must be unitriangular");
}

std::size_t DynSystem::act(const IntMatrix& g, std::size_t state) const {
    switch (kind_) {
        case SystemKind::CyclicProduct: {
            require_first_row(g);
            std::size_t out = 0, base = 1, rest = state;
            for (std::size_t c = 0; c < moduli_.size(); ++c) {
                long q = moduli_[c];
                long x = static_cast<long>(rest % static_cast<std::size_t>(q));
                rest /= static_cast<std::size_t>(q);
                Int shift = g.at(0, static_cast<int>(c) + 1) % q;
                long v = (x + shift.get_si() % q + q) % q;
                out += static_cast<std::size_t>(v) * base;
                base *= static_cast<std::size_t>(q);
            }
            return out;
        }
        case SystemKind::GroupTranslation: {
            if (g.dim != dim_) throw StructuralError("acting element has wrong dimension");
            if (!g.is_unitriangular())
                throw StructuralError("group element must be unitriangular");
            // decode state into a unitriangular matrix mod q
            IntMatrix x = IntMatrix::identity(dim_);
            std::size_t rest = state;
            for (int i = 0; i < dim_; ++i)
                for (int j = i + 1; j < dim_; ++j) {
                    x.at(i, j) = static_cast<long>(rest % static_cast<std::size_t>(modulus_));
                    rest /= static_cast<std::size_t>(modulus_);
                }
            IntMatrix y = (g * x).mod(modulus_);
            std::size_t out = 0, base = 1;
            for (int i = 0; i < dim_; ++i)
                for (int j = i + 1; j < dim_; ++j) {
                    out += static_cast<std::size_t>(y.at(i, j).get_ui()) * base;
                    base *= static_cast<std::size_t>(modulus_);
                }
            return out;
        }
        case SystemKind::TorusRotation:
            throw StructuralError("torus systems act on points, not state indices");
    }
    throw StructuralError("unreachable");
}

std::vector<std::uint32_t> DynSystem::act_permutation(const IntMatrix& g) const {
    std::vector<std::uint32_t> perm(state_count());
    for (std::size_t s = 0; s < perm.size(); ++s)
        perm[s] = static_cast<std::uint32_t>(act(g, s));
    return perm;
}

std::vector<double> DynSystem::act_point(const IntMatrix& g,
                                         const std::vector<double>& x) const {
    if (kind_ != SystemKind::TorusRotation)
        throw StructuralError("act_point is for torus systems");
    require_first_row(g);
    if (x.size() != rotation_.size()) throw StructuralError("point dimension mismatch");
    std::vector<double> y(x.size());
    for (std::size_t c = 0; c < x.size(); ++c) {
        double v = x[c] + g.at(0, static_cast<int>(c) + 1).get_d() * rotation_[c];
        y[c] = v - std::floor(v);
    }
    return y;
}

std::vector<Int> DynSystem::canon_moduli() const {
    std::vector<Int> m(static_cast<std::size_t>(dim_) * dim_, Int(0));
    switch (kind_) {
        case SystemKind::CyclicProduct:
            for (std::size_t c = 0; c < moduli_.size(); ++c)
                m[c + 1] = Int(moduli_[c]); // entry (0, c+1)
            break;
        case SystemKind::GroupTranslation:
            for (int i = 0; i < dim_; ++i)
                for (int j = i + 1; j < dim_; ++j)
                    m[static_cast<std::size_t>(i * dim_ + j)] = Int(modulus_);
            break;
        case SystemKind::TorusRotation:
            break; // exact integers act faithfully; nothing may be reduced
    }
    return m;
}

long DynSystem::period() const {
    switch (kind_) {
        case SystemKind::CyclicProduct: return lcm_of(moduli_);
        case SystemKind::GroupTranslation: return modulus_;
        case SystemKind::TorusRotation: return 0;
    }
    return 0;
}

std::vector<long> DynSystem::state_coords(std::size_t state) const {
    std::vector<long> coords;
    if (kind_ == SystemKind::CyclicProduct) {
        std::size_t rest = state;
        for (long q : moduli_) {
            coords.push_back(static_cast<long>(rest % static_cast<std::size_t>(q)));
            rest /= static_cast<std::size_t>(q);
        }
    } else if (kind_ == SystemKind::GroupTranslation) {
        std::size_t rest = state;
        for (int i = 0; i < dim_ * (dim_ - 1) / 2; ++i) {
            coords.push_back(static_cast<long>(rest % static_cast<std::size_t>(modulus_)));
            rest /= static_cast<std::size_t>(modulus_);
        }
    } else {
        throw StructuralError("torus systems have no integer coordinates");
    }
    return coords;
}

Observable Observable::indicator(std::vector<std::size_t> states) {
    Observable o;
    o.kind_ = Kind::Indicator;
    o.subset_ = std::move(states);
    std::sort(o.subset_.begin(), o.subset_.end());
    return o;
}

Observable Observable::character(std::vector<long> freq) {
    Observable o;
    o.kind_ = Kind::Character;
    o.freq_ = std::move(freq);
    return o;
}

Observable Observable::tabulated(std::vector<Rat> values) {
    Observable o;
    o.kind_ = Kind::Tabulated;
    o.table_ = std::move(values);
    o.bounded_ = std::all_of(o.table_.begin(), o.table_.end(), [](const Rat& v) {
        return v <= 1 && v >= -1;
    });
    return o;
}

Observable Observable::constant_one() {
    Observable o;
    o.kind_ = Kind::Indicator;
    o.all_states_ = true;
    return o;
}

Rat Observable::eval_rat(const DynSystem& sys, std::size_t state) const {
    switch (kind_) {
        case Kind::Indicator:
            if (all_states_) return Rat(1);
            return std::binary_search(subset_.begin(), subset_.end(), state) ? Rat(1)
                                                                             : Rat(0);
        case Kind::Tabulated:
            if (state >= table_.size())
                throw StructuralError("tabulated observable does not cover the state space");
            return table_[state];
        case Kind::Character:
            throw StructuralError("characters are not rational-valued");
    }
    throw StructuralError("unreachable");
}

std::complex<double> Observable::eval_cx(const DynSystem& sys, std::size_t state) const {
    if (kind_ != Kind::Character) {
        Rat v = eval_rat(sys, state);
        return {v.get_d(), 0.0};
    }
    auto coords = sys.state_coords(state);
    if (sys.kind() != SystemKind::CyclicProduct)
        throw StructuralError("character observables need cyclic or torus systems");
    if (freq_.size() != coords.size())
        throw StructuralError("character frequency dimension mismatch");
    double turns = 0;
    for (std::size_t c = 0; c < coords.size(); ++c)
        turns += static_cast<double>(freq_[c]) * static_cast<double>(coords[c]) /
                 static_cast<double>(sys.moduli()[c]);
    return unit_phase(turns);
}

std::complex<double> Observable::eval_point(const DynSystem& sys,
                                            const std::vector<double>& x) const {
    if (kind_ != Kind::Character)
        throw StructuralError("only character observables are supported on the torus");
    if (freq_.size() != x.size())
        throw StructuralError("character frequency dimension mismatch");
    double turns = 0;
    for (std::size_t c = 0; c < x.size(); ++c)
        turns += static_cast<double>(freq_[c]) * x[c];
    return unit_phase(turns);
}

namespace {

void check_average_inputs(const DynSystem& sys, const GSystem& gsys,
                          const std::vector<Observable>& fs) {
    if (gsys.level() != 0)
        throw StructuralError("averages act through level-0 sequences only");
    if (fs.size() != gsys.size())
        throw StructuralError("need exactly one observable per sequence");
    if (gsys.dim() != sys.dim())
        throw StructuralError("sequence dimension does not match the system");
}

/// Permutation tables perm[j][n mod period] for T^{p_j(n)}. Sequence values
/// mod the system's moduli are periodic in n with period sys.period().
std::vector<std::vector<std::vector<std::uint32_t>>> action_tables(
    const DynSystem& sys, const GSystem& gsys) {
    long period = sys.period();
    std::vector<std::vector<std::vector<std::uint32_t>>> tables(gsys.size());
    for (std::size_t j = 0; j < gsys.size(); ++j) {
        tables[j].reserve(static_cast<std::size_t>(period));
        for (long r = 0; r < period; ++r) {
            IntMatrix g = gsys[j].eval({{"n", Int(r)}});
            tables[j].push_back(sys.act_permutation(g));
        }
    }
    return tables;
}

} // namespace

std::vector<Rat> lambda_exact(const DynSystem& sys, const GSystem& gsys,
                              const std::vector<Observable>& fs, long N) {
    check_average_inputs(sys, gsys, fs);
    if (!sys.finite()) throw StructuralError("exact averages need a finite system");
    for (const auto& f : fs)
        if (!f.rational_valued())
            throw StructuralError("exact averages need rational-valued observables");
    if (N < 1) throw StructuralError("N must be >= 1");

    std::size_t nstates = sys.state_count();
    long period = sys.period();
    auto tables = action_tables(sys, gsys);

    // cache observable values per state
    std::vector<std::vector<Rat>> fvals(fs.size(), std::vector<Rat>(nstates));
    for (std::size_t j = 0; j < fs.size(); ++j)
        for (std::size_t x = 0; x < nstates; ++x) fvals[j][x] = fs[j].eval_rat(sys, x);

    std::vector<Rat> acc(nstates, Rat(0));
    for (long n = 1; n <= N; ++n) {
        std::size_t slot = static_cast<std::size_t>(n % period);
        for (std::size_t x = 0; x < nstates; ++x) {
            Rat term(1);
            for (std::size_t j = 0; j < fs.size(); ++j)
                term *= fvals[j][tables[j][slot][x]];
            acc[x] += term;
        }
    }
    for (auto& v : acc) v /= N;
    return acc;
}

std::vector<std::complex<double>> lambda_complex(const DynSystem& sys,
                                                 const GSystem& gsys,
                                                 const std::vector<Observable>& fs,
                                                 long N) {
    check_average_inputs(sys, gsys, fs);
    if (!sys.finite()) throw StructuralError("per-state averages need a finite system");
    if (N < 1) throw StructuralError("N must be >= 1");

    std::size_t nstates = sys.state_count();
    long period = sys.period();
    auto tables = action_tables(sys, gsys);

    std::vector<std::vector<std::complex<double>>> fvals(
        fs.size(), std::vector<std::complex<double>>(nstates));
    for (std::size_t j = 0; j < fs.size(); ++j)
        for (std::size_t x = 0; x < nstates; ++x) fvals[j][x] = fs[j].eval_cx(sys, x);

    std::vector<std::complex<double>> acc(nstates, 0.0);
    for (long n = 1; n <= N; ++n) {
        std::size_t slot = static_cast<std::size_t>(n % period);
        for (std::size_t x = 0; x < nstates; ++x) {
            std::complex<double> term = 1.0;
            for (std::size_t j = 0; j < fs.size(); ++j)
                term *= fvals[j][tables[j][slot][x]];
            acc[x] += term;
        }
    }
    for (auto& v : acc) v /= static_cast<double>(N);
    return acc;
}

SampledAverage lambda_sampled(const DynSystem& sys, const GSystem& gsys,
                              const std::vector<Observable>& fs, long N,
                              std::size_t samples, std::uint64_t seed) {
    check_average_inputs(sys, gsys, fs);
    if (sys.finite()) throw StructuralError("sampled averages are for torus systems");
    if (N < 1 || samples < 1) throw StructuralError("N and sample count must be >= 1");

    SampledAverage out;
    out.seed = seed;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    std::size_t tdim = static_cast<std::size_t>(sys.torus_dim());
    out.points.resize(samples);
    for (auto& p : out.points) {
        p.resize(tdim);
        for (auto& c : p) c = uni(rng);
    }

    // orbit offsets p_j(n) . alpha, per j and n
    std::vector<std::vector<std::vector<double>>> offset(
        gsys.size(), std::vector<std::vector<double>>(static_cast<std::size_t>(N)));
    for (std::size_t j = 0; j < gsys.size(); ++j)
        for (long n = 1; n <= N; ++n) {
            IntMatrix g = gsys[j].eval({{"n", Int(n)}});
            for (int i = 1; i < g.dim; ++i)
                for (int jj = i + 1; jj < g.dim; ++jj)
                    if (g.at(i, jj) != 0)
                        throw StructuralError(
                            "torus rotations need first-row group elements");
            std::vector<double> off(tdim);
            for (std::size_t c = 0; c < tdim; ++c)
                off[c] = g.at(0, static_cast<int>(c) + 1).get_d() * sys.rotation()[c];
            offset[j][static_cast<std::size_t>(n - 1)] = std::move(off);
        }

    out.values.assign(samples, 0.0);
    std::vector<double> y(tdim);
    for (std::size_t s = 0; s < samples; ++s) {
        std::complex<double> acc = 0.0;
        for (long n = 1; n <= N; ++n) {
            std::complex<double> term = 1.0;
            for (std::size_t j = 0; j < gsys.size(); ++j) {
                const auto& off = offset[j][static_cast<std::size_t>(n - 1)];
                for (std::size_t c = 0; c < tdim; ++c) {
                    double v = out.points[s][c] + off[c];
                    y[c] = v - std::floor(v);
                }
                term *= fs[j].eval_point(sys, y);
            }
            acc += term;
        }
        out.values[s] = acc / static_cast<double>(N);
    }
    return out;
}

Rat l2_sq(const std::vector<Rat>& values) {
    Rat s(0);
    for (const auto& v : values) s += v * v;
    return s / static_cast<long>(values.size());
}

CharacterOracle character_oracle(const std::vector<std::vector<long>>& frequencies,
                                 const GSystem& gsys,
                                 const std::vector<double>& rotation) {
    if (frequencies.size() != gsys.size())
        throw StructuralError("need one frequency vector per sequence");
    std::size_t tdim = rotation.size();
    if (gsys.dim() != static_cast<int>(tdim) + 1)
        throw StructuralError("sequence dimension does not match the rotation");
    if (gsys.level() != 0) throw StructuralError("oracle works on level-0 systems");
    for (const auto& p : gsys.entries())
        for (int i = 1; i < p.dim(); ++i)
            for (int j = i + 1; j < p.dim(); ++j)
                if (!p.at(i, j).is_zero())
                    throw StructuralError("oracle needs first-row (abelian) sequences");

    auto vars = level_vars(0);
    CharacterOracle oracle;
    oracle.limit_freq.assign(tdim, 0);
    // P_c(n) = sum_j a_{j,c} * p_{j,c}(n); resonance means all P_c constant.
    std::vector<MultiPoly> phase(tdim, MultiPoly(vars));
    for (std::size_t j = 0; j < gsys.size(); ++j) {
        if (frequencies[j].size() != tdim)
            throw StructuralError("frequency vector dimension mismatch");
        for (std::size_t c = 0; c < tdim; ++c) {
            phase[c] = phase[c] +
                       gsys[j].at(0, static_cast<int>(c) + 1) * Int(frequencies[j][c]);
            oracle.limit_freq[c] += frequencies[j][c];
        }
    }

    unsigned max_deg = 0;
    double const_turns = 0;
    for (std::size_t c = 0; c < tdim; ++c) {
        max_deg = std::max(max_deg, phase[c].degree_in("n"));
        const_turns += phase[c].constant_term().get_d() * rotation[c];
    }

    if (max_deg == 0) {
        oracle.resonant = true;
        oracle.rate = CharacterOracle::Rate::ExactAllN;
        oracle.limit_phase = const_turns - std::floor(const_turns);
        return oracle;
    }
    oracle.resonant = false;
    oracle.limit_freq.assign(tdim, 0);
    oracle.limit_phase = 0;
    if (max_deg == 1) {
        oracle.rate = CharacterOracle::Rate::Geometric;
        double theta = 0;
        for (std::size_t c = 0; c < tdim; ++c) {
            Int lin = phase[c].eval({{"n", 1}}) - phase[c].constant_term();
            theta += lin.get_d() * rotation[c];
        }
        oracle.theta = theta;
    } else {
        oracle.rate = CharacterOracle::Rate::Equidistribution;
    }
    return oracle;
}

double CharacterOracle::rate_constant(long N) const {
    if (rate != Rate::Geometric)
        throw StructuralError("no elementary rate for this oracle result");
    std::complex<double> denom = 1.0 - unit_phase(theta);
    double mag = std::abs(denom);
    if (mag < 1e-12)
        throw StructuralError("degenerate rotation: 1 - e(theta) vanishes");
    return 2.0 / (static_cast<double>(N) * mag);
}

} // namespace ergo
