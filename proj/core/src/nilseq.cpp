#include "ergo/nilseq.hpp"

#include <algorithm>
#include <sstream>

namespace ergo {

IntMatrix IntMatrix::identity(int dim) {
    IntMatrix m;
    m.dim = dim;
    m.a.assign(static_cast<std::size_t>(dim) * dim, Int(0));
    for (int i = 0; i < dim; ++i) m.at(i, i) = 1;
    return m;
}

IntMatrix IntMatrix::operator*(const IntMatrix& o) const {
    if (dim != o.dim) throw StructuralError("matrix dimension mismatch");
    IntMatrix r;
    r.dim = dim;
    r.a.assign(a.size(), Int(0));
    for (int i = 0; i < dim; ++i)
        for (int k = 0; k < dim; ++k) {
            const Int& x = at(i, k);
            if (x == 0) continue;
            for (int j = 0; j < dim; ++j) r.at(i, j) += x * o.at(k, j);
        }
    return r;
}

IntMatrix IntMatrix::inverse() const {
    if (!is_unitriangular())
        throw StructuralError("inverse requires a unitriangular matrix");
    // (I + N)^-1 = I - N + N^2 - ... with N strictly upper triangular.
    IntMatrix n = *this;
    for (int i = 0; i < dim; ++i) n.at(i, i) = 0;
    IntMatrix acc = IntMatrix::identity(dim);
    IntMatrix pw = IntMatrix::identity(dim);
    int sign = -1;
    for (int j = 1; j < dim; ++j) {
        pw = pw * n;
        for (std::size_t t = 0; t < acc.a.size(); ++t)
            acc.a[t] += sign > 0 ? pw.a[t] : Int(-pw.a[t]);
        sign = -sign;
    }
    return acc;
}

IntMatrix IntMatrix::mod(const Int& m) const {
    IntMatrix r = *this;
    for (auto& x : r.a) {
        x %= m;
        if (x < 0) x += m;
    }
    return r;
}

bool IntMatrix::is_unitriangular() const {
    for (int i = 0; i < dim; ++i) {
        if (at(i, i) != 1) return false;
        for (int j = 0; j < i; ++j)
            if (at(i, j) != 0) return false;
    }
    return true;
}

bool IntMatrix::operator<(const IntMatrix& o) const {
    if (dim != o.dim) return dim < o.dim;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != o.a[i]) return a[i] < o.a[i];
    return false;
}

std::string IntMatrix::to_string() const {
    std::ostringstream out;
    out << "[";
    for (int i = 0; i < dim; ++i) {
        out << (i ? ", [" : "[");
        for (int j = 0; j < dim; ++j) out << (j ? ", " : "") << at(i, j).get_str();
        out << "]";
    }
    out << "]";
    return out.str();
}

NilSeq::NilSeq(int dim, int level) : dim_(dim), level_(level), vars_(level_vars(level)) {
    if (dim < 1) throw StructuralError("matrix dimension must be >= 1");
    entries_.assign(static_cast<std::size_t>(dim) * dim, MultiPoly(vars_));
    for (int i = 0; i < dim; ++i)
        entries_[static_cast<std::size_t>(i * dim + i)] =
            MultiPoly::constant(vars_, 1);
}

NilSeq NilSeq::identity(int dim, int level) { return NilSeq(dim, level); }

NilSeq NilSeq::first_row(const std::vector<MultiPoly>& v, int level) {
    NilSeq s(static_cast<int>(v.size()) + 1, level);
    for (std::size_t i = 0; i < v.size(); ++i)
        s.set(0, static_cast<int>(i) + 1, v[i].with_vars(s.vars_));
    return s;
}

NilSeq NilSeq::heisenberg(const MultiPoly& a, const MultiPoly& b, const MultiPoly& c,
                          int level) {
    NilSeq s(3, level);
    s.set(0, 1, a.with_vars(s.vars_));
    s.set(1, 2, b.with_vars(s.vars_));
    s.set(0, 2, c.with_vars(s.vars_));
    return s;
}

void NilSeq::set(int i, int j, MultiPoly p) {
    if (i >= j) throw StructuralError("only strictly upper entries are assignable");
    if (p.vars() != vars_) p = p.with_vars(vars_);
    entries_[static_cast<std::size_t>(i * dim_ + j)] = std::move(p);
}

void NilSeq::check_compatible(const NilSeq& o) const {
    if (dim_ != o.dim_ || level_ != o.level_)
        throw StructuralError("dimension or level mismatch between sequences");
}

NilSeq NilSeq::operator*(const NilSeq& o) const {
    check_compatible(o);
    NilSeq r(dim_, level_);
    for (int i = 0; i < dim_; ++i)
        for (int j = i + 1; j < dim_; ++j) {
            MultiPoly s = at(i, j) + o.at(i, j);
            for (int k = i + 1; k < j; ++k) s = s + at(i, k) * o.at(k, j);
            r.set(i, j, std::move(s));
        }
    return r;
}

NilSeq NilSeq::inverse() const {
    // Finite alternating series for (I + N)^-1 with N strictly upper triangular:
    // every power is again strictly upper and N^dim = 0.
    auto idx = [this](int i, int j) { return static_cast<std::size_t>(i * dim_ + j); };
    std::vector<MultiPoly> nil(entries_.size(), MultiPoly(vars_));
    for (int i = 0; i < dim_; ++i)
        for (int j = i + 1; j < dim_; ++j) nil[idx(i, j)] = at(i, j);

    auto mul_strict = [&](const std::vector<MultiPoly>& a, const std::vector<MultiPoly>& b) {
        std::vector<MultiPoly> r(entries_.size(), MultiPoly(vars_));
        for (int i = 0; i < dim_; ++i)
            for (int j = i + 2; j < dim_; ++j) {
                MultiPoly s(vars_);
                for (int k = i + 1; k < j; ++k) s = s + a[idx(i, k)] * b[idx(k, j)];
                r[idx(i, j)] = std::move(s);
            }
        return r;
    };

    NilSeq acc = NilSeq::identity(dim_, level_);
    std::vector<MultiPoly> pw = nil;
    int sign = -1;
    for (int t = 1; t < dim_; ++t) {
        for (int i = 0; i < dim_; ++i)
            for (int j = i + 1; j < dim_; ++j) {
                const MultiPoly& delta = pw[idx(i, j)];
                if (delta.is_zero()) continue;
                acc.set(i, j, sign > 0 ? acc.at(i, j) + delta : acc.at(i, j) - delta);
            }
        if (t + 1 < dim_) pw = mul_strict(pw, nil);
        sign = -sign;
    }
    return acc;
}

IntMatrix NilSeq::eval(const std::map<std::string, Int>& assignment) const {
    IntMatrix m;
    m.dim = dim_;
    m.a.reserve(entries_.size());
    for (const auto& p : entries_) m.a.push_back(p.eval(assignment));
    return m;
}

IntMatrix NilSeq::eval_arg(const Int& value) const {
    if (level_ < 1)
        throw StructuralError("eval_arg requires a level >= 1 group element");
    std::map<std::string, Int> a;
    for (const auto& v : vars_) a[v] = 0;
    a["m" + std::to_string(level_)] = value;
    return eval(a);
}

NilSeq NilSeq::substitute(const std::string& var, const Int& value) const {
    NilSeq r = *this;
    for (auto& p : r.entries_) p = p.substitute(var, value);
    return r;
}

NilSeq NilSeq::shift_var(const std::string& var, const std::string& offset_var) const {
    NilSeq r = *this;
    for (auto& p : r.entries_) p = p.shift_var(var, offset_var);
    return r;
}

NilSeq NilSeq::coeffs_mod_matrix(const std::vector<Int>& moduli) const {
    if (moduli.size() != entries_.size())
        throw StructuralError("modulus matrix size mismatch");
    NilSeq r = *this;
    for (std::size_t t = 0; t < entries_.size(); ++t)
        if (moduli[t] != 0) r.entries_[t] = r.entries_[t].coeffs_mod(moduli[t]);
    return r;
}

NilSeq NilSeq::lifted() const {
    NilSeq r(dim_, level_ + 1);
    for (int i = 0; i < dim_; ++i)
        for (int j = i + 1; j < dim_; ++j) r.set(i, j, at(i, j).with_vars(r.vars_));
    return r;
}

bool NilSeq::is_identity() const {
    for (int i = 0; i < dim_; ++i)
        for (int j = i + 1; j < dim_; ++j)
            if (!at(i, j).is_zero()) return false;
    return true;
}

bool NilSeq::is_independent_of(const std::string& var) const {
    return std::all_of(entries_.begin(), entries_.end(),
                       [&](const MultiPoly& p) { return p.is_independent_of(var); });
}

unsigned NilSeq::max_degree_in(const std::string& var) const {
    unsigned d = 0;
    for (const auto& p : entries_) d = std::max(d, p.degree_in(var));
    return d;
}

std::string NilSeq::to_string() const {
    std::ostringstream out;
    out << "[";
    for (int i = 0; i < dim_; ++i) {
        out << (i ? ", [" : "[");
        for (int j = 0; j < dim_; ++j)
            out << (j ? ", " : "") << at(i, j).to_string();
        out << "]";
    }
    out << "]";
    return out.str();
}

namespace {

std::vector<std::string> split_matrix_text(const std::string& text, int dim) {
    // Split "[[e, e], [e, e]]" into dim*dim entry strings. Polynomial entries
    // contain no brackets or commas, so a flat scan suffices.
    std::vector<std::string> cells;
    std::string cur;
    int depth = 0;
    for (char ch : text) {
        if (ch == '[') {
            ++depth;
            if (depth > 2) throw StructuralError("matrix parse error: nesting too deep");
            continue;
        }
        if (ch == ']' || (ch == ',' && depth == 2)) {
            if (ch == ']') --depth;
            if (!cur.empty()) {
                cells.push_back(cur);
                cur.clear();
            }
            continue;
        }
        if (ch == ',' && depth == 1) continue;
        if (depth == 2) cur += ch;
    }
    if (depth != 0 || cells.size() != static_cast<std::size_t>(dim) * dim)
        throw StructuralError("matrix parse error: expected " + std::to_string(dim) +
                              "x" + std::to_string(dim) + " entries");
    return cells;
}

} // namespace

NilSeq NilSeq::parse(const std::string& text, int dim, int level) {
    auto cells = split_matrix_text(text, dim);
    NilSeq r(dim, level);
    auto vars = level_vars(level);
    for (int i = 0; i < dim; ++i)
        for (int j = 0; j < dim; ++j) {
            MultiPoly p = MultiPoly::parse(cells[static_cast<std::size_t>(i * dim + j)], vars);
            if (j > i) {
                r.set(i, j, std::move(p));
            } else if (i == j) {
                if (!(p.is_constant() && p.constant_term() == 1))
                    throw StructuralError("diagonal entries must be 1");
            } else if (!p.is_zero()) {
                throw StructuralError("entries below the diagonal must be 0");
            }
        }
    return r;
}

std::string NilSeq::key() const {
    return std::to_string(level_) + "|" + std::to_string(dim_) + "|" + to_string();
}

NilSeq seq_as_element(const NilSeq& p) {
    if (p.level() != 0)
        throw StructuralError("seq_as_element expects a level-0 sequence");
    NilSeq r = NilSeq::identity(p.dim(), 1);
    for (int i = 0; i < p.dim(); ++i)
        for (int j = i + 1; j < p.dim(); ++j)
            r.set(i, j, p.at(i, j).rename_var("n", "m1").with_vars(r.vars()));
    return r;
}

NilSeq element_from_matrix(const IntMatrix& g, int level) {
    if (!g.is_unitriangular())
        throw StructuralError("group elements must be unitriangular");
    NilSeq r = NilSeq::identity(g.dim, level);
    auto vars = level_vars(level);
    for (int i = 0; i < g.dim; ++i)
        for (int j = i + 1; j < g.dim; ++j)
            r.set(i, j, MultiPoly::constant(vars, g.at(i, j)));
    return r;
}

GSystem::GSystem(std::vector<NilSeq> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw StructuralError("a system needs at least one entry");
    dim_ = entries_.front().dim();
    level_ = entries_.front().level();
    for (const auto& e : entries_)
        if (e.dim() != dim_ || e.level() != level_)
            throw StructuralError("system entries must share dimension and level");
}

std::string GSystem::key() const {
    std::string k;
    for (const auto& e : entries_) {
        k += e.key();
        k += ";";
    }
    return k;
}

} // namespace ergo
