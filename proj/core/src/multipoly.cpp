#include "ergo/multipoly.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <sstream>

namespace ergo {

std::vector<std::string> level_vars(int level) {
    if (level < 0) throw StructuralError("level must be >= 0");
    std::vector<std::string> v;
    v.reserve(static_cast<std::size_t>(level) + 1);
    v.push_back("n");
    for (int i = 1; i <= level; ++i) v.push_back("m" + std::to_string(i));
    return v;
}

MultiPoly MultiPoly::constant(std::vector<std::string> vars, Int c) {
    MultiPoly p(std::move(vars));
    if (c != 0) p.terms_.emplace(ExpVec(p.vars_.size(), 0), std::move(c));
    return p;
}

MultiPoly MultiPoly::variable(std::vector<std::string> vars, const std::string& name) {
    MultiPoly p(std::move(vars));
    ExpVec e(p.vars_.size(), 0);
    e[p.var_index(name)] = 1;
    p.terms_.emplace(std::move(e), Int(1));
    return p;
}

std::size_t MultiPoly::var_index(const std::string& name) const {
    auto it = std::find(vars_.begin(), vars_.end(), name);
    if (it == vars_.end())
        throw StructuralError("unknown variable '" + name + "'");
    return static_cast<std::size_t>(it - vars_.begin());
}

void MultiPoly::add_term(const ExpVec& e, const Int& c) {
    if (c == 0) return;
    auto [it, inserted] = terms_.emplace(e, c);
    if (!inserted) {
        it->second += c;
        if (it->second == 0) terms_.erase(it);
    }
}

void MultiPoly::require_same_vars(const MultiPoly& o) const {
    if (vars_ != o.vars_)
        throw StructuralError("variable list mismatch in polynomial arithmetic");
}

bool MultiPoly::is_constant() const {
    if (terms_.empty()) return true;
    if (terms_.size() > 1) return false;
    const auto& e = terms_.begin()->first;
    return std::all_of(e.begin(), e.end(), [](unsigned x) { return x == 0; });
}

Int MultiPoly::constant_term() const {
    auto it = terms_.find(ExpVec(vars_.size(), 0));
    return it == terms_.end() ? Int(0) : it->second;
}

MultiPoly MultiPoly::operator+(const MultiPoly& o) const {
    require_same_vars(o);
    MultiPoly r(*this);
    for (const auto& [e, c] : o.terms_) r.add_term(e, c);
    return r;
}

MultiPoly MultiPoly::operator-(const MultiPoly& o) const { return *this + (-o); }

MultiPoly MultiPoly::operator-() const {
    MultiPoly r(vars_);
    for (const auto& [e, c] : terms_) r.terms_.emplace(e, -c);
    return r;
}

MultiPoly MultiPoly::operator*(const Int& c) const {
    MultiPoly r(vars_);
    if (c == 0) return r;
    for (const auto& [e, k] : terms_) r.terms_.emplace(e, k * c);
    return r;
}

MultiPoly MultiPoly::operator*(const MultiPoly& o) const {
    require_same_vars(o);
    MultiPoly r(vars_);
    ExpVec e(vars_.size());
    for (const auto& [ea, ca] : terms_) {
        for (const auto& [eb, cb] : o.terms_) {
            for (std::size_t i = 0; i < e.size(); ++i) e[i] = ea[i] + eb[i];
            r.add_term(e, ca * cb);
        }
    }
    return r;
}

MultiPoly MultiPoly::shift_var(const std::string& var, const std::string& offset_var) const {
    std::size_t v = var_index(var);
    std::size_t w = var_index(offset_var);
    if (v == w) throw StructuralError("shift offset must differ from the shifted variable");
    MultiPoly r(vars_);
    for (const auto& [e, c] : terms_) {
        unsigned d = e[v];
        // (var + offset)^d expanded binomially
        Int binom = 1;
        ExpVec t(e);
        for (unsigned j = 0; j <= d; ++j) {
            t[v] = j;
            t[w] = e[w] + (d - j);
            r.add_term(t, c * binom);
            // next C(d, j+1)
            if (j < d) {
                binom *= static_cast<long>(d - j);
                binom /= static_cast<long>(j + 1);
            }
        }
    }
    return r;
}

MultiPoly MultiPoly::shift_var_const(const std::string& var, const Int& delta) const {
    std::size_t v = var_index(var);
    MultiPoly r(vars_);
    for (const auto& [e, c] : terms_) {
        unsigned d = e[v];
        Int binom = 1;
        ExpVec t(e);
        // (var + delta)^d = sum_j C(d,j) var^j delta^(d-j)
        std::vector<Int> deltas(d + 1);
        deltas[0] = 1;
        for (unsigned j = 1; j <= d; ++j) deltas[j] = deltas[j - 1] * delta;
        for (unsigned j = 0; j <= d; ++j) {
            t[v] = j;
            r.add_term(t, c * binom * deltas[d - j]);
            if (j < d) {
                binom *= static_cast<long>(d - j);
                binom /= static_cast<long>(j + 1);
            }
        }
    }
    return r;
}

MultiPoly MultiPoly::substitute(const std::string& var, const Int& value) const {
    std::size_t v = var_index(var);
    MultiPoly r(vars_);
    for (const auto& [e, c] : terms_) {
        Int pw = 1;
        for (unsigned j = 0; j < e[v]; ++j) pw *= value;
        ExpVec t(e);
        t[v] = 0;
        r.add_term(t, c * pw);
    }
    return r;
}

MultiPoly MultiPoly::rename_var(const std::string& from, const std::string& to) const {
    if (std::find(vars_.begin(), vars_.end(), to) != vars_.end())
        throw StructuralError("rename target '" + to + "' already present");
    MultiPoly r(*this);
    r.vars_[var_index(from)] = to;
    return r;
}

MultiPoly MultiPoly::with_vars(const std::vector<std::string>& vars) const {
    MultiPoly r(vars);
    std::vector<long> slot(vars_.size(), -1);
    for (std::size_t i = 0; i < vars_.size(); ++i) {
        auto it = std::find(vars.begin(), vars.end(), vars_[i]);
        if (it != vars.end()) slot[i] = it - vars.begin();
    }
    for (const auto& [e, c] : terms_) {
        ExpVec t(vars.size(), 0);
        for (std::size_t i = 0; i < e.size(); ++i) {
            if (e[i] == 0) continue;
            if (slot[i] < 0)
                throw StructuralError("variable '" + vars_[i] + "' not present in target list");
            t[static_cast<std::size_t>(slot[i])] = e[i];
        }
        r.add_term(t, c);
    }
    return r;
}

Int MultiPoly::eval(const std::map<std::string, Int>& assignment) const {
    std::vector<const Int*> point(vars_.size(), nullptr);
    for (std::size_t i = 0; i < vars_.size(); ++i) {
        auto it = assignment.find(vars_[i]);
        if (it != assignment.end()) point[i] = &it->second;
    }
    Int total = 0;
    for (const auto& [e, c] : terms_) {
        Int v = c;
        for (std::size_t i = 0; i < e.size(); ++i) {
            if (e[i] == 0) continue;
            if (!point[i])
                throw StructuralError("missing assignment for variable '" + vars_[i] + "'");
            for (unsigned j = 0; j < e[i]; ++j) v *= *point[i];
        }
        total += v;
    }
    return total;
}

bool MultiPoly::is_independent_of(const std::string& var) const {
    std::size_t v = var_index(var);
    return std::all_of(terms_.begin(), terms_.end(),
                       [v](const auto& t) { return t.first[v] == 0; });
}

unsigned MultiPoly::degree_in(const std::string& var) const {
    std::size_t v = var_index(var);
    unsigned d = 0;
    for (const auto& [e, c] : terms_) d = std::max(d, e[v]);
    return d;
}

unsigned MultiPoly::total_degree() const {
    unsigned d = 0;
    for (const auto& [e, c] : terms_)
        d = std::max(d, std::accumulate(e.begin(), e.end(), 0u));
    return d;
}

MultiPoly MultiPoly::coeffs_mod(const Int& m) const {
    if (m < 2) throw StructuralError("modulus must be >= 2");
    MultiPoly r(vars_);
    for (const auto& [e, c] : terms_) {
        Int k = c % m;
        if (k < 0) k += m;
        r.add_term(e, k);
    }
    return r;
}

namespace {

// Descending graded-lexicographic order on exponent vectors.
bool grlex_greater(const ExpVec& a, const ExpVec& b) {
    unsigned da = std::accumulate(a.begin(), a.end(), 0u);
    unsigned db = std::accumulate(b.begin(), b.end(), 0u);
    if (da != db) return da > db;
    return a > b;
}

} // namespace

std::string MultiPoly::to_string() const {
    if (terms_.empty()) return "0";
    std::vector<const std::pair<const ExpVec, Int>*> order;
    order.reserve(terms_.size());
    for (const auto& t : terms_) order.push_back(&t);
    std::sort(order.begin(), order.end(),
              [](auto* a, auto* b) { return grlex_greater(a->first, b->first); });

    std::ostringstream out;
    bool first = true;
    for (const auto* t : order) {
        const Int& c = t->second;
        bool neg = c < 0;
        Int a = neg ? Int(-c) : c;
        if (first) {
            if (neg) out << "-";
            first = false;
        } else {
            out << (neg ? " - " : " + ");
        }
        std::string mono;
        for (std::size_t i = 0; i < vars_.size(); ++i) {
            unsigned e = t->first[i];
            if (e == 0) continue;
            if (!mono.empty()) mono += "*";
            mono += vars_[i];
            if (e > 1) mono += "^" + std::to_string(e);
        }
        if (mono.empty()) {
            out << a.get_str();
        } else if (a == 1) {
            out << mono;
        } else {
            out << a.get_str() << "*" << mono;
        }
    }
    return out.str();
}

namespace {

struct Cursor {
    const std::string& s;
    std::size_t i = 0;

    void skip_ws() {
        while (i < s.size() && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    }
    bool done() {
        skip_ws();
        return i >= s.size();
    }
    char peek() {
        skip_ws();
        return i < s.size() ? s[i] : '\0';
    }
    [[noreturn]] void fail(const std::string& what) {
        throw StructuralError("polynomial parse error at offset " + std::to_string(i) +
                              ": " + what + " in '" + s + "'");
    }
};

std::string read_name(Cursor& c) {
    c.skip_ws();
    std::size_t start = c.i;
    while (c.i < c.s.size() &&
           (std::isalnum(static_cast<unsigned char>(c.s[c.i])) || c.s[c.i] == '_'))
        ++c.i;
    if (c.i == start) c.fail("expected variable name");
    return c.s.substr(start, c.i - start);
}

Int read_uint(Cursor& c) {
    c.skip_ws();
    std::size_t start = c.i;
    while (c.i < c.s.size() && std::isdigit(static_cast<unsigned char>(c.s[c.i]))) ++c.i;
    if (c.i == start) c.fail("expected integer");
    return Int(c.s.substr(start, c.i - start));
}

} // namespace

MultiPoly MultiPoly::parse(const std::string& text, std::vector<std::string> vars) {
    MultiPoly result(vars);
    Cursor c{text};
    if (c.done()) c.fail("empty input");
    bool first = true;
    while (!c.done()) {
        int sign = 1;
        char ch = c.peek();
        if (ch == '+' || ch == '-') {
            sign = (ch == '-') ? -1 : 1;
            ++c.i;
        } else if (!first) {
            c.fail("expected '+' or '-' between terms");
        }
        first = false;

        Int coef = 1;
        ExpVec e(vars.size(), 0);
        bool saw_factor = false;
        ch = c.peek();
        if (std::isdigit(static_cast<unsigned char>(ch))) {
            coef = read_uint(c);
            saw_factor = true;
        }
        while (true) {
            ch = c.peek();
            if (ch == '*') {
                ++c.i;
                ch = c.peek();
            } else if (saw_factor) {
                break;
            }
            if (!std::isalpha(static_cast<unsigned char>(ch))) {
                if (saw_factor) c.fail("expected variable after '*'");
                c.fail("expected term");
            }
            std::string name = read_name(c);
            unsigned exp = 1;
            if (c.peek() == '^') {
                ++c.i;
                Int x = read_uint(c);
                if (x < 0 || x > 1000000) c.fail("exponent out of range");
                exp = static_cast<unsigned>(x.get_ui());
            }
            e[result.var_index(name)] += exp;
            saw_factor = true;
        }
        result.add_term(e, sign < 0 ? Int(-coef) : coef);
    }
    return result;
}

} // namespace ergo
