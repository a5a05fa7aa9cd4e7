#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include <gmpxx.h>

#include "ergo/errors.hpp"

namespace ergo {

using Int = mpz_class;
using Rat = mpq_class;

/// Canonicalized fraction. mpq_class(a, b) keeps common factors, which breaks
/// comparisons; route every literal fraction through here.
inline Rat frac(long num, long den) {
    Rat r(num, den);
    r.canonicalize();
    return r;
}
inline Rat frac(Int num, Int den) {
    Rat r(std::move(num), std::move(den));
    r.canonicalize();
    return r;
}

/// Exponent vector, one slot per variable of the owning polynomial.
using ExpVec = std::vector<unsigned>;

/// Variable names for a level-r sequence: (n, m1, ..., mr).
std::vector<std::string> level_vars(int level);

/// Sparse multivariate polynomial with exact integer coefficients over an
/// ordered variable list. Kept in normal form: no zero coefficients, all
/// exponent vectors of length |vars|. Two polynomials are equal iff their
/// variable lists and term maps are identical.
class MultiPoly {
public:
    MultiPoly() = default;
    explicit MultiPoly(std::vector<std::string> vars) : vars_(std::move(vars)) {}

    static MultiPoly constant(std::vector<std::string> vars, Int c);
    static MultiPoly variable(std::vector<std::string> vars, const std::string& name);

    const std::vector<std::string>& vars() const { return vars_; }
    const std::map<ExpVec, Int>& terms() const { return terms_; }

    bool is_zero() const { return terms_.empty(); }
    bool is_constant() const;
    /// The constant term (zero if absent).
    Int constant_term() const;

    MultiPoly operator+(const MultiPoly& o) const;
    MultiPoly operator-(const MultiPoly& o) const;
    MultiPoly operator*(const MultiPoly& o) const;
    MultiPoly operator-() const;
    MultiPoly operator*(const Int& c) const;
    bool operator==(const MultiPoly& o) const = default;

    /// Substitute var -> var + offset_var, expanded to normal form.
    /// offset_var must already be in the variable list (see with_vars).
    MultiPoly shift_var(const std::string& var, const std::string& offset_var) const;

    /// Substitute var -> var + delta for an integer delta.
    MultiPoly shift_var_const(const std::string& var, const Int& delta) const;

    /// Substitute an integer for one variable; the variable slot remains in
    /// the list (with exponent 0 everywhere).
    MultiPoly substitute(const std::string& var, const Int& value) const;

    /// Rename one variable. The target name must not collide.
    MultiPoly rename_var(const std::string& from, const std::string& to) const;

    /// Re-embed into a new variable list. Every variable carrying a nonzero
    /// exponent must exist in the new list.
    MultiPoly with_vars(const std::vector<std::string>& vars) const;

    /// Exact evaluation. The assignment must cover every variable that
    /// actually appears.
    Int eval(const std::map<std::string, Int>& assignment) const;

    bool is_independent_of(const std::string& var) const;
    /// Largest exponent of var over all terms (0 for absent variables).
    unsigned degree_in(const std::string& var) const;
    unsigned total_degree() const;

    /// Reduce every coefficient into [0, m). m >= 2.
    MultiPoly coeffs_mod(const Int& m) const;

    /// Canonical text: terms in descending graded-lexicographic order,
    /// e.g. "2*n^2 + n*m1 - 3". parse() of the output reproduces the input.
    std::string to_string() const;
    static MultiPoly parse(const std::string& text, std::vector<std::string> vars);

private:
    std::size_t var_index(const std::string& name) const;
    void add_term(const ExpVec& e, const Int& c);
    void require_same_vars(const MultiPoly& o) const;

    std::vector<std::string> vars_;
    std::map<ExpVec, Int> terms_;
};

} // namespace ergo
