#pragma once

#include <map>
#include <string>
#include <vector>

#include "ergo/multipoly.hpp"

namespace ergo {

/// Exact integer matrix, row-major. Used for evaluated sequence values.
struct IntMatrix {
    int dim = 0;
    std::vector<Int> a;

    static IntMatrix identity(int dim);
    Int& at(int i, int j) { return a[static_cast<std::size_t>(i * dim + j)]; }
    const Int& at(int i, int j) const { return a[static_cast<std::size_t>(i * dim + j)]; }

    IntMatrix operator*(const IntMatrix& o) const;
    /// Inverse of a unitriangular matrix (exact, always integer).
    IntMatrix inverse() const;
    IntMatrix mod(const Int& m) const;
    bool is_unitriangular() const;
    bool operator==(const IntMatrix& o) const = default;
    bool operator<(const IntMatrix& o) const;
    std::string to_string() const;
};

/// A polynomial sequence into UT(d, Z) at reduction level r: a d x d
/// upper-unitriangular matrix of integer polynomials in (n, m1, ..., mr).
/// Products and inverses stay within the type.
class NilSeq {
public:
    NilSeq() = default;
    static NilSeq identity(int dim, int level);
    /// I + sum v_i E_{1,i+1}: the first-row embedding of Z^len(v).
    static NilSeq first_row(const std::vector<MultiPoly>& v, int level);
    /// UT(3) with entries (1,2)=a, (2,3)=b, (1,3)=c.
    static NilSeq heisenberg(const MultiPoly& a, const MultiPoly& b, const MultiPoly& c,
                             int level);

    int dim() const { return dim_; }
    int level() const { return level_; }
    const std::vector<std::string>& vars() const { return vars_; }
    const MultiPoly& at(int i, int j) const {
        return entries_[static_cast<std::size_t>(i * dim_ + j)];
    }
    /// Replace a strictly-upper entry, keeping the unitriangular shape.
    void set(int i, int j, MultiPoly p);

    NilSeq operator*(const NilSeq& o) const;
    NilSeq inverse() const;
    bool operator==(const NilSeq& o) const = default;
    bool operator<(const NilSeq& o) const { return key() < o.key(); }

    IntMatrix eval(const std::map<std::string, Int>& assignment) const;
    /// Evaluate a level-1 group element at its argument m1 = value.
    IntMatrix eval_arg(const Int& value) const;

    NilSeq substitute(const std::string& var, const Int& value) const;
    NilSeq shift_var(const std::string& var, const std::string& offset_var) const;
    NilSeq coeffs_mod_matrix(const std::vector<Int>& moduli) const;

    /// Relabel as a level-(r+1) element with no m_{r+1} dependence (the
    /// embedding of a group element as a constant sequence).
    NilSeq lifted() const;

    bool is_identity() const;
    bool is_independent_of(const std::string& var) const;
    unsigned max_degree_in(const std::string& var) const;

    /// Row-major bracketed canonical form, e.g. "[[1, n, 0], [0, 1, m1], [0, 0, 1]]".
    std::string to_string() const;
    static NilSeq parse(const std::string& text, int dim, int level);

    /// Stable sort/dedupe key: level, dim, then serialized entries.
    std::string key() const;

private:
    NilSeq(int dim, int level);
    void check_compatible(const NilSeq& o) const;

    int dim_ = 0;
    int level_ = 0;
    std::vector<std::string> vars_;
    std::vector<MultiPoly> entries_;
};

/// Read a level-0 sequence p(n) as the group element n -> p(n) of the
/// sequence group, represented at level 1 with argument variable m1.
NilSeq seq_as_element(const NilSeq& p);

/// Constant group element at level `level` from an integer matrix.
NilSeq element_from_matrix(const IntMatrix& g, int level);

/// Ordered tuple of polynomial sequences sharing dimension and level.
class GSystem {
public:
    GSystem() = default;
    explicit GSystem(std::vector<NilSeq> entries);

    int dim() const { return dim_; }
    int level() const { return level_; }
    std::size_t size() const { return entries_.size(); }
    const NilSeq& operator[](std::size_t i) const { return entries_[i]; }
    const std::vector<NilSeq>& entries() const { return entries_; }

    bool operator==(const GSystem& o) const = default;
    std::string key() const;

private:
    int dim_ = 0;
    int level_ = 0;
    std::vector<NilSeq> entries_;
};

} // namespace ergo
