#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ergo/nilseq.hpp"

namespace ergo {

enum class SystemKind { CyclicProduct, GroupTranslation, TorusRotation };

/// A measure-preserving action of integer unitriangular matrices on either a
/// finite state space (uniform measure, exact arithmetic) or a torus
/// (Lebesgue, sampled). Group elements act through reduction mod the system's
/// moduli, so the permutation representation factors through a finite group.
class DynSystem {
public:
    /// Translation action of the first-row embedding on Z/q1 x ... x Z/qs.
    static DynSystem cyclic_product(std::vector<long> moduli);
    /// Left translation of UT(dim, Z/q) on itself; dim = 3 is the finite
    /// Heisenberg group H(Z/q) with q^3 states.
    static DynSystem group_translation(long modulus, int dim = 3);
    /// Rotation x -> x + v . alpha on the torus [0,1)^s.
    static DynSystem torus_rotation(std::vector<double> rotation);

    SystemKind kind() const { return kind_; }
    bool finite() const { return kind_ != SystemKind::TorusRotation; }
    /// Matrix dimension of acting group elements.
    int dim() const { return dim_; }
    std::size_t state_count() const;
    long torus_dim() const { return static_cast<long>(rotation_.size()); }
    const std::vector<double>& rotation() const { return rotation_; }
    long modulus() const { return modulus_; }
    const std::vector<long>& moduli() const { return moduli_; }

    /// State image under the action of g (finite systems).
    std::size_t act(const IntMatrix& g, std::size_t state) const;
    /// Full permutation table of act(g, .).
    std::vector<std::uint32_t> act_permutation(const IntMatrix& g) const;
    /// Torus point image under the action of g.
    std::vector<double> act_point(const IntMatrix& g, const std::vector<double>& x) const;

    /// Entrywise moduli under which symbolic coefficients may be reduced
    /// without changing the induced action (0 = leave alone).
    std::vector<Int> canon_moduli() const;
    /// Joint n-period of evaluated sequences modulo the action (finite kinds).
    long period() const;

    /// State coordinates, for observables. Cyclic products: the tuple
    /// entries; group translation: the strictly upper entries row by row.
    std::vector<long> state_coords(std::size_t state) const;

private:
    DynSystem() = default;
    void require_first_row(const IntMatrix& g) const;

    SystemKind kind_ = SystemKind::CyclicProduct;
    int dim_ = 0;
    std::vector<long> moduli_;   // cyclic product
    long modulus_ = 0;           // group translation
    std::vector<double> rotation_;
    std::size_t states_ = 0;
};

/// Bounded observable on a system: an indicator of a state subset, a
/// character e(<a, x>), or a table of exact rational values.
class Observable {
public:
    enum class Kind { Indicator, Character, Tabulated };

    static Observable indicator(std::vector<std::size_t> states);
    static Observable character(std::vector<long> freq);
    static Observable tabulated(std::vector<Rat> values);
    static Observable constant_one();

    Kind kind() const { return kind_; }
    /// Indicator and tabulated observables take exact rational values.
    bool rational_valued() const { return kind_ != Kind::Character; }
    /// True when every value is known to lie in [-1, 1].
    bool bounded_by_one() const { return bounded_; }
    const std::vector<long>& freq() const { return freq_; }

    Rat eval_rat(const DynSystem& sys, std::size_t state) const;
    std::complex<double> eval_cx(const DynSystem& sys, std::size_t state) const;
    std::complex<double> eval_point(const DynSystem& sys,
                                    const std::vector<double>& x) const;

private:
    Kind kind_ = Kind::Indicator;
    bool bounded_ = true;
    bool all_states_ = false; // indicator of the full space (constant 1)
    std::vector<std::size_t> subset_;
    std::vector<long> freq_;
    std::vector<Rat> table_;
};

/// (1/N) sum_{n=1..N} prod_j f_j(T^{p_j(n)} x), exactly, per state.
/// Requires a finite system, level-0 sequences and rational observables.
std::vector<Rat> lambda_exact(const DynSystem& sys, const GSystem& gsys,
                              const std::vector<Observable>& fs, long N);

/// Same average with complex values (admits character observables).
std::vector<std::complex<double>> lambda_complex(const DynSystem& sys,
                                                 const GSystem& gsys,
                                                 const std::vector<Observable>& fs,
                                                 long N);

struct SampledAverage {
    std::vector<std::vector<double>> points;
    std::vector<std::complex<double>> values;
    std::uint64_t seed = 0;
};

/// Monte Carlo evaluation on the torus at `samples` seeded uniform points.
SampledAverage lambda_sampled(const DynSystem& sys, const GSystem& gsys,
                              const std::vector<Observable>& fs, long N,
                              std::size_t samples, std::uint64_t seed);

/// Exact squared L^2 norm wrt the uniform measure.
Rat l2_sq(const std::vector<Rat>& values);

struct ReportRow {
    long N = 0;
    double window_sup_dev = 0; // sup_{N <= N' <= LN} ||lambda_N - lambda_N'||_2
    double l2_norm = 0;
    std::string estimator;     // "exact" or "mc"
    double std_error = 0;      // 0 in exact mode
    bool below_epsilon = false;
};

struct AverageReport {
    std::vector<ReportRow> rows;
    double L = 2;
    double epsilon = 0;
    std::string estimator;
    std::uint64_t seed = 0;
    std::size_t samples = 0;
};

AverageReport convergence_report(const DynSystem& sys, const GSystem& gsys,
                                 const std::vector<Observable>& fs,
                                 const std::vector<long>& n_grid, double L,
                                 double epsilon, std::size_t samples = 0,
                                 std::uint64_t seed = 1);

std::string report_csv(const AverageReport& report);
std::string report_json(const AverageReport& report);
std::string report_svg(const AverageReport& report);

/// Closed-form limit for character averages under a torus rotation:
/// (1/N) sum_n e(sum_i a_i . p_i(n) alpha).
struct CharacterOracle {
    enum class Rate { ExactAllN, Geometric, Equidistribution };
    bool resonant = false;       // the n-dependence cancels
    std::vector<long> limit_freq; // A = sum_i a_i: limit is e(<A, x>) * phase
    double limit_phase = 0;      // phase angle in [0,1) turns
    Rate rate = Rate::ExactAllN;
    double theta = 0;            // geometric: envelope 2 / (N |1 - e(theta)|)
    double rate_constant(long N) const;
};

CharacterOracle character_oracle(const std::vector<std::vector<long>>& frequencies,
                                 const GSystem& gsys,
                                 const std::vector<double>& rotation);

} // namespace ergo
