#pragma once

#include <random>
#include <vector>

#include "ergo/multipoly.hpp"
#include "ergo/nilseq.hpp"

namespace ergo::testsupport {

using Rng = std::mt19937_64;

inline MultiPoly random_poly(Rng& rng, const std::vector<std::string>& vars,
                             unsigned max_degree = 3, int max_terms = 5,
                             long coeff_bound = 9) {
    std::uniform_int_distribution<int> nterms(0, max_terms);
    std::uniform_int_distribution<long> coeff(-coeff_bound, coeff_bound);
    std::uniform_int_distribution<unsigned> deg(0, max_degree);
    MultiPoly p(vars);
    int t = nterms(rng);
    for (int i = 0; i < t; ++i) {
        MultiPoly mono = MultiPoly::constant(vars, Int(coeff(rng)));
        unsigned total = deg(rng);
        for (unsigned d = 0; d < total; ++d) {
            std::uniform_int_distribution<std::size_t> pick(0, vars.size() - 1);
            mono = mono * MultiPoly::variable(vars, vars[pick(rng)]);
        }
        p = p + mono;
    }
    return p;
}

inline NilSeq random_nilseq(Rng& rng, int dim, int level, unsigned max_degree = 3) {
    NilSeq s = NilSeq::identity(dim, level);
    for (int i = 0; i < dim; ++i)
        for (int j = i + 1; j < dim; ++j)
            s.set(i, j, random_poly(rng, s.vars(), max_degree));
    return s;
}

inline std::map<std::string, Int> random_point(Rng& rng,
                                               const std::vector<std::string>& vars,
                                               long bound = 5) {
    std::uniform_int_distribution<long> val(-bound, bound);
    std::map<std::string, Int> a;
    for (const auto& v : vars) a[v] = Int(val(rng));
    return a;
}

} // namespace ergo::testsupport
