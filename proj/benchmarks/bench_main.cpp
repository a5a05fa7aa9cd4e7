#include <benchmark/benchmark.h>

#include <random>

#include "ergo/couplings.hpp"
#include "ergo/dynamics.hpp"
#include "ergo/reduction.hpp"

using namespace ergo;

namespace {

NilSeq row(const std::vector<std::string>& entries, int level = 0) {
    auto vars = level_vars(level);
    std::vector<MultiPoly> v;
    for (const auto& e : entries) v.push_back(MultiPoly::parse(e, vars));
    return NilSeq::first_row(v, level);
}

NilSeq heis(const std::string& a, const std::string& b, const std::string& c) {
    auto vars = level_vars(0);
    return NilSeq::heisenberg(MultiPoly::parse(a, vars), MultiPoly::parse(b, vars),
                              MultiPoly::parse(c, vars), 0);
}

MultiPoly dense_poly(int terms, unsigned deg) {
    std::mt19937_64 rng(42);
    auto vars = level_vars(2);
    MultiPoly p(vars);
    for (int i = 0; i < terms; ++i) {
        MultiPoly mono = MultiPoly::constant(vars, static_cast<long>(rng() % 19) - 9);
        for (unsigned d = 0; d < deg; ++d)
            mono = mono * MultiPoly::variable(vars, vars[rng() % vars.size()]);
        p = p + mono;
    }
    return p;
}

void BM_PolyMul(benchmark::State& state) {
    MultiPoly a = dense_poly(static_cast<int>(state.range(0)), 3);
    MultiPoly b = dense_poly(static_cast<int>(state.range(0)), 3);
    for (auto _ : state) benchmark::DoNotOptimize(a * b);
}
BENCHMARK(BM_PolyMul)->Arg(8)->Arg(32);

void BM_PolyShift(benchmark::State& state) {
    MultiPoly p = dense_poly(static_cast<int>(state.range(0)), 4);
    for (auto _ : state) benchmark::DoNotOptimize(p.shift_var("n", "m1"));
}
BENCHMARK(BM_PolyShift)->Arg(8)->Arg(32);

void BM_MatInverse(benchmark::State& state) {
    std::mt19937_64 rng(7);
    auto vars = level_vars(1);
    NilSeq m = NilSeq::identity(static_cast<int>(state.range(0)), 1);
    for (int i = 0; i < m.dim(); ++i)
        for (int j = i + 1; j < m.dim(); ++j) {
            MultiPoly p(vars);
            for (int tcount = 0; tcount < 3; ++tcount) {
                MultiPoly mono = MultiPoly::constant(vars, static_cast<long>(rng() % 9) - 4);
                mono = mono * MultiPoly::variable(vars, vars[rng() % vars.size()]);
                p = p + mono;
            }
            m.set(i, j, p);
        }
    for (auto _ : state) benchmark::DoNotOptimize(m.inverse());
}
BENCHMARK(BM_MatInverse)->Arg(3)->Arg(5);

void BM_ComplexityLinearPair(benchmark::State& state) {
    GSystem sys({row({"n"}), row({"2*n"})});
    for (auto _ : state) benchmark::DoNotOptimize(complexity(sys, {.max_depth = 4}));
}
BENCHMARK(BM_ComplexityLinearPair);

void BM_ComplexityHeisenberg(benchmark::State& state) {
    GSystem sys({heis("n", "0", "0"), heis("0", "n", "0")});
    for (auto _ : state) benchmark::DoNotOptimize(complexity(sys, {.max_depth = 6}));
}
BENCHMARK(BM_ComplexityHeisenberg);

void BM_LambdaExact(benchmark::State& state) {
    DynSystem cyc = DynSystem::cyclic_product({5});
    GSystem sys({row({"n"}), row({"2*n"})});
    std::vector<Observable> fs = {Observable::indicator({0, 2}),
                                  Observable::indicator({1, 3})};
    long N = state.range(0);
    for (auto _ : state) benchmark::DoNotOptimize(lambda_exact(cyc, sys, fs, N));
}
BENCHMARK(BM_LambdaExact)->Arg(100)->Arg(1000);

void BM_CouplingBuild(benchmark::State& state) {
    DynSystem cyc = DynSystem::cyclic_product({5});
    GSystem sys({row({"n"}), row({"2*n"})});
    WindowOptions opts;
    opts.n_from = 1;
    opts.n_to = 5;
    opts.close_to_subgroup = true;
    auto window = std::make_shared<IndexWindow>(build_window(cyc, sys, opts));
    std::vector<Observable> fs = {Observable::indicator({0, 2})};
    Observable last = Observable::indicator({1, 3});
    long N = state.range(0);
    for (auto _ : state)
        benchmark::DoNotOptimize(empirical_coupling(cyc, sys, fs, last, window, N));
}
BENCHMARK(BM_CouplingBuild)->Arg(50)->Arg(500);

void BM_AlphaInvariance(benchmark::State& state) {
    DynSystem hg = DynSystem::group_translation(3);
    GSystem sys({heis("n", "0", "0"), heis("0", "n", "0")});
    WindowOptions opts;
    opts.n_from = 1;
    opts.n_to = 3;
    opts.close_to_subgroup = true;
    auto window = std::make_shared<IndexWindow>(build_window(hg, sys, opts));
    std::vector<Observable> fs = {Observable::indicator({0, 1, 2, 3, 4})};
    Observable last = Observable::indicator({0, 5, 9});
    auto c = empirical_coupling(hg, sys, fs, last, window, 100);
    for (auto _ : state) benchmark::DoNotOptimize(check_alpha_invariance(c));
}
BENCHMARK(BM_AlphaInvariance);

} // namespace

BENCHMARK_MAIN();
