#include <doctest.h>

#include <cmath>
#include <complex>

#include "ergo/dynamics.hpp"
#include "test_support.hpp"

using namespace ergo;

namespace {

NilSeq row(const std::vector<std::string>& entries) {
    auto vars = level_vars(0);
    std::vector<MultiPoly> v;
    for (const auto& e : entries) v.push_back(MultiPoly::parse(e, vars));
    return NilSeq::first_row(v, 0);
}

Observable random_bounded_table(testsupport::Rng& rng, std::size_t states) {
    std::vector<Rat> vals(states);
    std::uniform_int_distribution<long> num(-8, 8);
    for (auto& v : vals) v = frac(num(rng), 8);
    return Observable::tabulated(vals);
}

Rat l2_sq_table(const DynSystem& sys, const Observable& f, const Observable& g) {
    Rat s(0);
    for (std::size_t x = 0; x < sys.state_count(); ++x) {
        Rat d = f.eval_rat(sys, x) - g.eval_rat(sys, x);
        s += d * d;
    }
    return s / static_cast<long>(sys.state_count());
}

} // namespace

TEST_CASE("system construction") {
    DynSystem cyc = DynSystem::cyclic_product({5});
    CHECK(cyc.state_count() == 5);
    CHECK(cyc.act(row({"3"}).eval({{"n", 0}}), 4) == 2); // 4 + 3 mod 5

    DynSystem heis = DynSystem::group_translation(3);
    CHECK(heis.state_count() == 27);

    DynSystem torus = DynSystem::torus_rotation({std::sqrt(2.0) - 1});
    CHECK_FALSE(torus.finite());
    CHECK(torus.dim() == 2);

    CHECK_THROWS_AS(DynSystem::cyclic_product({1}), StructuralError);
    CHECK_THROWS_AS(DynSystem::cyclic_product({}), StructuralError);
    CHECK_THROWS_AS(DynSystem::group_translation(0), StructuralError);
    CHECK_THROWS_AS(DynSystem::torus_rotation({}), StructuralError);
}

TEST_CASE("finite actions preserve the uniform measure") {
    testsupport::Rng rng(2024);
    DynSystem heis = DynSystem::group_translation(3);
    DynSystem cyc = DynSystem::cyclic_product({4, 5});
    for (int i = 0; i < 1000; ++i) {
        if (i % 2) {
            NilSeq g = testsupport::random_nilseq(rng, 3, 0, 2);
            auto pt = testsupport::random_point(rng, g.vars());
            auto perm = heis.act_permutation(g.eval(pt));
            std::vector<bool> hit(perm.size(), false);
            for (auto t : perm) hit[t] = true;
            CHECK(std::all_of(hit.begin(), hit.end(), [](bool b) { return b; }));
        } else {
            auto vars = level_vars(0);
            NilSeq g = NilSeq::first_row({testsupport::random_poly(rng, vars, 2),
                                          testsupport::random_poly(rng, vars, 2)},
                                         0);
            auto pt = testsupport::random_point(rng, vars);
            auto perm = cyc.act_permutation(g.eval(pt));
            std::vector<bool> hit(perm.size(), false);
            for (auto t : perm) hit[t] = true;
            CHECK(std::all_of(hit.begin(), hit.end(), [](bool b) { return b; }));
        }
    }
}

TEST_CASE("the action is a homomorphism") {
    testsupport::Rng rng(17);
    DynSystem heis = DynSystem::group_translation(3);
    for (int i = 0; i < 200; ++i) {
        NilSeq a = testsupport::random_nilseq(rng, 3, 0, 2);
        NilSeq b = testsupport::random_nilseq(rng, 3, 0, 2);
        auto pt = testsupport::random_point(rng, a.vars());
        IntMatrix A = a.eval(pt), B = b.eval(pt);
        for (std::size_t x = 0; x < heis.state_count(); ++x)
            CHECK(heis.act(A * B, x) == heis.act(A, heis.act(B, x)));
    }
}

TEST_CASE("constant sequences give N-independent averages") {
    DynSystem cyc = DynSystem::cyclic_product({5});
    GSystem sys({row({"2"}), row({"4"})});
    std::vector<Observable> fs = {Observable::indicator({0, 2}),
                                  Observable::indicator({1, 2, 3})};
    auto l1 = lambda_exact(cyc, sys, fs, 1);
    for (long N : {2, 3, 7, 20})
        CHECK(lambda_exact(cyc, sys, fs, N) == l1);
}

TEST_CASE("cyclic orbit average hits 1/5 exactly at N in 5Z") {
    DynSystem cyc = DynSystem::cyclic_product({5});
    GSystem sys({row({"n"})});
    std::vector<Observable> fs = {Observable::indicator({0})};
    for (long N : {5, 10, 25, 100}) {
        auto l = lambda_exact(cyc, sys, fs, N);
        for (const auto& v : l) CHECK(v == Rat(1, 5));
    }
    // off the multiples the average differs from 1/5 somewhere
    auto l7 = lambda_exact(cyc, sys, fs, 7);
    CHECK(std::any_of(l7.begin(), l7.end(), [](const Rat& v) { return v != Rat(1, 5); }));
}

TEST_CASE("level > 0 systems are rejected") {
    DynSystem cyc = DynSystem::cyclic_product({5});
    GSystem lifted({row({"n"}).lifted()});
    CHECK_THROWS_AS(lambda_exact(cyc, lifted, {Observable::indicator({0})}, 5),
                    StructuralError);
}

TEST_CASE("resonant torus characters cancel the n-dependence at every N") {
    double alpha = std::sqrt(2.0) - 1;
    DynSystem torus = DynSystem::torus_rotation({alpha});
    GSystem sys({row({"n"}), row({"2*n"})});
    std::vector<Observable> fs = {Observable::character({2}), Observable::character({-1})};
    for (long N : {1, 3, 10}) {
        auto sampled = lambda_sampled(torus, sys, fs, N, 64, 99);
        for (std::size_t s = 0; s < sampled.points.size(); ++s) {
            std::complex<double> expect =
                Observable::character({1}).eval_point(torus, sampled.points[s]);
            CHECK(std::abs(sampled.values[s] - expect) < 1e-9);
        }
    }
}

TEST_CASE("character oracle") {
    double alpha = std::sqrt(2.0) - 1;
    GSystem two({row({"n"}), row({"2*n"})});

    auto res = character_oracle({{2}, {-1}}, two, {alpha});
    CHECK(res.resonant);
    CHECK(res.limit_freq == std::vector<long>{1});
    CHECK(res.limit_phase == doctest::Approx(0.0));
    CHECK(res.rate == CharacterOracle::Rate::ExactAllN);

    GSystem one({row({"n"})});
    auto lin = character_oracle({{1}}, one, {alpha});
    CHECK_FALSE(lin.resonant);
    CHECK(lin.rate == CharacterOracle::Rate::Geometric);
    CHECK(lin.theta == doctest::Approx(alpha));
    CHECK(lin.rate_constant(10) ==
          doctest::Approx(2.0 / (10.0 * std::abs(1.0 - std::polar(1.0, 2 * std::numbers::pi * alpha)))));

    auto zero = character_oracle({{0}, {0}}, two, {alpha});
    CHECK(zero.resonant);
    CHECK(zero.limit_freq == std::vector<long>{0});
    CHECK(zero.limit_phase == doctest::Approx(0.0));

    GSystem quad({row({"n^2"})});
    auto eq = character_oracle({{1}}, quad, {alpha});
    CHECK_FALSE(eq.resonant);
    CHECK(eq.rate == CharacterOracle::Rate::Equidistribution);

    CHECK_THROWS_AS(character_oracle({{1}}, one, {alpha, alpha}), StructuralError);
}

TEST_CASE("non-resonant linear averages obey the geometric envelope") {
    double alpha = std::sqrt(2.0) - 1;
    DynSystem torus = DynSystem::torus_rotation({alpha});
    GSystem sys({row({"n"}), row({"2*n"})});
    // frequencies a = 1, b = 2: c = a + 2b = 5 != 0
    std::vector<Observable> fs = {Observable::character({1}), Observable::character({2})};
    auto oracle = character_oracle({{1}, {2}}, sys, {alpha});
    REQUIRE(oracle.rate == CharacterOracle::Rate::Geometric);
    CHECK(oracle.theta == doctest::Approx(5 * alpha));
    for (long N : {4, 16, 64, 256}) {
        auto sampled = lambda_sampled(torus, sys, fs, N, 16, 7);
        // |Lambda_N| is the same for every x: a pure exponential sum
        for (const auto& v : sampled.values)
            CHECK(std::abs(v) <= oracle.rate_constant(N) + 1e-12);
    }
}

TEST_CASE("Cesaro contraction in the last slot") {
    testsupport::Rng rng(5005);
    DynSystem cyc = DynSystem::cyclic_product({5});
    GSystem sys({row({"n"}), row({"2*n"})});
    for (int i = 0; i < 50; ++i) {
        Observable f1 = random_bounded_table(rng, 5);
        Observable f = random_bounded_table(rng, 5);
        Observable fp = random_bounded_table(rng, 5);
        auto la = lambda_exact(cyc, sys, {f1, f}, 7);
        auto lb = lambda_exact(cyc, sys, {f1, fp}, 7);
        Rat lhs(0);
        for (std::size_t x = 0; x < la.size(); ++x) {
            Rat d = la[x] - lb[x];
            lhs += d * d;
        }
        lhs /= static_cast<long>(la.size());
        CHECK(lhs <= l2_sq_table(cyc, f, fp));
    }
}

TEST_CASE("multilinearity in each slot") {
    testsupport::Rng rng(606);
    DynSystem cyc = DynSystem::cyclic_product({4, 5});
    GSystem sys({row({"n", "n"}), row({"2*n", "0"})});
    for (int i = 0; i < 25; ++i) {
        Observable f = random_bounded_table(rng, 20);
        Observable g = random_bounded_table(rng, 20);
        Observable h = random_bounded_table(rng, 20);
        Rat a(3, 2), b(-1, 4);
        // combination in slot 0
        std::vector<Rat> combo(20);
        for (std::size_t x = 0; x < 20; ++x)
            combo[x] = a * f.eval_rat(cyc, x) + b * g.eval_rat(cyc, x);
        auto lc = lambda_exact(cyc, sys, {Observable::tabulated(combo), h}, 6);
        auto lf = lambda_exact(cyc, sys, {f, h}, 6);
        auto lg = lambda_exact(cyc, sys, {g, h}, 6);
        for (std::size_t x = 0; x < 20; ++x)
            CHECK(lc[x] == a * lf[x] + b * lg[x]);
    }
}

TEST_CASE("convergence report on a constant system") {
    DynSystem cyc = DynSystem::cyclic_product({5});
    GSystem sys({row({"3"})});
    auto report = convergence_report(cyc, sys, {Observable::indicator({0, 1})},
                                     {2, 4, 8}, 2.0, 0.5);
    REQUIRE(report.rows.size() == 3);
    for (const auto& r : report.rows) {
        CHECK(r.window_sup_dev == 0.0);
        CHECK(r.std_error == 0.0);
        CHECK(r.estimator == "exact");
        CHECK(r.below_epsilon);
    }
}

TEST_CASE("window deviations obey the boundary-term envelope") {
    DynSystem cyc = DynSystem::cyclic_product({5});
    GSystem sys({row({"n"})});
    std::vector<Observable> fs = {Observable::indicator({0})};
    auto report = convergence_report(cyc, sys, fs, {5, 10, 20, 40}, 2.0, 1.0);
    for (const auto& r : report.rows)
        CHECK(r.window_sup_dev <= 2.0 / static_cast<double>(r.N) + 1e-12);

    // exact counterpart: || Lambda_N - Lambda_N' ||_2^2 <= (2/N)^2
    for (long N : {5L, 10L}) {
        auto lN = lambda_exact(cyc, sys, fs, N);
        for (long Np = N; Np <= 2 * N; ++Np) {
            auto lNp = lambda_exact(cyc, sys, fs, Np);
            Rat d(0);
            for (std::size_t x = 0; x < lN.size(); ++x) {
                Rat t = lN[x] - lNp[x];
                d += t * t;
            }
            d /= static_cast<long>(lN.size());
            CHECK(d <= Rat(4) / (N * N));
        }
    }
}

TEST_CASE("report emission") {
    AverageReport empty;
    empty.estimator = "exact";
    CHECK(report_csv(empty) == "N,window_sup_dev,l2_norm,estimator,stderr\n");

    DynSystem cyc = DynSystem::cyclic_product({5});
    GSystem sys({row({"n"})});
    auto rep = convergence_report(cyc, sys, {Observable::indicator({0})}, {5}, 2.0, 0.1);
    std::string csv = report_csv(rep);
    CHECK(csv.find("5,") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    std::string svg = report_svg(rep);
    CHECK(svg.find("<svg") == 0);
    CHECK(svg.find("polyline") != std::string::npos);
    CHECK(report_json(rep).find("\"rows\"") != std::string::npos);
}

TEST_CASE("sampled runs are seed-deterministic") {
    double alpha = std::sqrt(2.0) - 1;
    DynSystem torus = DynSystem::torus_rotation({alpha});
    GSystem sys({row({"n"})});
    std::vector<Observable> fs = {Observable::character({1})};
    auto a = lambda_sampled(torus, sys, fs, 20, 32, 1234);
    auto b = lambda_sampled(torus, sys, fs, 20, 32, 1234);
    CHECK(a.points == b.points);
    CHECK(a.values == b.values);
    auto c = lambda_sampled(torus, sys, fs, 20, 32, 999);
    CHECK(a.points != c.points);

    auto r1 = convergence_report(torus, sys, fs, {4, 8}, 2.0, 0.5, 64, 42);
    auto r2 = convergence_report(torus, sys, fs, {4, 8}, 2.0, 0.5, 64, 42);
    CHECK(report_csv(r1) == report_csv(r2));
}
