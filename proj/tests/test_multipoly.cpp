#include <doctest.h>

#include "ergo/multipoly.hpp"
#include "test_support.hpp"

using namespace ergo;
using testsupport::random_poly;

namespace {
const std::vector<std::string> NM = {"n", "m1"};

MultiPoly P(const std::string& s, std::vector<std::string> vars = NM) {
    return MultiPoly::parse(s, std::move(vars));
}
} // namespace

TEST_CASE("polynomial arithmetic") {
    CHECK(P("n + 1") * P("n - 1") == P("n^2 - 1"));
    CHECK(P("2*n + 3*m1 - 1") + P("0") == P("2*n + 3*m1 - 1"));

    // (2n + m) * n, cross-checked by integer evaluation at (n, m) = (3, 5)
    MultiPoly prod = P("2*n + m1") * P("n");
    CHECK(prod == P("2*n^2 + n*m1"));
    CHECK(prod.eval({{"n", 3}, {"m1", 5}}) == 33);

    CHECK_THROWS_AS(P("n") + MultiPoly::parse("n", {"n"}), StructuralError);
}

TEST_CASE("shift substitutes var -> var + offset") {
    CHECK(P("n^2").shift_var("n", "m1") == P("n^2 + 2*n*m1 + m1^2"));
    CHECK(P("7").shift_var("n", "m1") == P("7"));

    MultiPoly s = P("n - m1").shift_var("n", "m1");
    CHECK(s == P("n"));
    CHECK(s.eval({{"n", 2}, {"m1", 9}}) == 2);
}

TEST_CASE("shift by a constant") {
    CHECK(P("n^2").shift_var_const("n", -1) == P("n^2 - 2*n + 1"));
    CHECK(P("n^3 - n").shift_var_const("n", 2) ==
          P("n^3 + 6*n^2 + 11*n + 6"));
    CHECK(P("m1").shift_var_const("n", 5) == P("m1"));
}

TEST_CASE("shift is a ring homomorphism") {
    testsupport::Rng rng(7101);
    for (int i = 0; i < 200; ++i) {
        MultiPoly a = random_poly(rng, NM);
        MultiPoly b = random_poly(rng, NM);
        CHECK((a * b).shift_var("n", "m1") ==
              a.shift_var("n", "m1") * b.shift_var("n", "m1"));
        CHECK((a + b).shift_var("n", "m1") ==
              a.shift_var("n", "m1") + b.shift_var("n", "m1"));
    }
}

TEST_CASE("substitution and partial evaluation") {
    MultiPoly p = P("n^2*m1 - 3*n + m1");
    CHECK(p.substitute("n", 2) == P("5*m1 - 6"));
    CHECK(p.substitute("m1", 0) == P("-3*n"));
    CHECK(p.eval({{"n", 2}, {"m1", 3}}) == 9);
    CHECK_THROWS_AS(p.eval({{"n", 1}}), StructuralError);
}

TEST_CASE("independence and degrees") {
    CHECK(P("m1^2 - 4").is_independent_of("n"));
    CHECK_FALSE(P("n*m1").is_independent_of("n"));
    // m*(n+m) expands to n*m + m^2: exponent of n is 1
    MultiPoly q = P("m1") * P("n + m1");
    CHECK_FALSE(q.is_independent_of("n"));
    CHECK(q.degree_in("n") == 1);
    CHECK(q.total_degree() == 2);
}

TEST_CASE("canonical serialization") {
    CHECK(P("2*n^2 + n*m1 - 3").to_string() == "2*n^2 + n*m1 - 3");
    CHECK(P("0").to_string() == "0");
    CHECK(P("-n + 3").to_string() == "-n + 3");
    CHECK(P("m1 + n").to_string() == "n + m1");
    CHECK(P("1 + n^2").to_string() == "n^2 + 1");
    // graded order puts total degree first, then lexicographic
    CHECK((P("n*m1") + P("m1^3")).to_string() == "m1^3 + n*m1");
}

TEST_CASE("serialize-parse round trip is the identity") {
    testsupport::Rng rng(90210);
    std::vector<std::string> vars = {"n", "m1", "m2"};
    for (int i = 0; i < 300; ++i) {
        MultiPoly p = random_poly(rng, vars, 4, 7, 99);
        std::string s = p.to_string();
        MultiPoly q = MultiPoly::parse(s, vars);
        CHECK(q == p);
        CHECK(q.to_string() == s);
    }
}

TEST_CASE("parser rejects malformed input") {
    CHECK_THROWS_AS(P(""), StructuralError);
    CHECK_THROWS_AS(P("n +"), StructuralError);
    CHECK_THROWS_AS(P("x"), StructuralError);
    CHECK_THROWS_AS(P("2 ** n"), StructuralError);
}

TEST_CASE("coefficient reduction") {
    CHECK(P("5*n - 1").coeffs_mod(5) == P("4"));
    CHECK(P("7*n + 3").coeffs_mod(5) == P("2*n + 3"));
    CHECK_THROWS_AS(P("n").coeffs_mod(1), StructuralError);
}

TEST_CASE("large coefficients stay exact") {
    MultiPoly p = P("1000000007*n");
    MultiPoly q = p;
    for (int i = 0; i < 4; ++i) q = q * p;
    CHECK(q.to_string() ==
          "1000000035000000490000003430000012005000016807*n^5");
}
