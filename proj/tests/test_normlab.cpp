#include <catch2/catch_amalgamated.hpp>

#include "bihaar/bihaar.hpp"
#include "test_util.hpp"

using namespace bihaar;

namespace {
GridSpec std_grid(int N) { return GridSpec::standard(1, 1, N, N); }
}

TEST_CASE("estimate_operator_norm basics") {
    GridSpec g = std_grid(3);
    Mesh mesh = Mesh::of(g);
    ExponentTriple pqr(4, 4, 2);

    auto z = estimate_operator_norm(g, zero_operator<double>(mesh), pqr, 9, 1);
    REQUIRE(z.value == 0.0);

    // pointwise product: Hoelder gives norm exactly 1, attained by indicators
    BilinearOperator<double> prod{
        [](const GridFunction<double>& a, const GridFunction<double>& b) {
            return pointwise_product(a, b);
        },
        "product", 0};
    auto est = estimate_operator_norm(g, prod, pqr, 60, 2);
    REQUIRE(est.value <= 1.0 + 1e-9);
    REQUIRE(est.value >= 0.999);  // indicator inputs attain it
}

TEST_CASE("single-coefficient shift against a brute-force oracle") {
    GridSpec g = std_grid(1);  // 4x4 mesh: small enough to enumerate sign patterns
    Mesh mesh = Mesh::of(g);
    Cube K = make_cube(g, 1, 0, {0}), V = make_cube(g, 2, 0, {0});
    ShiftTuple t{K, V, {K, K, K}, {V, V, V}};
    auto pat = CancellationPattern::shift_pattern(2, 2);
    ShiftSpec<double> sp(g, {0, 0, 0}, {0, 0, 0}, pat, {{t, 1.0}});
    auto op = as_operator(sp);
    ExponentTriple pqr(4, 4, 2);

    // oracle: exhaustive +-1/0 values on the four cells of [0,1)^2
    double best = 0;
    for (int a = 0; a < 81; ++a)
        for (int b = 0; b < 81; ++b) {
            GridFunction<double> f1(mesh), f2(mesh);
            int ra = a, rb = b;
            for (std::int64_t c1 = 0; c1 < 2; ++c1)
                for (std::int64_t c2 = 0; c2 < 2; ++c2) {
                    f1.at(c1, c2) = static_cast<double>(ra % 3 - 1);
                    f2.at(c1, c2) = static_cast<double>(rb % 3 - 1);
                    ra /= 3;
                    rb /= 3;
                }
            double n1 = lp_norm(f1, 4), n2 = lp_norm(f2, 4);
            if (n1 <= 0 || n2 <= 0) continue;
            best = std::max(best, lp_norm(op(f1, f2), 2) / (n1 * n2));
        }
    auto est = estimate_operator_norm(g, op, pqr, 90, 5);
    REQUIRE(est.value <= best + 1e-9);
    REQUIRE(est.value >= 0.25 * best);  // the zoo finds inputs in the right ballpark
}

TEST_CASE("estimates are monotone in the trial count and deterministic") {
    GridSpec g = std_grid(3);
    auto pat = CancellationPattern::shift_pattern(1, 1);
    auto sp = random_shift_spec<double>(g, {1, 0, 0}, {0, 0, 1}, pat, 1.0, 0.2, 3);
    GridFunction<double> b = random_symbol(g, false, 4);
    auto com = commutator(as_operator(sp), 1, b);
    ExponentTriple pqr(3, 3, 1.5);
    auto e10 = estimate_operator_norm(g, com, pqr, 10, 42);
    auto e40 = estimate_operator_norm(g, com, pqr, 40, 42);
    REQUIRE(e40.value >= e10.value);
    auto again = estimate_operator_norm(g, com, pqr, 40, 42);
    REQUIRE(again.value == e40.value);
    auto threaded = estimate_operator_norm(g, com, pqr, 40, 42, 4);
    REQUIRE(threaded.value == e40.value);
}

TEST_CASE("complexity scan: constant symbol gives zero rows; base point consistency") {
    GridSpec g = std_grid(4);
    Mesh mesh = Mesh::of(g);
    GridFunction<double> bc = constant_function(mesh, 3.0);
    ExponentTriple pqr(4, 4, 2);
    auto pat = CancellationPattern::shift_pattern(0, 2);
    auto res = complexity_scan(g, default_scan_points(1), pat, bc, pqr, 30, 1, 1.0, 500, 17);
    // float pipeline: commuting a constant leaves only rounding dust
    for (const auto& pt : res.points) REQUIRE(pt.norm <= 1e-12);

    GridFunction<double> b = random_symbol(g, false, 18);
    auto res2 = complexity_scan(g, {{{0, 0, 0}, {0, 0, 0}}}, pat, b, pqr, 30, 1, 1.0, 500, 19);
    auto sp = random_shift_spec_target<double>(g, {0, 0, 0}, {0, 0, 0}, pat, 1.0, 500,
                                               mix_seed(19ULL ^ (0 * 131 + 0)));
    auto com = commutator(as_operator(sp), 1, b);
    auto direct = estimate_operator_norm(g, com, pqr, 30, mix_seed(19ULL) ^ 0xC0DE);
    // the scan augments the zoo estimate with adjoint ascent, so it can only
    // improve on the plain estimator
    REQUIRE(res2.points[0].norm >= direct.value);
}

TEST_CASE("weighted paraproduct bounds: recorded ceilings on mild weights") {
    GridSpec g = std_grid(3);
    Mesh mesh = Mesh::of(g);
    double worstA = 0, worst_a = 0, worst_phi = 0, worst_iter = 0;
    for (int t = 0; t < 10; ++t) {
        std::uint64_t s = 2000 + static_cast<std::uint64_t>(t);
        GridFunction<double> b = random_symbol(g, false, s);
        GridFunction<double> b2 = random_symbol(g, false, s ^ 0x5AULL);
        auto f = random_dyadic_function<double>(mesh, s ^ 0x11ULL);
        GridFunction<double> w = random_weight(g, 4.0, s ^ 0x22ULL);
        double nf = lp_norm(f, 2.0, &w);
        if (nf <= 1e-12) continue;
        for (int i = 1; i <= 8; ++i)
            worstA = std::max(worstA, lp_norm(paraproduct_A(i, g, b, f), 2.0, &w) / nf);
        for (int i = 1; i <= 2; ++i)
            worst_a = std::max(worst_a, lp_norm(paraproduct_a(1, i, g, b, f), 2.0, &w) / nf);
        worst_phi = std::max(worst_phi, lp_norm(phi_b(g, 2, b, f), 2.0, &w) / nf);
        // lemma 9.1 flavour: [b2, A_5(b1, .)] stays bounded
        auto inner_im = paraproduct_A(5, g, b, f);
        GridFunction<double> com = pointwise_product(b2, inner_im);
        com -= paraproduct_A(5, g, b, pointwise_product(b2, f));
        worst_iter = std::max(worst_iter, lp_norm(com, 2.0, &w) / nf);
    }
    INFO("ceilings A=" << worstA << " a=" << worst_a << " phi=" << worst_phi
                       << " iter=" << worst_iter);
    REQUIRE(worstA < 100.0);
    REQUIRE(worst_a < 100.0);
    REQUIRE(worst_phi < 100.0);
    REQUIRE(worst_iter < 200.0);
}

TEST_CASE("identity suite passes in both backends and is reproducible") {
    IdentitySuiteConfig c;
    c.depth = 3;
    c.trials = 3;
    c.seed = 11;
    auto exact_rep = identity_suite<Exact>(c);
    REQUIRE(exact_rep.passed);
    for (const auto& row : exact_rep.rows) REQUIRE(row.value == 0.0);

    auto float_rep = identity_suite<double>(c);
    REQUIRE(float_rep.passed);
    for (const auto& row : float_rep.rows)
        REQUIRE(row.value <= 1e-9 * std::max(1.0, row.reference));

    // bitwise reproducibility of the emitted CSV
    auto again = identity_suite<double>(c);
    std::ostringstream a, bb;
    write_csv(a, float_rep.rows);
    write_csv(bb, again.rows);
    REQUIRE(a.str() == bb.str());
}

TEST_CASE("run_suite: empty list, invalid spec, identity batch") {
    auto tmp = std::filesystem::temp_directory_path() / "bihaar_run_test";
    std::filesystem::remove_all(tmp);

    nlohmann::json empty = {{"experiments", nlohmann::json::array()}};
    REQUIRE(run_suite(empty, tmp) == 0);

    nlohmann::json bad = {{"experiments", {{{"kind", "estimate-norm"}, {"saturation", 2.0}}}}};
    REQUIRE(run_suite(bad, tmp) == 2);  // admissibility x 2 is rejected at construction

    nlohmann::json unknown = {{"experiments", {{{"kind", "no-such-thing"}}}}};
    REQUIRE(run_suite(unknown, tmp) == 2);

    nlohmann::json notlist = {{"experiments", 5}};
    REQUIRE(run_suite(notlist, tmp) == 2);

    nlohmann::json batch = {{"experiments",
                             {{{"kind", "verify-identities"}, {"depth", 3}, {"trials", 2},
                               {"backend", "exact"}, {"seed", 3}}}}};
    REQUIRE(run_suite(batch, tmp) == 0);
    REQUIRE(std::filesystem::exists(tmp / "summary.json"));
    REQUIRE(std::filesystem::exists(tmp / "exp0-verify-identities.csv"));
    std::filesystem::remove_all(tmp);
}

TEST_CASE("ascent adjoints reproduce the trilinear form in every slot") {
    GridSpec g = std_grid(3);
    Mesh mesh = Mesh::of(g);
    auto pat = CancellationPattern::shift_pattern(0, 2);
    auto sp = random_shift_spec<double>(g, {1, 0, 1}, {0, 1, 0}, pat, 1.0, 0.2, 7);
    GridFunction<double> b1 = random_symbol(g, false, 8), b2 = random_symbol(g, false, 9);
    auto f1 = random_dyadic_function<double>(mesh, 10);
    auto f2 = random_dyadic_function<double>(mesh, 11);
    auto f3 = random_dyadic_function<double>(mesh, 12);

    auto check = [&](const AscentOps& ops) {
        double base = inner(ops.eval(f1, f2), f3);
        REQUIRE(inner(f1, ops.adj1(f3, f2)) == Catch::Approx(base).margin(1e-12));
        REQUIRE(inner(f2, ops.adj2(f1, f3)) == Catch::Approx(base).margin(1e-12));
    };
    check(commutator_ascent_ops(sp, b1));
    check(iterated_ascent_ops(sp, b1, b2));
}

TEST_CASE("ascent never reports below the plain zoo on the same operator") {
    GridSpec g = std_grid(3);
    auto pat = CancellationPattern::shift_pattern(0, 2);
    auto sp = random_shift_spec<double>(g, {1, 1, 1}, {1, 1, 1}, pat, 1.0, 0.5, 21);
    GridFunction<double> b = random_symbol(g, false, 22);
    ExponentTriple pqr(4, 4, 2);
    auto com = commutator(as_operator(sp), 1, b);
    double zoo = estimate_operator_norm(g, com, pqr, 30, 23).value;
    double ascent = norm_ascent(g, commutator_ascent_ops(sp, b), pqr, 4, 4, 23);
    REQUIRE(ascent >= 0.8 * zoo);  // ascent from a few starts keeps pace with 30 random trials
}

TEST_CASE("random weights respect the characteristic cap") {
    GridSpec g = std_grid(3);
    for (int t = 0; t < 6; ++t) {
        auto w = random_weight(g, 4.0, 600 + static_cast<std::uint64_t>(t));
        REQUIRE(ap_characteristic(g, w, 2.0).rectangle <= 4.0 + 1e-9);
        for (double v : w.values()) REQUIRE(v > 0);
    }
}
