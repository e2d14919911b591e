#include <catch2/catch_amalgamated.hpp>

#include "bihaar/exceptional.hpp"
#include "test_util.hpp"

using namespace bihaar;
using bihaar::testing::random_function;

namespace {
GridSpec std_grid(int N) { return GridSpec::standard(1, 1, N, N); }

std::vector<char> unit_box_mask(const Mesh& mesh) {
    std::vector<char> E(static_cast<std::size_t>(mesh.size()), 0);
    std::int64_t h1 = mesh.axis1.cells_per_dim() / 2, h2 = mesh.axis2.cells_per_dim() / 2;
    for (std::int64_t c1 = 0; c1 < h1; ++c1)
        for (std::int64_t c2 = 0; c2 < h2; ++c2)
            E[static_cast<std::size_t>(c1 * mesh.cells2() + c2)] = 1;
    return E;
}
}  // namespace

TEST_CASE("grid expectation: constants, exhaustive enumeration, monte carlo") {
    GridEnsemble ens = GridEnsemble::exhaustive(1, 1, 2, 2);
    REQUIRE(ens.size() == 16);

    Exact c = grid_expectation_scalar<Exact>(ens, [](const GridSpec&) { return Exact(7); });
    REQUIRE(c == Exact(7));

    // estimand: shift of the level-1 cube [0,1/2) in cells, per grid
    auto estimand = [](const GridSpec& g) {
        return Exact(static_cast<long>(g.shift_cells(1, 1, 0)));
    };
    Exact ex = grid_expectation_scalar<Exact>(ens, estimand);
    // hand enumeration: digit 2 contributes 1 cell with probability 1/2
    Exact hand;
    for (std::uint32_t o1 = 0; o1 < 4; ++o1)
        for (std::uint32_t o2 = 0; o2 < 4; ++o2) {
            GridSpec g = GridSpec::shifted(1, 1, 2, 2, {o1 & 1u, (o1 >> 1) & 1u},
                                           {o2 & 1u, (o2 >> 1) & 1u});
            hand += estimand(g);
        }
    hand /= Exact(16);
    REQUIRE(ex == hand);
    REQUIRE(ex == Exact(mpq_class(1, 2)));

    // Monte Carlo mean of a fair bit: within 3 standard errors of 1/2
    GridEnsemble mc = GridEnsemble::monte_carlo(1, 1, 2, 2, 4000, 17);
    double mean =
        grid_expectation_scalar<double>(mc, [](const GridSpec& g) {
            return static_cast<double>(g.digit(1, 2) & 1u);
        });
    double se = std::sqrt(0.25 / 4000.0);
    REQUIRE(std::fabs(mean - 0.5) <= 3 * se);
}

TEST_CASE("randomized square functions: zero input, pointwise domination") {
    GridSpec g0 = std_grid(3);
    Mesh mesh = Mesh::of(g0);
    GridEnsemble triv = GridEnsemble::single(g0);

    GridFunction<double> zero(mesh);
    auto sz = randomized_square_function(zero, identity_family<double>(), RandSquareKind::Rect, 0,
                                         0, triv, g0);
    for (double v : sz.values()) REQUIRE(v == 0.0);

    auto f = random_function<double>(mesh, 5);
    auto s = randomized_square_function(f, identity_family<double>(), RandSquareKind::Rect, 0, 0,
                                        triv, g0);
    // S^{0,0} f >= |Delta_{K x V} f| pointwise on each K x V (M g >= |g|)
    for (int lK = 0; lK < 3; ++lK)
        for (int lV = 0; lV < 3; ++lV)
            for (const Cube& K : cubes_at_level(g0, 1, lK))
                for (const Cube& V : cubes_at_level(g0, 2, lV)) {
                    auto blk = martingale_delta_rect(f, K, V);
                    for (std::int64_t i = 0; i < mesh.size(); ++i)
                        REQUIRE(s.values()[static_cast<std::size_t>(i)] + 1e-12 >=
                                std::fabs(blk.values()[static_cast<std::size_t>(i)]));
                }
}

TEST_CASE("lemma 8.3 flavour: randomized square function norm ceiling is finite and modest") {
    GridSpec g0 = std_grid(3);
    Mesh mesh = Mesh::of(g0);
    GridEnsemble ens = GridEnsemble::monte_carlo(1, 1, 3, 3, 6, 23);
    // unit-bmo normalised symbol
    auto braw = random_function<double>(mesh, 31);
    double nb = scalar_ops<double>::to_double(little_bmo(g0, braw));
    braw *= 1.0 / nb;
    auto fam = phi_family(1, braw);
    double worst = 0;
    for (int t = 0; t < 4; ++t) {
        auto f = random_function<double>(mesh, 600 + static_cast<std::uint64_t>(t));
        auto s = randomized_square_function(f, fam, RandSquareKind::Param1, 1, 0, ens, g0);
        double nf = lp_norm(f, 2.0);
        if (nf > 1e-12) worst = std::max(worst, lp_norm(s, 2.0) / nf);
    }
    INFO("phi-family S^1 ceiling " << worst);
    REQUIRE(worst < 50.0);
}

TEST_CASE("exceptional sets: trivial combo, monotonicity, containment") {
    GridSpec g0 = std_grid(3);
    Mesh mesh = Mesh::of(g0);
    std::vector<char> E = unit_box_mask(mesh);

    GridFunction<double> zero(mesh);
    auto triv = build_exceptional_sets(g0, zero, E, 1.5);
    REQUIRE(triv.eprime_measure == Catch::Approx(triv.e_measure));
    for (const auto& om : triv.omega)
        for (char c : om) REQUIRE(c == 0);

    auto f1 = random_function<double>(mesh, 41), f2 = random_function<double>(mesh, 42);
    GridEnsemble ens = GridEnsemble::monte_carlo(1, 1, 3, 3, 4, 5);
    auto s1 = randomized_square_function(f1, identity_family<double>(), RandSquareKind::Param2, 0,
                                         0, ens, g0);
    auto s2 = randomized_square_function(f2, identity_family<double>(), RandSquareKind::Rect, 1, 1,
                                         ens, g0);
    auto combo = pointwise_product(s1, s2);
    auto sets = build_exceptional_sets(g0, combo, E, 0.75);
    REQUIRE(sets.eprime_measure >= 0.99 * sets.e_measure);
    REQUIRE(sets.levels >= 2);
    for (int u = 0; u + 1 < sets.levels; ++u) {
        // thresholds decrease, so Omega_u subset Omega_{u+1}
        for (std::size_t i = 0; i < sets.omega[static_cast<std::size_t>(u)].size(); ++i)
            if (sets.omega[static_cast<std::size_t>(u)][i])
                REQUIRE(sets.omega[static_cast<std::size_t>(u + 1)][i]);
    }
    for (int u = 0; u < sets.levels; ++u)
        REQUIRE(triple_containment(mesh, sets.rhat[static_cast<std::size_t>(u)],
                                   sets.omega_tilde[static_cast<std::size_t>(u)]));
}

TEST_CASE("localization identity has exact residual zero") {
    GridSpec g = std_grid(4);
    Mesh mesh = Mesh::of(g);
    for (int t = 0; t < 6; ++t) {
        auto b = random_function<Exact>(mesh, 700 + static_cast<std::uint64_t>(t));
        auto f3 = random_function<Exact>(mesh, 800 + static_cast<std::uint64_t>(t));
        Cube I3 = make_cube(g, 1, 1 + t % 3, {t % 2});
        Cube J3 = make_cube(g, 2, t % 3, {(t / 2) % 2});
        REQUIRE(localization_residual(g, b, f3, I3, J3).is_zero());
    }
}

TEST_CASE("rwt experiment: degenerate inputs and banach-mode sanity") {
    RwtConfig cfg;
    cfg.depth = 3;
    cfg.seed = 9;
    cfg.ensemble_trials = 4;
    GridSpec g0 = std_grid(3);
    Mesh mesh = Mesh::of(g0);
    std::vector<char> E = unit_box_mask(mesh);
    auto f1 = random_function<double>(mesh, 91), f2 = random_function<double>(mesh, 92);
    auto b = random_function<double>(mesh, 93);
    double nb = scalar_ops<double>::to_double(little_bmo(g0, b));
    b *= 1.0 / nb;

    // zero shift family
    RwtConfig zcfg = cfg;
    zcfg.saturation = 0.0;
    auto zrep = rwt_experiment(zcfg, b, f1, f2, E);
    REQUIRE(zrep.ratio == 0.0);

    // constant symbol: the commutator vanishes identically
    GridFunction<double> bc = constant_function(mesh, 2.0);
    auto crep = rwt_experiment(cfg, bc, f1, f2, E);
    REQUIRE(crep.pairing_adversarial == Catch::Approx(0.0).margin(1e-12));

    // Banach-range sanity at p = q = 4, r = 2 with a single coefficient
    RwtConfig bcfg = cfg;
    bcfg.p = 4;
    bcfg.q = 4;
    bcfg.r = 2;
    bcfg.sparsity = 0.05;
    auto rep = rwt_experiment(bcfg, b, f1, f2, E);
    REQUIRE(rep.eprime_measure >= 0.99 * rep.e_measure);
    REQUIRE(rep.containment_ok);
    REQUIRE(rep.partition_ok);
    REQUIRE(std::isfinite(rep.ratio));
    // adversarial pairing never exceeds the random trials by construction
    for (double v : rep.pairing_random) REQUIRE(v <= rep.pairing_adversarial + 1e-12);
}
