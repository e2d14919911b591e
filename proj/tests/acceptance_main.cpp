// Acceptance suite: one criterion per function, one pass/fail line each.
// Scope is desk scale (n = m = 1); every tolerance is pinned here in code.
// Exit status is the number of failed criteria.

#include <chrono>
#include <cstring>
#include <iostream>

#include "bihaar/bihaar.hpp"

using namespace bihaar;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;
};

GridSpec std_grid(int N) { return GridSpec::standard(1, 1, N, N); }

double rel_gap(double exact_v, double float_v) {
    return std::fabs(exact_v - float_v) / std::max(1.0, std::fabs(exact_v));
}

bool within_band(const std::vector<double>& vals, double band, double* spread_out = nullptr) {
    if (vals.empty()) return false;
    double mean = 0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(vals.size());
    double spread = 0;
    for (double v : vals) spread = std::max(spread, std::fabs(v - mean));
    if (spread_out) *spread_out = mean > 0 ? spread / mean : 0.0;
    if (mean <= 0) return false;
    return spread <= band * mean;
}

// --------------------------------------------------------------------------
// 1. Expansion identities at N = 4: exact residual zero, float <= 1e-9.
// --------------------------------------------------------------------------
Outcome criterion1() {
    const int N = 4, instances = 200;
    GridSpec g = std_grid(N);
    Mesh mesh = Mesh::of(g);
    Outcome out;
    double worst_float = 0;
    int exact_checked = 0;
    for (int t = 0; t < instances; ++t) {
        std::uint64_t s = mix_seed(10'000 + static_cast<std::uint64_t>(t));
        auto be = random_dyadic_function<Exact>(mesh, s);
        auto fe = random_dyadic_function<Exact>(mesh, s ^ 0xAAULL);
        auto bd = random_dyadic_function<double>(mesh, s);
        auto fd = random_dyadic_function<double>(mesh, s ^ 0xAAULL);
        std::mt19937_64 rng(mix_seed(s ^ 0xCCULL));
        Cube I0 = make_cube(g, 1, static_cast<int>(rng() % N),
                            {static_cast<std::int32_t>(rng() % 4)});
        I0 = cubes_at_level(g, 1, I0.level)[rng() % cubes_at_level(g, 1, I0.level).size()];
        Cube J0 = cubes_at_level(g, 2, static_cast<int>(rng() % N))[rng() % 2];
        ProductExpansion<Exact> exe(g, be, fe);
        ProductExpansion<double> exd(g, bd, fd);
        for (std::uint32_t s1 : {1u, 0u})
            for (std::uint32_t s2 : {1u, 0u}) {
                HaarSymbol h1{I0, s1}, h2{J0, s2};
                if (!exe.residual(h1, h2).is_zero()) {
                    out.ok = false;
                    out.detail = "exact residual nonzero at instance " + std::to_string(t);
                    return out;
                }
                ++exact_checked;
                double scale = std::fabs(exd.lhs(h1, h2));
                for (const auto& tm : exd.terms(h1, h2)) scale = std::max(scale, std::fabs(tm.value));
                double res = std::fabs(exd.residual(h1, h2)) / std::max(1.0, scale);
                worst_float = std::max(worst_float, res);
            }
    }
    if (worst_float > 1e-9) {
        out.ok = false;
        out.detail = "float residual " + std::to_string(worst_float);
        return out;
    }
    out.detail = std::to_string(exact_checked) + " exact residuals zero, float worst " +
                 std::to_string(worst_float);
    return out;
}

// --------------------------------------------------------------------------
// 2. Commutator identities: displayed lemmas plus all protocol patterns.
// --------------------------------------------------------------------------
Outcome criterion2() {
    const int N = 4, instances = 100;
    GridSpec g = std_grid(N);
    Mesh mesh = Mesh::of(g);
    Outcome out;
    long checked = 0;
    for (int t = 0; t < instances; ++t) {
        std::uint64_t s = mix_seed(20'000 + static_cast<std::uint64_t>(t));
        auto b = random_dyadic_function<Exact>(mesh, s);
        auto f = random_dyadic_function<Exact>(mesh, s ^ 0x1ULL);
        auto gg = random_dyadic_function<Exact>(mesh, s ^ 0x2ULL);
        std::mt19937_64 rng(mix_seed(s ^ 0x3ULL));
        auto pick = [&](int param) {
            int level = static_cast<int>(rng() % static_cast<std::uint64_t>(N));
            auto cs = cubes_at_level(g, param, level);
            return cs[rng() % cs.size()];
        };
        Cube I = pick(1), Q = pick(1), J = pick(2), R = pick(2);
        ProductExpansion<Exact> ef(g, b, f), eg(g, b, gg);
        auto d1 = displayed_case1(ef, eg, I, J, Q, R);
        auto d2 = displayed_case2(ef, eg, I, J, Q, R);
        auto d3 = displayed_case3(ef, eg, I, J, Q, R);
        if (!d1.residual().is_zero() || !d2.residual().is_zero() || !d3.residual().is_zero()) {
            out.ok = false;
            out.detail = "displayed lemma residual nonzero at instance " + std::to_string(t);
            return out;
        }
        checked += 3;
        for (std::uint32_t a1 : {1u, 0u})
            for (std::uint32_t a2 : {1u, 0u})
                for (std::uint32_t b1 : {1u, 0u})
                    for (std::uint32_t b2 : {1u, 0u}) {
                        auto res = protocol_identity(ef, eg, HaarSymbol{I, a1}, HaarSymbol{J, a2},
                                                     HaarSymbol{Q, b1}, HaarSymbol{R, b2});
                        if (!res.residual().is_zero()) {
                            out.ok = false;
                            out.detail = "protocol residual nonzero at instance " + std::to_string(t);
                            return out;
                        }
                        ++checked;
                    }
    }
    out.detail = std::to_string(checked) + " identities, all exact zero";
    return out;
}

// --------------------------------------------------------------------------
// 3. Parseval: rectangular square function vs the mean-free part, exact.
// --------------------------------------------------------------------------
Outcome criterion3() {
    const int N = 4, instances = 100;
    GridSpec g = std_grid(N);
    Mesh mesh = Mesh::of(g);
    Outcome out;
    for (int t = 0; t < instances; ++t) {
        auto f = random_dyadic_function<Exact>(mesh, mix_seed(30'000 + static_cast<std::uint64_t>(t)));
        GridFunction<Exact> sq = square_function_sq(g, f, SquareKind::Rect);
        Exact lhs;
        for (const auto& v : sq.values()) lhs += v;
        lhs *= mesh.cell_measure<Exact>();  // ||S_rect f||_2^2

        auto coeffs = haar_expand(g, f);
        Exact cc_sum;
        std::vector<HaarCoefficient<Exact>> mean_layer;
        for (const auto& c : coeffs) {
            if (c.h1.cancellative() && c.h2.cancellative())
                cc_sum += c.value * c.value;
            else
                mean_layer.push_back(c);
        }
        GridFunction<Exact> m = haar_reconstruct(mesh, mean_layer);
        Exact rhs = l2_norm_sq(f - m);
        if (!(lhs == rhs) || !(lhs == cc_sum)) {
            out.ok = false;
            out.detail = "exact equality failed at instance " + std::to_string(t);
            return out;
        }
    }
    out.detail = std::to_string(instances) + " exact Parseval equalities";
    return out;
}

// --------------------------------------------------------------------------
// 4. Lemma 6.4: maximal domination, exhaustive rectangles, zero violations.
// --------------------------------------------------------------------------
Outcome criterion4() {
    const int N = 3, pairs = 50;
    GridSpec g = std_grid(N);
    Mesh mesh = Mesh::of(g);
    Outcome out;
    long checked = 0;
    for (int t = 0; t < pairs; ++t) {
        std::uint64_t s = mix_seed(40'000 + static_cast<std::uint64_t>(t));
        auto b = random_dyadic_function<Exact>(mesh, s);
        auto f = random_dyadic_function<Exact>(mesh, s ^ 0x9ULL);
        GridFunction<double> phi = phi_b(g, 2, b, f);
        for (const Cube& I : all_cubes(g, 1))
            for (const Cube& J : all_cubes(g, 2)) {
                if (!I.in_mesh() || !J.in_mesh()) continue;
                auto r = maximal_domination_check(g, b, f, I, J, 1u, 1e-10, &phi);
                ++checked;
                if (!r.ok || r.lhs_second > r.rhs_second + 1e-10) {
                    out.ok = false;
                    out.detail = "violation at instance " + std::to_string(t);
                    return out;
                }
            }
    }
    out.detail = std::to_string(checked) + " rectangle checks, zero violations";
    return out;
}

// --------------------------------------------------------------------------
// 5. Lemma 6.5: telescoping gap with the frozen N = 3 constant.
// --------------------------------------------------------------------------

// One-time brute-force maximization of gap / (max(i,j,q,r) * bmo) at N = 3
// over random, sign and staircase symbols peaked at 3.65714 (double
// staircase); frozen with two-digit headroom. The proof chain caps the same
// ratio at 2(2^n + 2^m) = 8.
constexpr double kTelescopingC = 3.66;

double telescoping_worst(const GridSpec& g, const GridFunction<double>& b) {
    CoeffTables<double> tab(g, b);
    double bmo = scalar_ops<double>::to_double(little_bmo(g, b));
    if (bmo <= 1e-14) return 0;
    const int N = g.depth1();
    // max/min of rectangle averages over descendants at fixed generation
    // pairs, per (K,V)
    double worst = 0;
    for (int lK = 0; lK <= N; ++lK)
        for (const Cube& K : cubes_at_level(g, 1, lK)) {
            if (!K.in_mesh()) continue;
            for (int lV = 0; lV <= N; ++lV)
                for (const Cube& V : cubes_at_level(g, 2, lV)) {
                    if (!V.in_mesh()) continue;
                    // gather avg extremes per (i, j)
                    std::array<std::array<std::pair<double, double>, 8>, 8> ext{};
                    for (int i = 0; lK + i <= N; ++i)
                        for (int j = 0; lV + j <= N; ++j) {
                            double mx = -1e300, mn = 1e300;
                            for (const Cube& I : descendants(K, i))
                                for (const Cube& J : descendants(V, j)) {
                                    double a = tab.avg(I, J);
                                    mx = std::max(mx, a);
                                    mn = std::min(mn, a);
                                }
                            ext[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = {mn, mx};
                        }
                    for (int i = 0; lK + i <= N; ++i)
                        for (int j = 0; lV + j <= N; ++j)
                            for (int q = 0; lK + q <= N; ++q)
                                for (int r = 0; lV + r <= N; ++r) {
                                    int mxs = std::max({i, j, q, r});
                                    if (mxs == 0) continue;
                                    auto [mn1, mx1] = ext[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
                                    auto [mn2, mx2] = ext[static_cast<std::size_t>(q)][static_cast<std::size_t>(r)];
                                    double gap = std::max(mx1 - mn2, mx2 - mn1);
                                    worst = std::max(worst, gap / (mxs * bmo));
                                }
                }
        }
    return worst;
}

Outcome criterion5() {
    Outcome out;
    // re-derive the oracle at N = 3 and confirm the frozen constant covers it
    GridSpec g3 = std_grid(3);
    Mesh mesh3 = Mesh::of(g3);
    double oracle = 0;
    for (int t = 0; t < 60; ++t) {
        auto b = random_dyadic_function<double>(mesh3, mix_seed(50'000 + static_cast<std::uint64_t>(t)));
        oracle = std::max(oracle, telescoping_worst(g3, b));
    }
    if (oracle > kTelescopingC) {
        out.ok = false;
        out.detail = "N=3 oracle " + std::to_string(oracle) + " exceeds frozen C";
        return out;
    }
    // frozen C at N = 4, exhaustive cube pairs for 50 random unit-bmo symbols
    GridSpec g4 = std_grid(4);
    Mesh mesh4 = Mesh::of(g4);
    double worst4 = 0;
    for (int t = 0; t < 50; ++t) {
        auto b = random_dyadic_function<double>(mesh4, mix_seed(51'000 + static_cast<std::uint64_t>(t)));
        double nb = scalar_ops<double>::to_double(little_bmo(g4, b));
        if (nb <= 1e-14) continue;
        b *= 1.0 / nb;
        worst4 = std::max(worst4, telescoping_worst(g4, b));
        if (worst4 > kTelescopingC) {
            out.ok = false;
            out.detail = "gap ratio " + std::to_string(worst4) + " at N=4 exceeds C=3.66";
            return out;
        }
    }
    out.detail = "oracle(N=3) " + std::to_string(oracle) + ", worst(N=4) " +
                 std::to_string(worst4) + " <= C = " + std::to_string(kTelescopingC);
    return out;
}

// --------------------------------------------------------------------------
// 6. Boundedness fits for [b,S]_1 plus depth stability.
// --------------------------------------------------------------------------
Outcome criterion6(int threads) {
    Outcome out;
    GridSpec g5 = std_grid(5);
    GridFunction<double> b = random_symbol(g5, false, 61);
    auto pat = CancellationPattern::shift_pattern(0, 2);
    auto points = default_scan_points(2);

    std::ostringstream detail;
    for (auto [p, q, r] : std::vector<std::array<double, 3>>{{4, 4, 2}, {3, 3, 1.5}}) {
        ExponentTriple pqr(p, q, r);
        auto res = complexity_scan(g5, points, pat, b, pqr, 500, 2, 1.0, 4000, 62, false, nullptr,
                                   threads);
        detail << "slope(p=" << p << ")=" << res.slope << " ";
        if (res.slope > 1.3) {
            out.ok = false;
            out.detail = "slope " + std::to_string(res.slope) + " exceeds 1.3";
            return out;
        }
    }

    // stability of the fixed-complexity norm across N in {4,5,6}: the family
    // scales with depth at a fixed inclusion probability, matching the
    // theorem's uniformity in the truncation
    std::vector<double> norms;
    for (int N : {4, 5, 6}) {
        GridSpec g = std_grid(N);
        GridFunction<double> bb = random_symbol(g, false, 61);
        ExponentTriple pqr(4, 4, 2);
        double best = 0;
        for (int sidx = 0; sidx < 2; ++sidx) {
            auto sp = random_shift_spec<double>(g, {1, 1, 1}, {1, 1, 1}, pat, 1.0, 0.25,
                                                mix_seed(63 + static_cast<std::uint64_t>(sidx)));
            auto com = commutator(as_operator(sp), 1, bb);
            best = std::max(best, estimate_operator_norm(g, com, pqr, 100, 64, threads).value);
            best = std::max(best, norm_ascent(g, commutator_ascent_ops(sp, bb), pqr, 6, 4, 65));
        }
        norms.push_back(best);
    }
    double spread = 0;
    bool stable = within_band(norms, 0.30, &spread);
    detail << "norms(N=4,5,6)=" << norms[0] << "," << norms[1] << "," << norms[2]
           << " spread=" << spread;
    if (!stable) {
        out.ok = false;
        out.detail = detail.str() + " (exceeds +-30%)";
        return out;
    }
    out.detail = detail.str();
    return out;
}

// --------------------------------------------------------------------------
// 7. Iterated commutator scan and the iterated adjoint identity.
// --------------------------------------------------------------------------
Outcome criterion7(int threads) {
    Outcome out;
    GridSpec g5 = std_grid(5);
    GridFunction<double> b1 = random_symbol(g5, false, 71);
    GridFunction<double> b2 = random_symbol(g5, false, 72);
    auto pat = CancellationPattern::shift_pattern(0, 2);
    std::ostringstream detail;
    for (auto [p, q, r] : std::vector<std::array<double, 3>>{{4, 4, 2}, {3, 3, 1.5}}) {
        ExponentTriple pqr(p, q, r);
        auto res = complexity_scan(g5, default_scan_points(2), pat, b1, pqr, 500, 2, 1.0, 4000, 73,
                                   true, &b2, threads);
        detail << "slope(p=" << p << ")=" << res.slope << " ";
        if (res.slope > 2.3) {
            out.ok = false;
            out.detail = "iterated slope " + std::to_string(res.slope) + " exceeds 2.3";
            return out;
        }
    }

    // exact iterated adjoint identity at N = 3
    GridSpec g3 = std_grid(3);
    Mesh mesh = Mesh::of(g3);
    for (int t = 0; t < 30; ++t) {
        std::uint64_t s = mix_seed(74'000 + static_cast<std::uint64_t>(t));
        auto be1 = random_dyadic_function<Exact>(mesh, s);
        auto be2 = random_dyadic_function<Exact>(mesh, s ^ 0x1ULL);
        auto f1 = random_dyadic_function<Exact>(mesh, s ^ 0x2ULL);
        auto f2 = random_dyadic_function<Exact>(mesh, s ^ 0x3ULL);
        auto f3 = random_dyadic_function<Exact>(mesh, s ^ 0x4ULL);
        auto sp = random_shift_spec<Exact>(g3, {1, 0, 1}, {0, 1, 0}, pat, 1.0, 0.2, s ^ 0x5ULL);
        auto U = as_operator(sp);
        auto Ua = as_operator(sp.adjoint(0));
        Exact lhs = inner(iterated_commutator(U, be1, be2, 1, 2)(f1, f2), f3);
        Exact r1 = inner(iterated_commutator(Ua, be1, be2, 1, 1)(f3, f2), f1);
        Exact r2 = inner(iterated_commutator(Ua, be1, be2, 1, 2)(f3, f2), f1);
        if (!(lhs - (r1 - r2)).is_zero()) {
            out.ok = false;
            out.detail = "iterated adjoint identity failed at instance " + std::to_string(t);
            return out;
        }
    }
    out.detail = detail.str() + "30 exact adjoint identities";
    return out;
}

// --------------------------------------------------------------------------
// 8. Restricted weak type construction.
// --------------------------------------------------------------------------
Outcome criterion8() {
    Outcome out;
    std::ostringstream detail;

    // localization identity, exact
    GridSpec g4 = std_grid(4);
    Mesh mesh4 = Mesh::of(g4);
    for (int t = 0; t < 50; ++t) {
        std::uint64_t s = mix_seed(80'000 + static_cast<std::uint64_t>(t));
        auto b = random_dyadic_function<Exact>(mesh4, s);
        auto f3 = random_dyadic_function<Exact>(mesh4, s ^ 0x6ULL);
        std::mt19937_64 rng(mix_seed(s ^ 0x7ULL));
        Cube I3 = cubes_at_level(g4, 1, 1 + static_cast<int>(rng() % 3))[rng() % 4];
        Cube J3 = cubes_at_level(g4, 2, static_cast<int>(rng() % 3))[rng() % 2];
        if (!localization_residual(g4, b, f3, I3, J3).is_zero()) {
            out.ok = false;
            out.detail = "localization identity failed";
            return out;
        }
    }

    for (auto [p, q, r] : std::vector<std::array<double, 3>>{{3, 3, 1.5}, {1.5, 1.5, 0.75}}) {
        std::vector<double> ratios;
        for (int N : {3, 4})
            for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
                RwtConfig cfg;
                cfg.depth = N;
                cfg.p = p;
                cfg.q = q;
                cfg.r = r;
                cfg.seed = seed;
                cfg.ensemble_trials = 6;
                cfg.sparsity = 0.25;
                cfg.k = {1, 0, 1};
                cfg.v = {0, 1, 0};
                GridSpec g = std_grid(N);
                Mesh mesh = Mesh::of(g);
                GridFunction<double> b = random_symbol(g, false, seed ^ 0x10ULL);
                auto f1 = random_dyadic_function<double>(mesh, seed ^ 0x11ULL);
                auto f2 = random_dyadic_function<double>(mesh, seed ^ 0x12ULL);
                std::vector<char> E(static_cast<std::size_t>(mesh.size()), 0);
                for (std::int64_t c1 = 0; c1 < mesh.cells1() / 2; ++c1)
                    for (std::int64_t c2 = 0; c2 < mesh.cells2() / 2; ++c2)
                        E[static_cast<std::size_t>(c1 * mesh.cells2() + c2)] = 1;
                auto rep = rwt_experiment(cfg, b, f1, f2, E);
                if (rep.eprime_measure < 0.99 * rep.e_measure) {
                    out.ok = false;
                    out.detail = "|E'| below 0.99 |E|";
                    return out;
                }
                if (!rep.containment_ok || !rep.partition_ok) {
                    out.ok = false;
                    out.detail = "containment or partition failed";
                    return out;
                }
                if (!std::isfinite(rep.ratio)) {
                    out.ok = false;
                    out.detail = "ratio not finite";
                    return out;
                }
                ratios.push_back(rep.ratio);
            }
        double spread = 0;
        bool stable = within_band(ratios, 0.50, &spread);
        detail << "r=" << r << " ratios[";
        for (double v : ratios) detail << v << " ";
        detail << "] spread=" << spread << "; ";
        if (!stable) {
            out.ok = false;
            out.detail = detail.str() + "(exceeds +-50%)";
            return out;
        }
    }
    out.detail = detail.str();
    return out;
}

// --------------------------------------------------------------------------
// 9. Weighted paraproduct ratio ceilings, stable across depth.
// --------------------------------------------------------------------------
Outcome criterion9() {
    Outcome out;
    const int trials = 200;
    // families: A1-4 (product BMO symbols), A5-8 and a^1_i (little bmo),
    // phi_b (Lemma 2.2), [b2, A5(b1,.)] and [b2, a^1_1(b1,.)] (Lemma 9.1)
    std::array<std::vector<double>, 6> ceilings;  // per family, per N
    std::ostringstream detail;
    for (int N : {3, 4, 5}) {
        GridSpec g = std_grid(N);
        Mesh mesh = Mesh::of(g);
        std::array<double, 6> ceil{};
        for (int t = 0; t < trials; ++t) {
            std::uint64_t s = mix_seed(90'000 + static_cast<std::uint64_t>(N * 1000 + t));
            GridFunction<double> bprod = random_symbol(g, true, s);
            GridFunction<double> bsmall = random_symbol(g, false, s ^ 0x21ULL);
            GridFunction<double> b2 = random_symbol(g, false, s ^ 0x22ULL);
            auto f = random_dyadic_function<double>(mesh, s ^ 0x23ULL);
            GridFunction<double> w = random_weight(g, 4.0, s ^ 0x24ULL);
            double nf = lp_norm(f, 2.0, &w);
            if (nf <= 1e-12) continue;
            auto allp = paraproduct_A_all(g, bprod, f);
            for (int i = 0; i < 4; ++i)
                ceil[0] = std::max(ceil[0], lp_norm(allp[static_cast<std::size_t>(i)], 2.0, &w) / nf);
            auto alls = paraproduct_A_all(g, bsmall, f);
            for (int i = 4; i < 8; ++i)
                ceil[1] = std::max(ceil[1], lp_norm(alls[static_cast<std::size_t>(i)], 2.0, &w) / nf);
            for (int i = 1; i <= 2; ++i)
                ceil[2] = std::max(ceil[2], lp_norm(paraproduct_a(1, i, g, bsmall, f), 2.0, &w) / nf);
            ceil[3] = std::max(ceil[3], lp_norm(phi_b(g, 2, bsmall, f), 2.0, &w) / nf);
            // Lemma 9.1 commutators
            GridFunction<double> c1 = pointwise_product(b2, alls[4]);
            c1 -= paraproduct_A(5, g, bsmall, pointwise_product(b2, f));
            ceil[4] = std::max(ceil[4], lp_norm(c1, 2.0, &w) / nf);
            GridFunction<double> c2 = pointwise_product(b2, paraproduct_a(1, 1, g, bsmall, f));
            c2 -= paraproduct_a(1, 1, g, bsmall, pointwise_product(b2, f));
            ceil[5] = std::max(ceil[5], lp_norm(c2, 2.0, &w) / nf);
        }
        for (int famn = 0; famn < 6; ++famn)
            ceilings[static_cast<std::size_t>(famn)].push_back(ceil[static_cast<std::size_t>(famn)]);
    }
    const char* names[6] = {"A1-4", "A5-8", "a1", "phi", "[b2,A5]", "[b2,a1]"};
    for (int famn = 0; famn < 6; ++famn) {
        double spread = 0;
        bool stable = within_band(ceilings[static_cast<std::size_t>(famn)], 0.30, &spread);
        detail << names[famn] << "=" << ceilings[static_cast<std::size_t>(famn)].back() << "(sp "
               << spread << ") ";
        if (!stable) {
            out.ok = false;
            out.detail = detail.str() + std::string(names[famn]) + " drifts beyond +-30%";
            return out;
        }
    }
    out.detail = detail.str();
    return out;
}

// --------------------------------------------------------------------------
// 10. Backend agreement: float within 1e-9 of exact wherever both run.
// --------------------------------------------------------------------------
Outcome criterion10() {
    const int N = 4, instances = 25;
    GridSpec g = std_grid(N);
    Mesh mesh = Mesh::of(g);
    Outcome out;
    double worst = 0;
    auto pat = CancellationPattern::shift_pattern(0, 2);
    for (int t = 0; t < instances; ++t) {
        std::uint64_t s = mix_seed(100'000 + static_cast<std::uint64_t>(t));
        auto be = random_dyadic_function<Exact>(mesh, s);
        auto fe = random_dyadic_function<Exact>(mesh, s ^ 0x31ULL);
        auto ge = random_dyadic_function<Exact>(mesh, s ^ 0x32ULL);
        auto bd = random_dyadic_function<double>(mesh, s);
        auto fd = random_dyadic_function<double>(mesh, s ^ 0x31ULL);
        auto gd = random_dyadic_function<double>(mesh, s ^ 0x32ULL);

        // pairings and averages
        CoeffTables<Exact> te(g, fe);
        CoeffTables<double> td(g, fd);
        std::mt19937_64 rng(mix_seed(s ^ 0x33ULL));
        for (int probe = 0; probe < 30; ++probe) {
            auto cs1 = all_cubes(g, 1);
            auto cs2 = all_cubes(g, 2);
            const Cube& I = cs1[rng() % cs1.size()];
            const Cube& J = cs2[rng() % cs2.size()];
            worst = std::max(worst, rel_gap(te.pairing(I, 1, J, 1).to_double(), td.pairing(I, 1, J, 1)));
            worst = std::max(worst, rel_gap(te.avg(I, J).to_double(), td.avg(I, J)));
        }

        // martingale block
        Cube K = cubes_at_level(g, 1, 1)[rng() % 4], V = cubes_at_level(g, 2, 1)[rng() % 4];
        auto blke = martingale_block(fe, K, 1, V, 2);
        auto blkd = martingale_block(fd, K, 1, V, 2);
        for (std::int64_t i = 0; i < blke.size(); ++i)
            worst = std::max(worst, rel_gap(blke.values()[static_cast<std::size_t>(i)].to_double(),
                                            blkd.values()[static_cast<std::size_t>(i)]));

        // A images
        auto Ae = paraproduct_A_all(g, be, fe);
        auto Ad = paraproduct_A_all(g, bd, fd);
        for (int i = 0; i < 8; ++i)
            for (std::int64_t c = 0; c < mesh.size(); ++c)
                worst = std::max(
                    worst,
                    rel_gap(Ae[static_cast<std::size_t>(i)].values()[static_cast<std::size_t>(c)].to_double(),
                            Ad[static_cast<std::size_t>(i)].values()[static_cast<std::size_t>(c)]));

        // shift application and commutator pairing
        auto spe = random_shift_spec<Exact>(g, {1, 0, 1}, {0, 1, 0}, pat, 0.75, 0.15, s ^ 0x34ULL);
        auto spd = random_shift_spec<double>(g, {1, 0, 1}, {0, 1, 0}, pat, 0.75, 0.15, s ^ 0x34ULL);
        auto oute = apply_shift(spe, fe, ge);
        auto outd = apply_shift(spd, fd, gd);
        for (std::int64_t c = 0; c < mesh.size(); ++c)
            worst = std::max(worst, rel_gap(oute.values()[static_cast<std::size_t>(c)].to_double(),
                                            outd.values()[static_cast<std::size_t>(c)]));
        Exact pe = inner(commutator(as_operator(spe), 1, be)(fe, ge), ge);
        double pd = inner(commutator(as_operator(spd), 1, bd)(fd, gd), gd);
        worst = std::max(worst, rel_gap(pe.to_double(), pd));

        // norms
        worst = std::max(worst, rel_gap(scalar_ops<Exact>::to_double(little_bmo(g, be)),
                                        scalar_ops<double>::to_double(little_bmo(g, bd))));
        worst = std::max(worst, rel_gap(lp_norm(fe, 2.0), lp_norm(fd, 2.0)));
        worst = std::max(worst, rel_gap(lp_norm(fe, 3.0), lp_norm(fd, 3.0)));
    }
    if (worst > 1e-9) {
        out.ok = false;
        out.detail = "worst relative gap " + std::to_string(worst);
        return out;
    }
    std::ostringstream d;
    d << "worst relative gap " << worst;
    out.detail = d.str();
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    int threads = 4;
    std::vector<int> selected;
    for (int a = 1; a < argc; ++a) {
        if (std::strncmp(argv[a], "--threads=", 10) == 0)
            threads = std::atoi(argv[a] + 10);
        else
            selected.push_back(std::atoi(argv[a]));
    }
    auto want = [&](int c) {
        return selected.empty() || std::find(selected.begin(), selected.end(), c) != selected.end();
    };

    struct Entry {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    std::vector<Entry> entries = {
        {1, "expansion identities (exact 0, float 1e-9, N=4, 200 instances)", criterion1},
        {2, "commutator identities (displayed + protocol, exact 0, N=4)", criterion2},
        {3, "Parseval for the rectangular square function (exact, 100 f)", criterion3},
        {4, "maximal domination, exhaustive rectangles at N=3", criterion4},
        {5, "bmo telescoping gap with frozen C=3.66", criterion5},
        {6, "commutator norm growth fit <= 1.3 and depth stability",
         [&]() { return criterion6(threads); }},
        {7, "iterated commutator fit <= 2.3 and exact adjoint identity",
         [&]() { return criterion7(threads); }},
        {8, "restricted weak type construction and ratio stability", criterion8},
        {9, "weighted paraproduct ceilings stable across N=3..5", criterion9},
        {10, "float pipeline within 1e-9 of exact", criterion10},
    };

    int failures = 0;
    for (auto& e : entries) {
        if (!want(e.id)) continue;
        auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = e.run();
        } catch (const std::exception& ex) {
            o.ok = false;
            o.detail = std::string("exception: ") + ex.what();
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::cout << (o.ok ? "[PASS]" : "[FAIL]") << " criterion " << e.id << ": " << e.name
                  << " -- " << o.detail << " (" << std::fixed << std::setprecision(1) << secs
                  << " s)\n"
                  << std::defaultfloat;
        std::cout.flush();
        if (!o.ok) ++failures;
    }
    return failures;
}
