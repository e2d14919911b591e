#pragma once

#include "bihaar/normlab.hpp"

namespace bihaar {

/// Shared random dyadic input generator (same integer stream for both
/// backends, so exact and float pipelines can be compared number by number).
template <class S>
GridFunction<S> random_dyadic_function(const Mesh& mesh, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed));
    GridFunction<S> f(mesh);
    const std::int64_t h1 = mesh.axis1.cells_per_dim() / 2, h2 = mesh.axis2.cells_per_dim() / 2;
    for (std::int64_t c1 = 0; c1 < mesh.cells1(); ++c1)
        for (std::int64_t c2 = 0; c2 < mesh.cells2(); ++c2) {
            bool inside = true;
            std::int64_t r1 = c1, r2 = c2;
            for (int i = 0; i < mesh.axis1.d; ++i) {
                if (r1 % mesh.axis1.cells_per_dim() >= h1) inside = false;
                r1 /= mesh.axis1.cells_per_dim();
            }
            for (int i = 0; i < mesh.axis2.d; ++i) {
                if (r2 % mesh.axis2.cells_per_dim() >= h2) inside = false;
                r2 /= mesh.axis2.cells_per_dim();
            }
            if (!inside) continue;
            f.at(c1, c2) = scalar_ops<S>::dyadic(static_cast<long>(rng() % 33) - 16, 4);
        }
    return f;
}

struct IdentityRecord {
    std::string id;
    std::uint64_t seed = 0;
    double residual = 0;      // absolute residual (exact residual converted)
    double scale = 0;         // largest term magnitude
    bool exact_zero = false;  // residual identically zero in the exact ring
    std::vector<double> term_magnitudes;
};

struct IdentitySuiteConfig {
    int depth = 4;
    int n = 1, m = 1;
    int trials = 25;
    std::uint64_t seed = 1;
    double float_rel_tol = 1e-9;
};

/// Expansion identities, the commutator identity protocol over all sixteen
/// slot patterns, and the adjoint dualities; exact residual zero demanded in
/// the exact backend, relative 1e-9 in float.
template <class S>
ExperimentReport identity_suite(const IdentitySuiteConfig& cfg) {
    GridSpec grid = GridSpec::standard(cfg.n, cfg.m, cfg.depth, cfg.depth);
    Mesh mesh = Mesh::of(grid);
    ExperimentReport rep;
    std::vector<IdentityRecord> records;

    auto cube_pick = [&](int param, std::uint64_t s, int maxlevel) {
        std::mt19937_64 rng(mix_seed(s));
        int level = static_cast<int>(rng() % static_cast<std::uint64_t>(maxlevel + 1));
        auto cs = cubes_at_level(grid, param, level);
        return cs[rng() % cs.size()];
    };

    bool all_ok = true;
    for (int t = 0; t < cfg.trials; ++t) {
        std::uint64_t s = mix_seed(cfg.seed + static_cast<std::uint64_t>(t) * 29ULL);
        auto b = random_dyadic_function<S>(mesh, s);
        auto f = random_dyadic_function<S>(mesh, s ^ 0xF00DULL);
        auto g = random_dyadic_function<S>(mesh, s ^ 0xBEEFULL);
        Cube I = cube_pick(1, s + 1, cfg.depth - 1), Q = cube_pick(1, s + 2, cfg.depth - 1);
        Cube J = cube_pick(2, s + 3, cfg.depth - 1), R = cube_pick(2, s + 4, cfg.depth - 1);

        ProductExpansion<S> ef(grid, b, f), eg(grid, b, g);

        auto record = [&](const std::string& id, const S& lhs, const S& residual,
                          double term_scale, std::vector<double> magnitudes = {}) {
            IdentityRecord rec;
            rec.id = id;
            rec.seed = s;
            rec.residual = std::fabs(scalar_ops<S>::to_double(residual));
            rec.scale = std::max(term_scale, std::fabs(scalar_ops<S>::to_double(lhs)));
            rec.term_magnitudes = std::move(magnitudes);
            rec.exact_zero = scalar_ops<S>::is_zero(residual);
            bool ok = scalar_ops<S>::exact
                          ? rec.exact_zero
                          : rec.residual <= cfg.float_rel_tol * std::max(1.0, rec.scale);
            if (!ok) all_ok = false;
            records.push_back(rec);
            TrialRow row;
            row.experiment = "identity:" + id;
            row.N = cfg.depth;
            row.seed = s;
            row.value = rec.residual;
            row.reference = rec.scale;
            row.ratio = rec.scale > 0 ? rec.residual / rec.scale : rec.residual;
            rep.rows.push_back(row);
        };

        // expansion identities at (I, J) for the four patterns
        for (std::uint32_t s1 : {1u, 0u})
            for (std::uint32_t s2 : {1u, 0u}) {
                HaarSymbol h1{I, s1}, h2{J, s2};
                S lhs = ef.lhs(h1, h2);
                auto terms = ef.terms(h1, h2);
                double scale = 0;
                std::vector<double> mags;
                for (const auto& tm : terms) {
                    mags.push_back(std::fabs(scalar_ops<S>::to_double(tm.value)));
                    scale = std::max(scale, mags.back());
                }
                std::string id = std::string("expansion-") + (s1 ? "c" : "0") + (s2 ? "c" : "0");
                record(id, lhs, lhs - expansion_sum(terms), scale, std::move(mags));
            }

        // all sixteen commutator slot patterns (seven symmetry classes)
        for (std::uint32_t a1 : {1u, 0u})
            for (std::uint32_t a2 : {1u, 0u})
                for (std::uint32_t b1 : {1u, 0u})
                    for (std::uint32_t b2 : {1u, 0u}) {
                        auto res = protocol_identity(ef, eg, HaarSymbol{I, a1}, HaarSymbol{J, a2},
                                                     HaarSymbol{Q, b1}, HaarSymbol{R, b2});
                        double scale = 0;
                        std::vector<double> mags;
                        for (const auto& [tag, val] : res.terms) {
                            mags.push_back(std::fabs(scalar_ops<S>::to_double(val)));
                            scale = std::max(scale, mags.back());
                        }
                        std::string id = std::string("commutator-") + (a1 ? "c" : "0") +
                                         (a2 ? "c" : "0") + (b1 ? "c" : "0") + (b2 ? "c" : "0");
                        record(id, res.lhs, res.residual(), scale, std::move(mags));
                    }

        // adjoint dualities on a random sparse shift
        auto pat = CancellationPattern::shift_pattern(0, 2);
        auto sp = random_shift_spec<S>(grid, {1, 0, 1}, {0, 1, 0}, pat, 1.0, 0.15, s ^ 0xADADULL);
        auto U = as_operator(sp);
        auto C = commutator(U, 1, b);
        auto Cadj = commutator(as_operator(sp.adjoint(0)), 1, b);
        S lhs = inner(C(f, g), ef.func());
        S rhs = inner(Cadj(ef.func(), g), f);
        record("duality-slot1", lhs, lhs + rhs, std::fabs(scalar_ops<S>::to_double(lhs)));

        S il = inner(iterated_commutator(U, b, g, 1, 2)(f, ef.func()), eg.func());
        auto Ua = as_operator(sp.adjoint(0));
        S r1 = inner(iterated_commutator(Ua, b, g, 1, 1)(eg.func(), ef.func()), f);
        S r2 = inner(iterated_commutator(Ua, b, g, 1, 2)(eg.func(), ef.func()), f);
        record("duality-iterated", il, il - (r1 - r2), std::fabs(scalar_ops<S>::to_double(il)));
    }

    nlohmann::json recs = nlohmann::json::array();
    for (const auto& r : records)
        recs.push_back({{"id", r.id},
                        {"seed", r.seed},
                        {"residual", r.residual},
                        {"scale", r.scale},
                        {"exact_zero", r.exact_zero},
                        {"term_magnitudes", r.term_magnitudes}});
    rep.summary["records"] = std::move(recs);
    rep.summary["backend"] = scalar_ops<S>::name();
    rep.summary["depth"] = cfg.depth;
    rep.summary["trials"] = cfg.trials;
    rep.summary["passed"] = all_ok;
    rep.passed = all_ok;
    return rep;
}

// ---------------------------------------------------------------------------
// Banach range suite.
// ---------------------------------------------------------------------------

struct BanachSuiteConfig {
    int depth = 3;
    int n = 1, m = 1;
    int trials = 30;
    double saturation = 1.0;
    double sparsity = 0.2;
    std::uint64_t seed = 1;
    std::vector<std::array<double, 3>> pqr = {{4, 4, 2}, {3, 3, 1.5}};
    std::array<int, 3> k{1, 0, 1}, v{0, 1, 0};
    int threads = 1;
};

/// Empirical commutator norms for all three model-operator classes across the
/// nine cancellation patterns each, with the absolute-sum certificate of every
/// constructed coefficient family.
inline ExperimentReport banach_range_suite(const BanachSuiteConfig& cfg) {
    GridSpec grid = GridSpec::standard(cfg.n, cfg.m, cfg.depth, cfg.depth);
    Mesh mesh = Mesh::of(grid);
    ExperimentReport rep;
    GridFunction<double> b = random_symbol(grid, false, cfg.seed ^ 0x11ULL);
    auto f1 = random_dyadic_function<double>(mesh, cfg.seed ^ 0x21ULL);
    auto f2 = random_dyadic_function<double>(mesh, cfg.seed ^ 0x22ULL);
    auto f3 = random_dyadic_function<double>(mesh, cfg.seed ^ 0x23ULL);

    bool ok = true;
    int duality_flags = 0;
    auto push = [&](const std::string& cls, const std::string& pattern, double p, double q,
                    double r, double value, double reference, const std::array<int, 3>& k,
                    const std::array<int, 3>& v) {
        TrialRow row;
        row.experiment = "banach-suite";
        row.cls = cls;
        row.pattern = pattern;
        row.k = k;
        row.v = v;
        row.p = p;
        row.q = q;
        row.r = r;
        row.N = cfg.depth;
        row.seed = cfg.seed;
        row.value = value;
        row.reference = reference;
        row.ratio = reference > 0 ? value / reference : 0;
        rep.rows.push_back(row);
        if (!std::isfinite(value)) ok = false;
    };

    // shifts: nine placements of the two h^0 flags
    for (int s1 = 0; s1 < 3; ++s1)
        for (int s2 = 0; s2 < 3; ++s2) {
            auto pat = CancellationPattern::shift_pattern(s1, s2);
            auto sp = random_shift_spec<double>(grid, cfg.k, cfg.v, pat, cfg.saturation,
                                                cfg.sparsity, cfg.seed + s1 * 3 + s2);
            double bb = 0;
            for (const auto& t3 : cfg.pqr) {
                if (t3[2] <= 1) continue;
                bb = std::max(bb, shift_abs_sum_ratio(sp, f1, f2, f3, t3[0], t3[1],
                                                      t3[2] / (t3[2] - 1)));
            }
            auto com = commutator(as_operator(sp), 1, b);
            for (const auto& t3 : cfg.pqr) {
                ExponentTriple pqr(t3[0], t3[1], t3[2]);
                auto est = estimate_operator_norm(grid, com, pqr, cfg.trials,
                                                  cfg.seed ^ 0x77ULL, cfg.threads);
                push("shift", pat.str(), t3[0], t3[1], t3[2], est.value, 1.0 + sp.complexity_max(),
                     cfg.k, cfg.v);
            }
            push("shift-bb", pat.str(), 0, 0, 0, bb, 0, cfg.k, cfg.v);

            // duality flag: the adjoint's empirical norm at the dual triple
            // (r', q, p'); mismatches beyond 2x either way are flagged
            ExponentTriple pr(cfg.pqr[0][0], cfg.pqr[0][1], cfg.pqr[0][2]);
            double base = estimate_operator_norm(grid, com, pr, cfg.trials, cfg.seed ^ 0x79ULL,
                                                 cfg.threads)
                              .value;
            double rp = pr.r_dual();
            auto comadj = commutator(as_operator(sp.adjoint(0)), 1, b);
            ExponentTriple dual(rp, pr.q, 1.0 / (1.0 / rp + 1.0 / pr.q));
            auto estd = estimate_operator_norm(grid, comadj, dual, cfg.trials, cfg.seed ^ 0x7aULL,
                                               cfg.threads);
            double flag = base > 0 && estd.value > 0 ? estd.value / base : 1.0;
            push("shift-duality", pat.str(), rp, pr.q, dual.r, estd.value, base, cfg.k, cfg.v);
            if (flag > 2.0 || flag < 0.5) ++duality_flags;
        }

    // partial paraproducts: h^0 slot x paraproduct form
    for (int h0 = 0; h0 < 3; ++h0)
        for (ParaForm form : {ParaForm::Plain, ParaForm::Adj1, ParaForm::Adj2}) {
            auto sp = random_partial_spec<double>(grid, 1, cfg.k, h0, form, cfg.saturation,
                                                  cfg.sparsity, cfg.seed + h0 * 31);
            double bb2 = 0;
            for (const auto& t3 : cfg.pqr) {
                if (t3[2] <= 1) continue;
                bb2 = std::max(bb2, partial_abs_sum_ratio(sp, f1, f2, f3, t3[0], t3[1],
                                                          t3[2] / (t3[2] - 1)));
            }
            push("partial-bb", "h0@" + std::to_string(h0) + "," + para_form_name(form), 0, 0, 0,
                 bb2, 0, cfg.k, {0, 0, 0});
            auto com = commutator(as_operator(sp), 1, b);
            for (const auto& t3 : cfg.pqr) {
                ExponentTriple pqr(t3[0], t3[1], t3[2]);
                auto est = estimate_operator_norm(grid, com, pqr, cfg.trials, cfg.seed ^ 0x88ULL,
                                                  cfg.threads);
                push("partial-paraproduct",
                     "h0@" + std::to_string(h0) + "," + para_form_name(form), t3[0], t3[1], t3[2],
                     est.value, 1.0 + sp.complexity_max(), cfg.k, {0, 0, 0});
            }
        }

    // full paraproducts: nine placements of the cancellative flags
    for (int s1 = 0; s1 < 3; ++s1)
        for (int s2 = 0; s2 < 3; ++s2) {
            auto pat = CancellationPattern::full_pattern(s1, s2);
            auto sp = random_full_spec<double>(grid, pat, 1.0, cfg.seed + 100 + s1 * 3 + s2);
            double bb3 = 0;
            for (const auto& t3 : cfg.pqr) {
                if (t3[2] <= 1) continue;
                bb3 = std::max(bb3, full_abs_sum_ratio(sp, f1, f2, f3, t3[0], t3[1],
                                                       t3[2] / (t3[2] - 1)));
            }
            push("full-bb", pat.str(), 0, 0, 0, bb3, 0, {0, 0, 0}, {0, 0, 0});
            auto com = commutator(as_operator(sp), 1, b);
            for (const auto& t3 : cfg.pqr) {
                ExponentTriple pqr(t3[0], t3[1], t3[2]);
                auto est = estimate_operator_norm(grid, com, pqr, cfg.trials, cfg.seed ^ 0x99ULL,
                                                  cfg.threads);
                push("full-paraproduct", pat.str(), t3[0], t3[1], t3[2], est.value, 1.0, {0, 0, 0},
                     {0, 0, 0});
            }
        }

    rep.summary["passed"] = ok;
    rep.summary["rows"] = rep.rows.size();
    rep.summary["duality_flags"] = duality_flags;
    rep.passed = ok;
    return rep;
}

// ---------------------------------------------------------------------------
// Config-driven dispatcher.
// ---------------------------------------------------------------------------

inline int run_suite(const nlohmann::json& config, const std::filesystem::path& outdir,
                     int threads = 1) {
    if (!config.contains("experiments") || !config.at("experiments").is_array()) return 2;
    bool all_ok = true;
    int index = 0;
    nlohmann::json master = nlohmann::json::array();
    try {
        for (const auto& exp : config.at("experiments")) {
            std::string kind = exp.at("kind").get<std::string>();
            std::string stem = "exp" + std::to_string(index++) + "-" + kind;
            ExperimentReport rep;
            if (kind == "verify-identities") {
                IdentitySuiteConfig c;
                c.depth = exp.value("depth", 4);
                c.trials = exp.value("trials", 25);
                c.seed = exp.value("seed", 1);
                std::string backend = exp.value("backend", "exact");
                rep = backend == "exact" ? identity_suite<Exact>(c) : identity_suite<double>(c);
            } else if (kind == "estimate-norm") {
                int depth = exp.value("depth", 3);
                GridSpec grid = GridSpec::standard(exp.value("n", 1), exp.value("m", 1), depth, depth);
                auto k = exp.value("k", std::array<int, 3>{0, 0, 0});
                auto v = exp.value("v", std::array<int, 3>{0, 0, 0});
                auto pat = CancellationPattern::shift_pattern(exp.value("h0_slot_p1", 2),
                                                              exp.value("h0_slot_p2", 2));
                auto sp = random_shift_spec<double>(grid, k, v, pat, exp.value("saturation", 1.0),
                                                    exp.value("sparsity", 0.25),
                                                    exp.value("seed", std::uint64_t{1}));
                GridFunction<double> b = random_symbol(grid, false, exp.value("seed", std::uint64_t{1}) ^ 7);
                auto com = commutator(as_operator(sp), 1, b);
                ExponentTriple pqr(exp.value("p", 4.0), exp.value("q", 4.0), exp.value("r", 2.0));
                auto est = estimate_operator_norm(grid, com, pqr, exp.value("trials", 50),
                                                  exp.value("seed", std::uint64_t{1}), threads);
                TrialRow row;
                row.experiment = "estimate-norm";
                row.cls = "shift";
                row.pattern = pat.str();
                row.k = k;
                row.v = v;
                row.p = pqr.p;
                row.q = pqr.q;
                row.r = pqr.r;
                row.N = depth;
                row.seed = exp.value("seed", std::uint64_t{1});
                row.value = est.value;
                row.reference = 1.0 + sp.complexity_max();
                row.ratio = est.value / row.reference;
                rep.rows.push_back(row);
                rep.summary["value"] = est.value;
                rep.passed = std::isfinite(est.value);
            } else if (kind == "complexity-scan") {
                int depth = exp.value("depth", 4);
                GridSpec grid = GridSpec::standard(1, 1, depth, depth);
                GridFunction<double> b = random_symbol(grid, false, exp.value("seed", std::uint64_t{1}) ^ 7);
                GridFunction<double> b2 = random_symbol(grid, false, exp.value("seed", std::uint64_t{1}) ^ 9);
                ExponentTriple pqr(exp.value("p", 4.0), exp.value("q", 4.0), exp.value("r", 2.0));
                auto pat = CancellationPattern::shift_pattern(exp.value("h0_slot_p1", 0),
                                                              exp.value("h0_slot_p2", 2));
                bool iterated = exp.value("iterated", false);
                auto res = complexity_scan(grid, default_scan_points(exp.value("cmax", 2)), pat, b,
                                           pqr, exp.value("trials", 120), exp.value("specs", 2),
                                           exp.value("saturation", 1.0),
                                           exp.value("coeffs", std::uint64_t{2000}),
                                           exp.value("seed", std::uint64_t{1}), iterated, &b2, threads);
                for (const auto& pt : res.points) {
                    TrialRow row;
                    row.experiment = iterated ? "complexity-scan-iterated" : "complexity-scan";
                    row.cls = "shift";
                    row.k = pt.k;
                    row.v = pt.v;
                    row.p = pqr.p;
                    row.q = pqr.q;
                    row.r = pqr.r;
                    row.N = depth;
                    row.seed = exp.value("seed", std::uint64_t{1});
                    row.value = pt.norm;
                    row.reference = iterated ? (1.0 + pt.cmax) * (1.0 + pt.cmax) : 1.0 + pt.cmax;
                    row.ratio = pt.norm / row.reference;
                    rep.rows.push_back(row);
                }
                rep.summary["slope"] = res.slope;
                double cap = exp.value("slope_cap", iterated ? 2.3 : 1.3);
                rep.passed = res.slope <= cap;
            } else if (kind == "rwt") {
                RwtConfig c;
                c.depth = exp.value("depth", 3);
                c.p = exp.value("p", 3.0);
                c.q = exp.value("q", 3.0);
                c.r = exp.value("r", 1.5);
                c.seed = exp.value("seed", std::uint64_t{1});
                c.sparsity = exp.value("sparsity", 0.25);
                c.ensemble_trials = exp.value("ensemble", 6);
                GridSpec grid = GridSpec::standard(1, 1, c.depth, c.depth);
                Mesh mesh = Mesh::of(grid);
                GridFunction<double> b = random_symbol(grid, false, c.seed ^ 5);
                auto f1 = random_dyadic_function<double>(mesh, c.seed ^ 6);
                auto f2 = random_dyadic_function<double>(mesh, c.seed ^ 7);
                std::vector<char> E(static_cast<std::size_t>(mesh.size()), 0);
                for (std::int64_t c1 = 0; c1 < mesh.cells1() / 2; ++c1)
                    for (std::int64_t c2 = 0; c2 < mesh.cells2() / 2; ++c2)
                        E[static_cast<std::size_t>(c1 * mesh.cells2() + c2)] = 1;
                auto r = rwt_experiment(c, b, f1, f2, E);
                TrialRow row;
                row.experiment = "rwt";
                row.cls = "shift";
                row.k = c.k;
                row.v = c.v;
                row.p = c.p;
                row.q = c.q;
                row.r = c.r;
                row.N = c.depth;
                row.seed = c.seed;
                row.value = r.pairing_adversarial;
                row.reference = r.reference;
                row.ratio = r.ratio;
                rep.rows.push_back(row);
                rep.summary = {{"C0", r.C0},
                               {"c1", r.c1},
                               {"E", r.e_measure},
                               {"Eprime", r.eprime_measure},
                               {"levels", r.levels},
                               {"containment_ok", r.containment_ok},
                               {"partition_ok", r.partition_ok},
                               {"ratio", r.ratio}};
                rep.passed = r.eprime_measure >= 0.99 * r.e_measure && r.containment_ok &&
                             r.partition_ok && std::isfinite(r.ratio);
            } else if (kind == "banach-suite") {
                BanachSuiteConfig c;
                c.depth = exp.value("depth", 3);
                c.trials = exp.value("trials", 30);
                c.seed = exp.value("seed", std::uint64_t{1});
                c.sparsity = exp.value("sparsity", 0.2);
                c.threads = threads;
                rep = banach_range_suite(c);
            } else {
                return 2;
            }
            rep.summary["kind"] = kind;
            rep.write(outdir, stem);
            master.push_back({{"kind", kind}, {"stem", stem}, {"passed", rep.passed}});
            if (!rep.passed) all_ok = false;
        }
    } catch (const nlohmann::json::exception&) {
        return 2;
    } catch (const std::invalid_argument&) {
        return 2;
    }
    std::filesystem::create_directories(outdir);
    std::ofstream master_out(outdir / "summary.json");
    master_out << nlohmann::json{{"experiments", master}, {"passed", all_ok}}.dump(2) << "\n";
    return all_ok ? 0 : 1;
}

}  // namespace bihaar
