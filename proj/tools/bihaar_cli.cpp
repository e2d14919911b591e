// Command line front end for the dyadic bi-parameter laboratory: identity
// suites, operator norm estimation, complexity scans, the restricted weak
// type construction, and config-driven batches. Exit codes: 0 all assertions
// pass, 1 an assertion failed, 2 the configuration is invalid.

#include <iostream>

#include "CLI11.hpp"
#include "bihaar/bihaar.hpp"

using namespace bihaar;

namespace {

struct CommonOpts {
    int depth = 4;
    int n = 1, m = 1;
    std::string backend = "exact";
    std::uint64_t seed = 1;
    int trials = 25;
    int threads = 1;
    std::string out = "out";
    std::string config;
};

void add_common(CLI::App* app, CommonOpts& o) {
    app->add_option("--depth", o.depth, "dyadic depth N per parameter");
    app->add_option("--dims", [&o](const std::vector<std::string>& vals) {
            if (vals.size() != 2) return false;
            o.n = std::stoi(vals[0]);
            o.m = std::stoi(vals[1]);
            return true;
        },
        "axis dimensions n m")
        ->expected(2);
    app->add_option("--backend", o.backend, "exact|float")
        ->check(CLI::IsMember({"exact", "float"}));
    app->add_option("--seed", o.seed, "rng seed");
    app->add_option("--trials", o.trials, "trial count");
    app->add_option("--threads", o.threads, "parallel trial workers");
    app->add_option("--out", o.out, "output directory");
}

int finish(const ExperimentReport& rep, const CommonOpts& o, const std::string& stem) {
    rep.write(o.out, stem);
    std::cout << stem << (rep.passed ? ": pass" : ": FAIL") << "  (" << rep.rows.size()
              << " rows -> " << o.out << "/" << stem << ".csv)\n";
    return rep.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bihaar: bilinear bi-parameter dyadic commutator laboratory"};
    app.require_subcommand(1);

    CommonOpts o;

    auto* verify = app.add_subcommand("verify-identities",
                                      "expansion and commutator identities, exact or float");
    add_common(verify, o);

    auto* norm = app.add_subcommand("estimate-norm", "empirical norm of one commutator");
    add_common(norm, o);
    std::vector<int> kk{0, 0, 0}, vv{0, 0, 0};
    double p = 4, q = 4, r = 2, saturation = 1.0, sparsity = 0.25;
    int h0p1 = 0, h0p2 = 2;
    norm->add_option("--k", kk, "shift complexity k1 k2 k3")->expected(3);
    norm->add_option("--v", vv, "shift complexity v1 v2 v3")->expected(3);
    norm->add_option("-p", p, "exponent p");
    norm->add_option("-q", q, "exponent q");
    norm->add_option("-r", r, "exponent r");
    norm->add_option("--saturation", saturation, "coefficient saturation in [0,1]");
    norm->add_option("--sparsity", sparsity, "tuple inclusion probability");
    norm->add_option("--h0-slot-p1", h0p1, "non-cancellative slot, parameter 1");
    norm->add_option("--h0-slot-p2", h0p2, "non-cancellative slot, parameter 2");

    auto* scan = app.add_subcommand("complexity-scan", "norm growth against complexity");
    add_common(scan, o);
    int cmax = 2, specs = 2;
    bool iterated = false;
    double slope_cap = 1.3;
    scan->add_option("--cmax", cmax, "largest complexity entry");
    scan->add_option("--specs", specs, "random specs per scan point");
    scan->add_flag("--iterated", iterated, "scan [b2,[b1,S]_1]_2 instead of [b,S]_1");
    scan->add_option("--slope-cap", slope_cap, "pass threshold for the log-log slope");
    scan->add_option("-p", p, "exponent p");
    scan->add_option("-q", q, "exponent q");
    scan->add_option("-r", r, "exponent r");
    std::uint64_t target_coeffs = 2000;
    scan->add_option("--coeffs", target_coeffs, "target coefficient count per spec");

    auto* rwt = app.add_subcommand("rwt", "restricted weak type construction");
    add_common(rwt, o);
    int ensemble = 6;
    rwt->add_option("-p", p, "exponent p");
    rwt->add_option("-q", q, "exponent q");
    rwt->add_option("-r", r, "exponent r");
    rwt->add_option("--ensemble", ensemble, "Monte Carlo grid pairs");
    rwt->add_option("--sparsity", sparsity, "tuple inclusion probability");
    rwt->add_option("--k", kk, "shift complexity k1 k2 k3")->expected(3);
    rwt->add_option("--v", vv, "shift complexity v1 v2 v3")->expected(3);

    auto* banach = app.add_subcommand("banach-suite",
                                      "commutator norms across classes and patterns");
    add_common(banach, o);
    banach->add_option("--sparsity", sparsity, "tuple inclusion probability");

    auto* run = app.add_subcommand("run", "config-driven experiment batch");
    add_common(run, o);
    run->add_option("--config", o.config, "JSON experiment list")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (verify->parsed()) {
            IdentitySuiteConfig c;
            c.depth = o.depth;
            c.n = o.n;
            c.m = o.m;
            c.trials = o.trials;
            c.seed = o.seed;
            ExperimentReport rep =
                o.backend == "exact" ? identity_suite<Exact>(c) : identity_suite<double>(c);
            return finish(rep, o, "verify-identities");
        }
        if (norm->parsed()) {
            GridSpec grid = GridSpec::standard(o.n, o.m, o.depth, o.depth);
            auto pat = CancellationPattern::shift_pattern(h0p1, h0p2);
            auto sp = random_shift_spec<double>(grid, {kk[0], kk[1], kk[2]}, {vv[0], vv[1], vv[2]},
                                                pat, saturation, sparsity, o.seed);
            GridFunction<double> b = random_symbol(grid, false, o.seed ^ 7);
            auto com = commutator(as_operator(sp), 1, b);
            ExponentTriple pqr(p, q, r);
            auto est = estimate_operator_norm(grid, com, pqr, o.trials, o.seed, o.threads);
            ExperimentReport rep;
            TrialRow row;
            row.experiment = "estimate-norm";
            row.cls = "shift";
            row.pattern = pat.str();
            row.k = {kk[0], kk[1], kk[2]};
            row.v = {vv[0], vv[1], vv[2]};
            row.p = p;
            row.q = q;
            row.r = r;
            row.N = o.depth;
            row.seed = o.seed;
            row.value = est.value;
            row.reference = 1.0 + sp.complexity_max();
            row.ratio = est.value / row.reference;
            rep.rows.push_back(row);
            rep.summary = {{"value", est.value}, {"reference", row.reference}};
            rep.passed = std::isfinite(est.value);
            return finish(rep, o, "estimate-norm");
        }
        if (scan->parsed()) {
            GridSpec grid = GridSpec::standard(o.n, o.m, o.depth, o.depth);
            GridFunction<double> b = random_symbol(grid, false, o.seed ^ 7);
            GridFunction<double> b2 = random_symbol(grid, false, o.seed ^ 9);
            ExponentTriple pqr(p, q, r);
            auto pat = CancellationPattern::shift_pattern(h0p1, h0p2);
            auto res = complexity_scan(grid, default_scan_points(cmax), pat, b, pqr, o.trials,
                                       specs, saturation, target_coeffs, o.seed, iterated, &b2,
                                       o.threads);
            ExperimentReport rep;
            for (const auto& pt : res.points) {
                TrialRow row;
                row.experiment = iterated ? "complexity-scan-iterated" : "complexity-scan";
                row.cls = "shift";
                row.pattern = pat.str();
                row.k = pt.k;
                row.v = pt.v;
                row.p = p;
                row.q = q;
                row.r = r;
                row.N = o.depth;
                row.seed = o.seed;
                row.value = pt.norm;
                row.reference = 1.0 + pt.cmax;
                row.ratio = pt.norm / (1.0 + pt.cmax);
                rep.rows.push_back(row);
            }
            rep.summary = {{"slope", res.slope}, {"intercept", res.intercept}};
            rep.passed = res.slope <= slope_cap;
            std::cout << "log-log slope " << res.slope << " (cap " << slope_cap << ")\n";
            return finish(rep, o, iterated ? "complexity-scan-iterated" : "complexity-scan");
        }
        if (rwt->parsed()) {
            RwtConfig c;
            c.depth = o.depth;
            c.n = o.n;
            c.m = o.m;
            c.p = p;
            c.q = q;
            c.r = r;
            c.k = {kk[0], kk[1], kk[2]};
            c.v = {vv[0], vv[1], vv[2]};
            c.seed = o.seed;
            c.sparsity = sparsity;
            c.ensemble_trials = ensemble;
            GridSpec grid = GridSpec::standard(c.n, c.m, c.depth, c.depth);
            Mesh mesh = Mesh::of(grid);
            GridFunction<double> b = random_symbol(grid, false, c.seed ^ 5);
            auto f1 = random_dyadic_function<double>(mesh, c.seed ^ 6);
            auto f2 = random_dyadic_function<double>(mesh, c.seed ^ 7);
            std::vector<char> E(static_cast<std::size_t>(mesh.size()), 0);
            for (std::int64_t c1 = 0; c1 < mesh.cells1() / 2; ++c1)
                for (std::int64_t c2 = 0; c2 < mesh.cells2() / 2; ++c2)
                    E[static_cast<std::size_t>(c1 * mesh.cells2() + c2)] = 1;
            auto rr = rwt_experiment(c, b, f1, f2, E);
            ExperimentReport rep;
            TrialRow row;
            row.experiment = "rwt";
            row.cls = "shift";
            row.k = c.k;
            row.v = c.v;
            row.p = p;
            row.q = q;
            row.r = r;
            row.N = o.depth;
            row.seed = o.seed;
            row.value = rr.pairing_adversarial;
            row.reference = rr.reference;
            row.ratio = rr.ratio;
            rep.rows.push_back(row);
            nlohmann::json per_u = nlohmann::json::array();
            for (const auto& u : rr.per_u)
                per_u.push_back({{"omega", u[0]}, {"omega_tilde", u[1]}, {"rhat", u[2]}, {"rdisj", u[3]}});
            rep.summary = {{"C0", rr.C0},           {"c1", rr.c1},
                           {"E", rr.e_measure},     {"Eprime", rr.eprime_measure},
                           {"ratio", rr.ratio},     {"containment_ok", rr.containment_ok},
                           {"partition_ok", rr.partition_ok}, {"per_u", per_u}};
            rep.passed = rr.eprime_measure >= 0.99 * rr.e_measure && rr.containment_ok &&
                         rr.partition_ok && std::isfinite(rr.ratio);
            return finish(rep, o, "rwt");
        }
        if (banach->parsed()) {
            BanachSuiteConfig c;
            c.depth = o.depth;
            c.n = o.n;
            c.m = o.m;
            c.trials = o.trials;
            c.seed = o.seed;
            c.sparsity = sparsity;
            c.threads = o.threads;
            return finish(banach_range_suite(c), o, "banach-suite");
        }
        if (run->parsed()) {
            std::ifstream in(o.config);
            if (!in) {
                std::cerr << "cannot open config " << o.config << "\n";
                return 2;
            }
            nlohmann::json cfg;
            try {
                in >> cfg;
            } catch (const nlohmann::json::exception& e) {
                std::cerr << "config parse error: " << e.what() << "\n";
                return 2;
            }
            int rc = run_suite(cfg, o.out, o.threads);
            std::cout << "run: exit " << rc << " (reports in " << o.out << ")\n";
            return rc;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid configuration: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
