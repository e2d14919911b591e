#pragma once

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <set>

#include "bihaar/haar.hpp"

namespace bihaar {

// ---------------------------------------------------------------------------
// Norms.
// ---------------------------------------------------------------------------

/// L^p (quasi-)norm against an optional weight; p = infinity gives the
/// essential sup. Norms are reported in the float pipeline.
template <class S>
double lp_norm(const GridFunction<S>& f, double p, const GridFunction<double>* w = nullptr) {
    if (!(p > 0)) throw std::invalid_argument("lp_norm: p must be positive");
    if (std::isinf(p)) {
        double mx = 0;
        for (const auto& x : f.values()) mx = std::max(mx, std::fabs(scalar_ops<S>::to_double(x)));
        return mx;
    }
    const double cm = scalar_ops<S>::to_double(f.mesh().template cell_measure<S>());
    double acc = 0;
    for (std::int64_t i = 0; i < f.size(); ++i) {
        double v = std::fabs(scalar_ops<S>::to_double(f.values()[static_cast<std::size_t>(i)]));
        double wi = w ? w->values()[static_cast<std::size_t>(i)] : 1.0;
        acc += std::pow(v, p) * wi * cm;
    }
    return std::pow(acc, 1.0 / p);
}

template <class S>
double lp_norm(const Slice<S>& f, double p) {
    if (std::isinf(p)) {
        double mx = 0;
        for (const auto& x : f.values()) mx = std::max(mx, std::fabs(scalar_ops<S>::to_double(x)));
        return mx;
    }
    const double cm = scalar_ops<S>::to_double(f.geom().template cell_measure<S>());
    double acc = 0;
    for (const auto& x : f.values())
        acc += std::pow(std::fabs(scalar_ops<S>::to_double(x)), p) * cm;
    return std::pow(acc, 1.0 / p);
}

/// ||f||_2^2 exactly (backend-generic); the exact-arithmetic side of
/// Parseval checks.
template <class S>
S l2_norm_sq(const GridFunction<S>& f) {
    S acc = scalar_ops<S>::zero();
    for (const auto& x : f.values()) acc += x * x;
    return acc * f.mesh().template cell_measure<S>();
}

/// A weight: strictly positive mesh function.
struct Weight {
    GridFunction<double> w;

    explicit Weight(GridFunction<double> values) : w(std::move(values)) {
        for (double v : w.values())
            if (!(v > 0)) throw std::invalid_argument("Weight: values must be strictly positive");
    }
};

struct ExponentTriple {
    double p = 2, q = 2, r = 1;

    ExponentTriple(double p_, double q_, double r_) : p(p_), q(q_), r(r_) {
        if (!(p > 1) || !(q > 1)) throw std::invalid_argument("ExponentTriple: need p,q > 1");
        if (!(r > 0.5)) throw std::invalid_argument("ExponentTriple: need r > 1/2");
        double lhs = (std::isinf(p) ? 0 : 1 / p) + (std::isinf(q) ? 0 : 1 / q);
        if (std::fabs(lhs - 1 / r) > 1e-9)
            throw std::invalid_argument("ExponentTriple: 1/p + 1/q != 1/r");
    }
    double r_dual() const { return r / (r - 1); }  // may be negative for r < 1
};

// ---------------------------------------------------------------------------
// A_p characteristics.
// ---------------------------------------------------------------------------

struct ApCharacteristic {
    double rectangle = 0;  // sup over grid rectangles of <w>_R <w'>_R^{p-1}
    double iterated = 0;   // max of the two slice-wise one-parameter sups
};

inline ApCharacteristic ap_characteristic(const GridSpec& grid, const GridFunction<double>& w,
                                          double p) {
    if (!(p > 1) || std::isinf(p)) throw std::invalid_argument("ap_characteristic: need 1 < p < inf");
    const double dual_exp = 1.0 - p / (p - 1.0);  // 1 - p'
    GridFunction<double> wd(w.mesh());
    for (std::int64_t i = 0; i < w.size(); ++i)
        wd.values()[static_cast<std::size_t>(i)] =
            std::pow(w.values()[static_cast<std::size_t>(i)], dual_exp);

    CoeffTables<double> tw(grid, w), twd(grid, wd);
    ApCharacteristic out;
    for (const Cube& I : all_cubes(grid, 1))
        for (const Cube& J : all_cubes(grid, 2)) {
            double c = tw.avg(I, J) * std::pow(twd.avg(I, J), p - 1.0);
            out.rectangle = std::max(out.rectangle, c);
        }

    // Iterated characteristic: freeze one variable on a cell, take the
    // one-parameter characteristic in the other, then the sup over cells.
    auto slice_sup = [&](int param) {
        double sup = 0;
        const std::int64_t other_cells = param == 1 ? w.cells2() : w.cells1();
        for (std::int64_t o = 0; o < other_cells; ++o) {
            for (const Cube& I : all_cubes(grid, param)) {
                double aw = tw.partial_on_cell(I, 0, o), awd = twd.partial_on_cell(I, 0, o);
                // partial_on_cell with h^0 carries |I|^{-1/2}; two of them give 1/|I|.
                double inv = scalar_ops<double>::to_double(haar_norm_factor<double>(I));
                double c = (aw * inv) * std::pow(awd * inv, p - 1.0);
                sup = std::max(sup, c);
            }
        }
        return sup;
    };
    out.iterated = std::max(slice_sup(1), slice_sup(2));
    return out;
}

// ---------------------------------------------------------------------------
// BMO norms.
// ---------------------------------------------------------------------------

/// Little bmo: sup over grid rectangles of the mean oscillation, exact in the
/// exact backend so symbols can be normalised without rounding.
template <class S>
S little_bmo(const GridSpec& grid, const GridFunction<S>& f) {
    CoeffTables<S> tab(grid, f);
    S best = scalar_ops<S>::zero();
    for (const Cube& I : all_cubes(grid, 1))
        for (const Cube& J : all_cubes(grid, 2)) {
            S a = tab.avg(I, J);
            S acc = scalar_ops<S>::zero();
            CellBox b1 = cell_box(I), b2 = cell_box(J);
            b1.for_each([&](std::int64_t c1) {
                b2.for_each([&](std::int64_t c2) { acc += scalar_ops<S>::abs(f.at(c1, c2) - a); });
            });
            acc *= f.mesh().template cell_measure<S>();
            S osc = acc / (I.measure<S>() * J.measure<S>());
            if (scalar_ops<S>::less(best, osc)) best = osc;
        }
    return best;
}

/// sup over slices of the one-parameter dyadic BMO norm, both directions.
template <class S>
S dyadic_bmo(const GridSpec& grid, const GridFunction<S>& f) {
    S best = scalar_ops<S>::zero();
    auto run = [&](int param) {
        const std::int64_t other_cells = param == 1 ? f.cells2() : f.cells1();
        S cm = f.mesh().axis(param).template cell_measure<S>();
        for (std::int64_t o = 0; o < other_cells; ++o) {
            for (const Cube& I : all_cubes(grid, param)) {
                S meas = I.measure<S>();
                S sum = scalar_ops<S>::zero();
                cell_box(I).for_each([&](std::int64_t c) {
                    sum += param == 1 ? f.at(c, o) : f.at(o, c);
                });
                S a = sum * cm / meas;
                S acc = scalar_ops<S>::zero();
                cell_box(I).for_each([&](std::int64_t c) {
                    acc += scalar_ops<S>::abs((param == 1 ? f.at(c, o) : f.at(o, c)) - a);
                });
                S osc = acc * cm / meas;
                if (scalar_ops<S>::less(best, osc)) best = osc;
            }
        }
    };
    run(1);
    run(2);
    return best;
}

/// One-parameter dyadic BMO of a slice (used for partial paraproduct symbol
/// admissibility).
template <class S>
S slice_dyadic_bmo(const GridSpec& grid, const Slice<S>& f) {
    S best = scalar_ops<S>::zero();
    S cm = f.geom().template cell_measure<S>();
    for (const Cube& I : all_cubes(grid, f.param())) {
        S meas = I.measure<S>();
        S sum = scalar_ops<S>::zero();
        cell_box(I).for_each([&](std::int64_t c) { sum += f.at(c); });
        S a = sum * cm / meas;
        S acc = scalar_ops<S>::zero();
        cell_box(I).for_each([&](std::int64_t c) { acc += scalar_ops<S>::abs(f.at(c) - a); });
        S osc = acc * cm / meas;
        if (scalar_ops<S>::less(best, osc)) best = osc;
    }
    return best;
}

struct ProductBmoOptions {
    int thresholds = 16;            // quantile cuts of the local energy density
    bool single_rectangles = true;  // also score every dyadic rectangle
};

struct ProductBmoResult {
    double value = 0;       // certified lower bound of the Chang-Fefferman sup
    double best_omega = 0;  // measure of the achieving set
};

/// Product BMO over a family of admissible open sets: all single rectangles
/// plus unions of rectangles contained in super-level sets of the local
/// square-coefficient density. Every candidate set satisfies the defining
/// admissibility (each point lies in a rectangle inside the set), so the
/// result is a lower bound of the true supremum.
template <class S>
ProductBmoResult product_bmo(const GridSpec& grid, const GridFunction<S>& b,
                             const ProductBmoOptions& opt = {}) {
    CoeffTables<S> tab(grid, b);
    const std::uint32_t t1 = 1u << grid.n(), t2 = 1u << grid.m();
    CubeIndexer idx1(grid, 1), idx2(grid, 2);
    const std::int64_t n1 = idx1.size(), n2 = idx2.size();
    const Mesh& mesh = b.mesh();
    const std::int64_t C1 = mesh.cells1(), C2 = mesh.cells2();
    const double cm = scalar_ops<double>::to_double(mesh.template cell_measure<double>());

    // squared coefficients per rectangle, summed over signatures
    std::vector<double> sq(static_cast<std::size_t>(n1 * n2), 0.0);
    auto cubes1 = all_cubes(grid, 1);
    auto cubes2 = all_cubes(grid, 2);
    for (const Cube& I : cubes1)
        for (const Cube& J : cubes2) {
            double acc = 0;
            for (std::uint32_t e = 1; e < t1; ++e)
                for (std::uint32_t d = 1; d < t2; ++d) {
                    double c = scalar_ops<S>::to_double(tab.pairing(I, e, J, d));
                    acc += c * c;
                }
            sq[static_cast<std::size_t>(idx1.id(I) * n2 + idx2.id(J))] = acc;
        }

    // T(I,J) = sum of sq over subrectangles, by inclusion-exclusion over the
    // two descent directions
    std::vector<double> sub(sq);
    for (int l1 = grid.depth1(); l1 >= 0; --l1)
        for (const Cube& I : cubes_at_level(grid, 1, l1))
            for (int l2 = grid.depth2(); l2 >= 0; --l2)
                for (const Cube& J : cubes_at_level(grid, 2, l2)) {
                    double acc = sq[static_cast<std::size_t>(idx1.id(I) * n2 + idx2.id(J))];
                    double down1 = 0, down2 = 0, down12 = 0;
                    if (l1 < grid.depth1())
                        for (const Cube& ci : children_in_range(I))
                            down1 += sub[static_cast<std::size_t>(idx1.id(ci) * n2 + idx2.id(J))];
                    if (l2 < grid.depth2())
                        for (const Cube& cj : children_in_range(J))
                            down2 += sub[static_cast<std::size_t>(idx1.id(I) * n2 + idx2.id(cj))];
                    if (l1 < grid.depth1() && l2 < grid.depth2())
                        for (const Cube& ci : children_in_range(I))
                            for (const Cube& cj : children_in_range(J))
                                down12 += sub[static_cast<std::size_t>(idx1.id(ci) * n2 + idx2.id(cj))];
                    sub[static_cast<std::size_t>(idx1.id(I) * n2 + idx2.id(J))] =
                        acc + down1 + down2 - down12;
                }

    ProductBmoResult out;
    if (opt.single_rectangles) {
        for (const Cube& I : cubes1) {
            if (!I.in_mesh()) continue;
            for (const Cube& J : cubes2) {
                if (!J.in_mesh()) continue;
                double total = sub[static_cast<std::size_t>(idx1.id(I) * n2 + idx2.id(J))];
                if (total <= 0) continue;
                double meas = I.measure_d() * J.measure_d();
                double val = std::sqrt(total / meas);
                if (val > out.value) {
                    out.value = val;
                    out.best_omega = meas;
                }
            }
        }
    }

    // density g(x) = sum over rectangles containing x of sq/|R|
    std::vector<double> density(static_cast<std::size_t>(C1 * C2), 0.0);
    for (const Cube& I : cubes1)
        for (const Cube& J : cubes2) {
            double v = sq[static_cast<std::size_t>(idx1.id(I) * n2 + idx2.id(J))];
            if (v <= 0) continue;
            double add = v / (I.measure_d() * J.measure_d());
            CellBox b1 = cell_box(I), b2 = cell_box(J);
            b1.for_each([&](std::int64_t c1) {
                b2.for_each([&](std::int64_t c2) {
                    density[static_cast<std::size_t>(c1 * C2 + c2)] += add;
                });
            });
        }
    std::vector<double> sorted(density);
    std::sort(sorted.begin(), sorted.end());
    std::set<double> cuts;
    for (int t = 0; t < opt.thresholds; ++t) {
        std::size_t pos = sorted.size() * static_cast<std::size_t>(t) / static_cast<std::size_t>(opt.thresholds);
        if (sorted[pos] > 0) cuts.insert(sorted[pos]);
    }
    for (double cut : cuts) {
        // Omega = union of rectangles inside {density >= cut}
        std::vector<char> covered(static_cast<std::size_t>(C1 * C2), 0);
        bool any = false;
        for (const Cube& I : cubes1) {
            if (!I.in_mesh()) continue;
            for (const Cube& J : cubes2) {
                if (!J.in_mesh()) continue;
                bool inside = true;
                CellBox b1 = cell_box(I), b2 = cell_box(J);
                b1.for_each([&](std::int64_t c1) {
                    b2.for_each([&](std::int64_t c2) {
                        if (density[static_cast<std::size_t>(c1 * C2 + c2)] < cut) inside = false;
                    });
                });
                if (!inside) continue;
                any = true;
                b1.for_each([&](std::int64_t c1) {
                    b2.for_each([&](std::int64_t c2) {
                        covered[static_cast<std::size_t>(c1 * C2 + c2)] = 1;
                    });
                });
            }
        }
        if (!any) continue;
        std::int64_t cnt = 0;
        for (char c : covered) cnt += c;
        double omega = static_cast<double>(cnt) * cm;
        // rectangles fully inside the union contribute their coefficients
        double total = 0;
        for (const Cube& I : cubes1) {
            if (!I.in_mesh()) continue;
            for (const Cube& J : cubes2) {
                if (!J.in_mesh()) continue;
                double v = sq[static_cast<std::size_t>(idx1.id(I) * n2 + idx2.id(J))];
                if (v <= 0) continue;
                bool inside = true;
                CellBox b1 = cell_box(I), b2 = cell_box(J);
                b1.for_each([&](std::int64_t c1) {
                    b2.for_each([&](std::int64_t c2) {
                        if (!covered[static_cast<std::size_t>(c1 * C2 + c2)]) inside = false;
                    });
                });
                if (inside) total += v;
            }
        }
        double val = std::sqrt(total / omega);
        if (val > out.value) {
            out.value = val;
            out.best_omega = omega;
        }
    }
    return out;
}

struct BmoNorms {
    double dyadic_bmo = 0;
    double little_bmo = 0;
    double product_bmo = 0;
};

template <class S>
BmoNorms bmo_norms(const GridSpec& grid, const GridFunction<S>& b,
                   const ProductBmoOptions& opt = {}) {
    BmoNorms out;
    out.dyadic_bmo = scalar_ops<S>::to_double(dyadic_bmo(grid, b));
    out.little_bmo = scalar_ops<S>::to_double(little_bmo(grid, b));
    out.product_bmo = product_bmo(grid, b, opt).value;
    return out;
}

/// John-Nirenberg diagnostic: p-oscillation variants of little bmo.
template <class S>
double little_bmo_p(const GridSpec& grid, const GridFunction<S>& f, double p) {
    CoeffTables<S> tab(grid, f);
    double best = 0;
    const double cm = scalar_ops<double>::to_double(f.mesh().template cell_measure<double>());
    for (const Cube& I : all_cubes(grid, 1))
        for (const Cube& J : all_cubes(grid, 2)) {
            double a = scalar_ops<S>::to_double(tab.avg(I, J));
            double acc = 0;
            CellBox b1 = cell_box(I), b2 = cell_box(J);
            b1.for_each([&](std::int64_t c1) {
                b2.for_each([&](std::int64_t c2) {
                    acc += std::pow(std::fabs(scalar_ops<S>::to_double(f.at(c1, c2)) - a), p);
                });
            });
            double meas = I.measure_d() * J.measure_d();
            best = std::max(best, std::pow(acc * cm / meas, 1.0 / p));
        }
    return best;
}

// ---------------------------------------------------------------------------
// Maximal functions.
// ---------------------------------------------------------------------------

namespace detail {

/// Window sizes (in cells) of the grid-free rectangle family: dyadic lengths
/// plus their triples, the union over all translated grids' cubes together
/// with concentric 3R dilates.
inline std::vector<std::int64_t> window_sizes(std::int64_t axis_cells) {
    std::vector<std::int64_t> out;
    for (std::int64_t w = 1; w <= axis_cells; w *= 2) out.push_back(w);
    for (std::int64_t w = 3; w <= axis_cells; w *= 2) out.push_back(w);
    std::sort(out.begin(), out.end());
    return out;
}

/// data is canonical row-major with extents[0] the fastest dimension. Moving
/// window sum along one dimension; output extent shrinks to positions where
/// the window fits.
inline void moving_sum(std::vector<double>& data, std::vector<std::int64_t>& ext, int dim,
                       std::int64_t w) {
    std::int64_t inner = 1;
    for (int i = 0; i < dim; ++i) inner *= ext[static_cast<std::size_t>(i)];
    std::int64_t len = ext[static_cast<std::size_t>(dim)];
    std::int64_t outer = 1;
    for (std::size_t i = static_cast<std::size_t>(dim) + 1; i < ext.size(); ++i) outer *= ext[i];
    std::int64_t out_len = len - w + 1;
    std::vector<double> out(static_cast<std::size_t>(inner * out_len * outer));
    for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t in = 0; in < inner; ++in) {
            const double* src = data.data() + (o * len * inner + in);
            double* dst = out.data() + (o * out_len * inner + in);
            double run = 0;
            for (std::int64_t t = 0; t < len; ++t) {
                run += src[t * inner];
                if (t >= w) run -= src[(t - w) * inner];
                if (t >= w - 1) dst[(t - w + 1) * inner] = run;
            }
        }
    data = std::move(out);
    ext[static_cast<std::size_t>(dim)] = out_len;
}

/// Max over window positions covering each cell: output extent grows back to
/// `cells`. Monotone-deque sliding maximum per line.
inline void cover_max(std::vector<double>& data, std::vector<std::int64_t>& ext, int dim,
                      std::int64_t w, std::int64_t cells) {
    std::int64_t inner = 1;
    for (int i = 0; i < dim; ++i) inner *= ext[static_cast<std::size_t>(i)];
    std::int64_t len = ext[static_cast<std::size_t>(dim)];  // #window positions
    std::int64_t outer = 1;
    for (std::size_t i = static_cast<std::size_t>(dim) + 1; i < ext.size(); ++i) outer *= ext[i];
    std::vector<double> out(static_cast<std::size_t>(inner * cells * outer));
    std::deque<std::int64_t> dq;
    for (std::int64_t o = 0; o < outer; ++o)
        for (std::int64_t in = 0; in < inner; ++in) {
            const double* src = data.data() + (o * len * inner + in);
            double* dst = out.data() + (o * cells * inner + in);
            dq.clear();
            // cell x is covered by window positions t in [x-w+1, x] cap [0,len)
            for (std::int64_t x = 0; x < cells; ++x) {
                std::int64_t t_new = x;  // newly admissible position
                if (t_new < len) {
                    double v = src[t_new * inner];
                    while (!dq.empty() && src[dq.back() * inner] <= v) dq.pop_back();
                    dq.push_back(t_new);
                }
                while (!dq.empty() && dq.front() < x - w + 1) dq.pop_front();
                dst[x * inner] = dq.empty() ? 0.0 : src[dq.front() * inner];
            }
        }
    data = std::move(out);
    ext[static_cast<std::size_t>(dim)] = cells;
}

}  // namespace detail

/// Strong maximal function over the grid-free rectangle family (all
/// mesh-aligned rectangles with side lengths 2^j or 3*2^j cells, fully inside
/// the ambient box). This realises the non-dyadic sup: the union over all
/// translated grids of dyadic cubes is exactly the mesh-aligned dyadic-length
/// family, and the 3*2^j sizes add the concentric dilates used by the
/// exceptional-set construction.
template <class S>
GridFunction<double> strong_maximal(const GridFunction<S>& f) {
    const Mesh& mesh = f.mesh();
    const int D = mesh.axis1.d + mesh.axis2.d;
    std::vector<std::int64_t> base_ext;
    for (int i = 0; i < mesh.axis2.d; ++i) base_ext.push_back(mesh.axis2.cells_per_dim());
    for (int i = 0; i < mesh.axis1.d; ++i) base_ext.push_back(mesh.axis1.cells_per_dim());

    std::vector<double> absf(static_cast<std::size_t>(f.size()));
    for (std::int64_t i = 0; i < f.size(); ++i)
        absf[static_cast<std::size_t>(i)] =
            std::fabs(scalar_ops<S>::to_double(f.values()[static_cast<std::size_t>(i)]));

    std::vector<std::vector<std::int64_t>> sizes;
    for (int dim = 0; dim < D; ++dim) sizes.push_back(detail::window_sizes(base_ext[static_cast<std::size_t>(dim)]));

    GridFunction<double> out(mesh);
    std::vector<std::size_t> pick(static_cast<std::size_t>(D), 0);
    while (true) {
        std::vector<double> work = absf;
        std::vector<std::int64_t> ext = base_ext;
        double inv_meas = 1.0;
        for (int dim = 0; dim < D; ++dim) {
            std::int64_t w = sizes[static_cast<std::size_t>(dim)][pick[static_cast<std::size_t>(dim)]];
            detail::moving_sum(work, ext, dim, w);
            inv_meas /= static_cast<double>(w);
        }
        for (double& v : work) v *= inv_meas;  // window averages in cell units
        for (int dim = 0; dim < D; ++dim) {
            std::int64_t w = sizes[static_cast<std::size_t>(dim)][pick[static_cast<std::size_t>(dim)]];
            detail::cover_max(work, ext, dim, w, base_ext[static_cast<std::size_t>(dim)]);
        }
        for (std::int64_t i = 0; i < out.size(); ++i)
            out.values()[static_cast<std::size_t>(i)] =
                std::max(out.values()[static_cast<std::size_t>(i)], work[static_cast<std::size_t>(i)]);
        // odometer over size picks
        int dim = 0;
        for (; dim < D; ++dim) {
            auto& pd = pick[static_cast<std::size_t>(dim)];
            if (++pd < sizes[static_cast<std::size_t>(dim)].size()) break;
            pd = 0;
        }
        if (dim == D) break;
    }
    return out;
}

/// One-parameter sliding maximal M^1 / M^2: windows move in one parameter's
/// dimensions only, single cells in the other.
template <class S>
GridFunction<double> maximal_param(const GridFunction<S>& f, int param) {
    const Mesh& mesh = f.mesh();
    const int D = mesh.axis1.d + mesh.axis2.d;
    std::vector<std::int64_t> base_ext;
    std::vector<bool> active;
    for (int i = 0; i < mesh.axis2.d; ++i) {
        base_ext.push_back(mesh.axis2.cells_per_dim());
        active.push_back(param == 2);
    }
    for (int i = 0; i < mesh.axis1.d; ++i) {
        base_ext.push_back(mesh.axis1.cells_per_dim());
        active.push_back(param == 1);
    }
    std::vector<double> absf(static_cast<std::size_t>(f.size()));
    for (std::int64_t i = 0; i < f.size(); ++i)
        absf[static_cast<std::size_t>(i)] =
            std::fabs(scalar_ops<S>::to_double(f.values()[static_cast<std::size_t>(i)]));

    std::vector<std::vector<std::int64_t>> sizes;
    for (int dim = 0; dim < D; ++dim)
        sizes.push_back(active[static_cast<std::size_t>(dim)]
                            ? detail::window_sizes(base_ext[static_cast<std::size_t>(dim)])
                            : std::vector<std::int64_t>{1});

    GridFunction<double> out(f.mesh());
    std::vector<std::size_t> pick(static_cast<std::size_t>(D), 0);
    while (true) {
        std::vector<double> work = absf;
        std::vector<std::int64_t> ext = base_ext;
        double inv = 1.0;
        for (int dim = 0; dim < D; ++dim) {
            std::int64_t w = sizes[static_cast<std::size_t>(dim)][pick[static_cast<std::size_t>(dim)]];
            detail::moving_sum(work, ext, dim, w);
            inv /= static_cast<double>(w);
        }
        for (double& v : work) v *= inv;
        for (int dim = 0; dim < D; ++dim) {
            std::int64_t w = sizes[static_cast<std::size_t>(dim)][pick[static_cast<std::size_t>(dim)]];
            detail::cover_max(work, ext, dim, w, base_ext[static_cast<std::size_t>(dim)]);
        }
        for (std::int64_t i = 0; i < out.size(); ++i)
            out.values()[static_cast<std::size_t>(i)] =
                std::max(out.values()[static_cast<std::size_t>(i)], work[static_cast<std::size_t>(i)]);
        int dim = 0;
        for (; dim < D; ++dim) {
            auto& pd = pick[static_cast<std::size_t>(dim)];
            if (++pd < sizes[static_cast<std::size_t>(dim)].size()) break;
            pd = 0;
        }
        if (dim == D) break;
    }
    return out;
}

/// Dyadic rectangle maximal function of one fixed grid.
template <class S>
GridFunction<double> dyadic_maximal(const GridSpec& grid, const GridFunction<S>& f) {
    GridFunction<double> absf(f.mesh());
    for (std::int64_t i = 0; i < f.size(); ++i)
        absf.values()[static_cast<std::size_t>(i)] =
            std::fabs(scalar_ops<S>::to_double(f.values()[static_cast<std::size_t>(i)]));
    CoeffTables<double> tab(grid, absf);
    GridFunction<double> out(f.mesh());
    for (const Cube& I : all_cubes(grid, 1))
        for (const Cube& J : all_cubes(grid, 2)) {
            double a = tab.avg(I, J);
            CellBox b1 = cell_box(I), b2 = cell_box(J);
            b1.for_each([&](std::int64_t c1) {
                b2.for_each([&](std::int64_t c2) {
                    double& v = out.at(c1, c2);
                    v = std::max(v, a);
                });
            });
        }
    return out;
}

template <class S>
GridFunction<double> maximal_s(const GridFunction<S>& f, double s) {
    if (!(s > 0)) throw std::invalid_argument("maximal_s: s must be positive");
    GridFunction<double> p(f.mesh());
    for (std::int64_t i = 0; i < f.size(); ++i)
        p.values()[static_cast<std::size_t>(i)] =
            std::pow(std::fabs(scalar_ops<S>::to_double(f.values()[static_cast<std::size_t>(i)])), s);
    GridFunction<double> mp = strong_maximal(p);
    for (auto& v : mp.values()) v = std::pow(v, 1.0 / s);
    return mp;
}

/// Adapted maximal M_b f = sup_R <|b - <b>_R| |f|>_R over the grid-free
/// rectangle family. Cost grows quickly with depth; intended for small N.
inline GridFunction<double> adapted_maximal(const GridFunction<double>& b,
                                            const GridFunction<double>& f) {
    const Mesh& mesh = f.mesh();
    if (mesh.axis1.d != 1 || mesh.axis2.d != 1)
        throw std::invalid_argument("adapted_maximal: implemented for n = m = 1");
    const std::int64_t C1 = mesh.cells1(), C2 = mesh.cells2();
    GridFunction<double> out(mesh);
    auto sizes1 = detail::window_sizes(C1), sizes2 = detail::window_sizes(C2);
    // prefix sums of b for window averages
    std::vector<double> pre(static_cast<std::size_t>((C1 + 1) * (C2 + 1)), 0.0);
    auto P = [&](std::int64_t i, std::int64_t j) -> double& {
        return pre[static_cast<std::size_t>(i * (C2 + 1) + j)];
    };
    for (std::int64_t i = 0; i < C1; ++i)
        for (std::int64_t j = 0; j < C2; ++j)
            P(i + 1, j + 1) = b.at(i, j) + P(i, j + 1) + P(i + 1, j) - P(i, j);
    for (std::int64_t w1 : sizes1)
        for (std::int64_t w2 : sizes2) {
            const double cnt = static_cast<double>(w1 * w2);
            const double inv2 = 1.0 / (cnt * cnt);
            for (std::int64_t s1 = 0; s1 + w1 <= C1; ++s1)
                for (std::int64_t s2 = 0; s2 + w2 <= C2; ++s2) {
                    double sum = P(s1 + w1, s2 + w2) - P(s1, s2 + w2) - P(s1 + w1, s2) + P(s1, s2);
                    // |b - avg| written as |b*cnt - sum|/cnt: vanishes exactly
                    // on constant symbols
                    double acc = 0;
                    for (std::int64_t i = s1; i < s1 + w1; ++i)
                        for (std::int64_t j = s2; j < s2 + w2; ++j)
                            acc += std::fabs(b.at(i, j) * cnt - sum) * std::fabs(f.at(i, j));
                    acc *= inv2;
                    for (std::int64_t i = s1; i < s1 + w1; ++i)
                        for (std::int64_t j = s2; j < s2 + w2; ++j) {
                            double& v = out.at(i, j);
                            v = std::max(v, acc);
                        }
                }
        }
    return out;
}

/// One-parameter adapted maximal on a slice: M_c g = sup_I <|c - <c>_I| |g|>_I
/// over mesh-aligned windows (grid-free by construction).
template <class S>
Slice<double> adapted_maximal_slice(const Slice<S>& c, const Slice<S>& g) {
    if (c.geom().d != 1) throw std::invalid_argument("adapted_maximal_slice: d = 1 only");
    const std::int64_t C = c.size();
    Slice<double> out(c.param(), c.geom());
    std::vector<double> cv(static_cast<std::size_t>(C)), gv(static_cast<std::size_t>(C));
    for (std::int64_t i = 0; i < C; ++i) {
        cv[static_cast<std::size_t>(i)] = scalar_ops<S>::to_double(c.at(i));
        gv[static_cast<std::size_t>(i)] = std::fabs(scalar_ops<S>::to_double(g.at(i)));
    }
    std::vector<double> pre(static_cast<std::size_t>(C + 1), 0.0);
    for (std::int64_t i = 0; i < C; ++i)
        pre[static_cast<std::size_t>(i + 1)] = pre[static_cast<std::size_t>(i)] + cv[static_cast<std::size_t>(i)];
    for (std::int64_t w : detail::window_sizes(C)) {
        const double cnt = static_cast<double>(w);
        const double inv2 = 1.0 / (cnt * cnt);
        for (std::int64_t s = 0; s + w <= C; ++s) {
            double sum = pre[static_cast<std::size_t>(s + w)] - pre[static_cast<std::size_t>(s)];
            double acc = 0;
            for (std::int64_t i = s; i < s + w; ++i)
                acc += std::fabs(cv[static_cast<std::size_t>(i)] * cnt - sum) * gv[static_cast<std::size_t>(i)];
            acc *= inv2;
            for (std::int64_t i = s; i < s + w; ++i) out.at(i) = std::max(out.at(i), acc);
        }
    }
    return out;
}

/// phi_{D, b}: Haar sum over the cubes of `axis` (with the supplied grid),
/// adapted grid-free maximal acting in the other parameter.
template <class S>
GridFunction<double> phi_b(const GridSpec& grid, int axis, const GridFunction<S>& b,
                           const GridFunction<S>& f) {
    const Mesh mesh = f.mesh();
    const int other = axis == 1 ? 2 : 1;
    GridFunction<double> out(mesh);
    const std::uint32_t top = 1u << grid.dim(axis);
    for (const Cube& J : all_cubes(grid, axis)) {
        Slice<S> bavg = partial_average(b, axis, J);
        Slice<double> bavg_d(other, mesh.axis(other));
        for (std::int64_t i = 0; i < bavg_d.size(); ++i)
            bavg_d.at(i) = scalar_ops<S>::to_double(bavg.at(i));
        for (std::uint32_t sig = 1; sig < top; ++sig) {
            HaarSymbol h{J, sig};
            Slice<S> pf = partial_pairing(f, axis, h);
            Slice<double> pf_d(other, mesh.axis(other));
            for (std::int64_t i = 0; i < pf_d.size(); ++i)
                pf_d.at(i) = scalar_ops<S>::to_double(pf.at(i));
            Slice<double> m = adapted_maximal_slice(bavg_d, pf_d);
            double norm = scalar_ops<double>::to_double(haar_norm_factor<double>(J));
            detail::for_each_cell_signed(J, sig, [&](std::int64_t cj, int s) {
                for (std::int64_t co = 0; co < m.size(); ++co) {
                    double v = m.at(co) * norm * s;
                    if (axis == 2)
                        out.at(co, cj) += v;
                    else
                        out.at(cj, co) += v;
                }
            });
        }
    }
    return out;
}

enum class MaximalKind { DyadicRect, Strong, Ms, Mb, PhiB1, PhiB2, M1, M2 };

struct MaximalParams {
    const GridSpec* grid = nullptr;                // DyadicRect, PhiB*
    double s = 1.0;                                // Ms
    const GridFunction<double>* b = nullptr;       // Mb, PhiB*
};

inline GridFunction<double> maximal(const GridFunction<double>& f, MaximalKind kind,
                                    const MaximalParams& prm = {}) {
    switch (kind) {
        case MaximalKind::DyadicRect:
            if (!prm.grid) throw std::invalid_argument("maximal: grid required");
            return dyadic_maximal(*prm.grid, f);
        case MaximalKind::Strong: return strong_maximal(f);
        case MaximalKind::Ms: return maximal_s(f, prm.s);
        case MaximalKind::Mb:
            if (!prm.b) throw std::invalid_argument("maximal: symbol required");
            return adapted_maximal(*prm.b, f);
        case MaximalKind::PhiB1:
            if (!prm.grid || !prm.b) throw std::invalid_argument("maximal: grid+symbol required");
            return phi_b(*prm.grid, 1, *prm.b, f);
        case MaximalKind::PhiB2:
            if (!prm.grid || !prm.b) throw std::invalid_argument("maximal: grid+symbol required");
            return phi_b(*prm.grid, 2, *prm.b, f);
        case MaximalKind::M1: return maximal_param(f, 1);
        case MaximalKind::M2: return maximal_param(f, 2);
    }
    throw std::invalid_argument("maximal: unknown kind");
}

// ---------------------------------------------------------------------------
// Deterministic square functions (Lemma-2.1 style).
// ---------------------------------------------------------------------------

enum class SquareKind { Rect, Param1, Param2 };

/// Pointwise square of the square function, exact in the exact backend. Uses
/// the fact that each cell has exactly one containing cube per level.
template <class S>
GridFunction<S> square_function_sq(const GridSpec& grid, const GridFunction<S>& f,
                                   SquareKind kind) {
    CoeffTables<S> tab(grid, f);
    const Mesh mesh = f.mesh();
    GridFunction<S> out(mesh);
    const std::int64_t C1 = mesh.cells1(), C2 = mesh.cells2();
    if (mesh.axis1.d != 1 || mesh.axis2.d != 1)
        throw std::invalid_argument("square_function: implemented for n = m = 1");

    auto cube1 = [&](int level, std::int64_t c) {
        return containing_cube(grid, 1, level, {c, 0, 0});
    };
    auto cube2 = [&](int level, std::int64_t c) {
        return containing_cube(grid, 2, level, {c, 0, 0});
    };

    for (std::int64_t c1 = 0; c1 < C1; ++c1)
        for (std::int64_t c2 = 0; c2 < C2; ++c2) {
            S acc = scalar_ops<S>::zero();
            if (kind == SquareKind::Rect) {
                for (int l1 = 0; l1 < grid.depth1(); ++l1)
                    for (int l2 = 0; l2 < grid.depth2(); ++l2) {
                        Cube I = cube1(l1, c1), Ic = cube1(l1 + 1, c1);
                        Cube J = cube2(l2, c2), Jc = cube2(l2 + 1, c2);
                        S d = tab.avg(Ic, Jc) - tab.avg(I, Jc) - tab.avg(Ic, J) + tab.avg(I, J);
                        acc += d * d;
                    }
            } else if (kind == SquareKind::Param1) {
                for (int l1 = 0; l1 < grid.depth1(); ++l1) {
                    Cube I = cube1(l1, c1), Ic = cube1(l1 + 1, c1);
                    S a = tab.partial_avg_on_cell(Ic, c2) - tab.partial_avg_on_cell(I, c2);
                    acc += a * a;
                }
            } else {
                for (int l2 = 0; l2 < grid.depth2(); ++l2) {
                    Cube J = cube2(l2, c2), Jc = cube2(l2 + 1, c2);
                    S a = tab.partial_avg_on_cell(Jc, c1) - tab.partial_avg_on_cell(J, c1);
                    acc += a * a;
                }
            }
            out.at(c1, c2) = acc;
        }
    return out;
}

template <class S>
GridFunction<double> square_function(const GridSpec& grid, const GridFunction<S>& f,
                                     SquareKind kind) {
    GridFunction<S> sq = square_function_sq(grid, f, kind);
    GridFunction<double> out(f.mesh());
    for (std::int64_t i = 0; i < out.size(); ++i)
        out.values()[static_cast<std::size_t>(i)] =
            std::sqrt(std::max(0.0, scalar_ops<S>::to_double(sq.values()[static_cast<std::size_t>(i)])));
    return out;
}

}  // namespace bihaar
