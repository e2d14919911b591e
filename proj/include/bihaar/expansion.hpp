#pragma once

#include <optional>

#include "bihaar/model_ops.hpp"

namespace bihaar {

namespace detail {

/// Factor evaluations shared by the A-operators: at a cell x inside I x J,
/// each of Delta_{IxJ}, E^1 Delta^2, Delta^1 E^2 and E^1 E^2 of g is a signed
/// combination of rectangle averages of g at (I or its child at x) times
/// (J or its child at x).
template <class S>
struct RectFactors {
    S delta_rect, e1_delta2, delta1_e2, avg;
};

template <class S>
RectFactors<S> rect_factors(const CoeffTables<S>& tab, const Cube& I, const Cube& Ic,
                            const Cube& J, const Cube& Jc) {
    S a_cc = tab.avg(Ic, Jc);
    S a_pc = tab.avg(I, Jc);
    S a_cp = tab.avg(Ic, J);
    S a_pp = tab.avg(I, J);
    return {a_cc - a_pc - a_cp + a_pp, a_pc - a_pp, a_cp - a_pp, a_pp};
}

}  // namespace detail

/// The eight bi-parameter paraproduct operators built from martingale
/// differences and averages of the symbol, summed over all rectangles of one
/// grid.
template <class S>
GridFunction<S> paraproduct_A(int which, const GridSpec& grid, const GridFunction<S>& b,
                              const GridFunction<S>& f) {
    if (which < 1 || which > 8) throw std::invalid_argument("paraproduct_A: index in 1..8");
    CoeffTables<S> tb(grid, b), tf(grid, f);
    const Mesh& mesh = f.mesh();
    GridFunction<S> out(mesh);

    for (int l1 = 0; l1 < grid.depth1(); ++l1)
        for (const Cube& I : cubes_at_level(grid, 1, l1))
            for (int l2 = 0; l2 < grid.depth2(); ++l2)
                for (const Cube& J : cubes_at_level(grid, 2, l2)) {
                    // the summand is constant on each child pair of I x J
                    for (const Cube& Ic : children_in_range(I))
                        for (const Cube& Jc : children_in_range(J)) {
                            auto fb = detail::rect_factors(tb, I, Ic, J, Jc);
                            auto ff = detail::rect_factors(tf, I, Ic, J, Jc);
                            S term = scalar_ops<S>::zero();
                            switch (which) {
                                case 1: term = fb.delta_rect * ff.delta_rect; break;
                                case 2: term = fb.delta_rect * ff.e1_delta2; break;
                                case 3: term = fb.delta_rect * ff.delta1_e2; break;
                                case 4: term = fb.delta_rect * ff.avg; break;
                                case 5: term = fb.e1_delta2 * ff.delta_rect; break;
                                case 6: term = fb.e1_delta2 * ff.delta1_e2; break;
                                case 7: term = fb.delta1_e2 * ff.delta_rect; break;
                                case 8: term = fb.delta1_e2 * ff.e1_delta2; break;
                            }
                            if (scalar_ops<S>::is_zero(term)) continue;
                            CellBox b1 = cell_box(Ic), b2 = cell_box(Jc);
                            b1.for_each([&](std::int64_t c1) {
                                b2.for_each([&](std::int64_t c2) { out.at(c1, c2) += term; });
                            });
                        }
                }
    return out;
}

/// All eight images in one sweep: the rectangle factors are shared, so this
/// is several times cheaper than eight separate passes.
template <class S>
std::array<GridFunction<S>, 8> paraproduct_A_all(const GridSpec& grid, const GridFunction<S>& b,
                                                 const GridFunction<S>& f) {
    CoeffTables<S> tb(grid, b), tf(grid, f);
    const Mesh& mesh = f.mesh();
    std::array<GridFunction<S>, 8> out{GridFunction<S>(mesh), GridFunction<S>(mesh),
                                       GridFunction<S>(mesh), GridFunction<S>(mesh),
                                       GridFunction<S>(mesh), GridFunction<S>(mesh),
                                       GridFunction<S>(mesh), GridFunction<S>(mesh)};
    for (int l1 = 0; l1 < grid.depth1(); ++l1)
        for (const Cube& I : cubes_at_level(grid, 1, l1))
            for (int l2 = 0; l2 < grid.depth2(); ++l2)
                for (const Cube& J : cubes_at_level(grid, 2, l2))
                    for (const Cube& Ic : children_in_range(I))
                        for (const Cube& Jc : children_in_range(J)) {
                            auto fb = detail::rect_factors(tb, I, Ic, J, Jc);
                            auto ff = detail::rect_factors(tf, I, Ic, J, Jc);
                            std::array<S, 8> terms = {
                                fb.delta_rect * ff.delta_rect, fb.delta_rect * ff.e1_delta2,
                                fb.delta_rect * ff.delta1_e2,  fb.delta_rect * ff.avg,
                                fb.e1_delta2 * ff.delta_rect,  fb.e1_delta2 * ff.delta1_e2,
                                fb.delta1_e2 * ff.delta_rect,  fb.delta1_e2 * ff.e1_delta2};
                            CellBox b1 = cell_box(Ic), b2 = cell_box(Jc);
                            for (int w = 0; w < 8; ++w) {
                                if (scalar_ops<S>::is_zero(terms[static_cast<std::size_t>(w)])) continue;
                                auto& tgt = out[static_cast<std::size_t>(w)];
                                b1.for_each([&](std::int64_t c1) {
                                    b2.for_each([&](std::int64_t c2) {
                                        tgt.at(c1, c2) += terms[static_cast<std::size_t>(w)];
                                    });
                                });
                            }
                        }
    return out;
}

/// One-parameter expansion operators a^axis_1 = sum Delta b Delta f and
/// a^axis_2 = sum Delta b E f, summed over all cubes of the chosen axis.
template <class S>
GridFunction<S> paraproduct_a(int axis, int which, const GridSpec& grid, const GridFunction<S>& b,
                              const GridFunction<S>& f) {
    if (which != 1 && which != 2) throw std::invalid_argument("paraproduct_a: index in {1,2}");
    if (axis != 1 && axis != 2) throw std::invalid_argument("paraproduct_a: axis in {1,2}");
    CoeffTables<S> tb(grid, b), tf(grid, f);
    const Mesh& mesh = f.mesh();
    GridFunction<S> out(mesh);
    const int N = grid.depth(axis);
    const std::int64_t other_cells = axis == 1 ? mesh.cells2() : mesh.cells1();

    for (int l = 0; l < N; ++l)
        for (const Cube& I : cubes_at_level(grid, axis, l))
            for (const Cube& Ic : children_in_range(I)) {
                CellBox box = cell_box(Ic);
                if (box.empty()) continue;
                for (std::int64_t o = 0; o < other_cells; ++o) {
                    S db = tb.partial_avg_on_cell(Ic, o) - tb.partial_avg_on_cell(I, o);
                    if (scalar_ops<S>::is_zero(db)) continue;
                    S term = which == 1
                                 ? db * (tf.partial_avg_on_cell(Ic, o) - tf.partial_avg_on_cell(I, o))
                                 : db * tf.partial_avg_on_cell(I, o);
                    if (scalar_ops<S>::is_zero(term)) continue;
                    box.for_each([&](std::int64_t c) {
                        if (axis == 1)
                            out.at(c, o) += term;
                        else
                            out.at(o, c) += term;
                    });
                }
            }
    return out;
}

enum class ExpansionTermKind { ParaA, ParaSmallA, Oscillation, FreeAverage };

template <class S>
struct ExpansionTerm {
    ExpansionTermKind kind;
    std::string tag;
    S value;
};

template <class S>
S expansion_sum(const std::vector<ExpansionTerm<S>>& terms) {
    S acc = scalar_ops<S>::zero();
    for (const auto& t : terms) acc += t.value;
    return acc;
}

/// Martingale expansion machinery bound to a fixed (grid, b, f) pair. Caches
/// the A- and a-operator images so one instance serves many pairings; the
/// expansion pattern is read off the signatures of the pairing symbols
/// (cancellative in both parameters: full bi-parameter expansion; mixed:
/// one-parameter expansion; non-cancellative in both: add-and-subtract only).
template <class S>
class ProductExpansion {
public:
    ProductExpansion(const GridSpec& grid, const GridFunction<S>& b, const GridFunction<S>& f)
        : grid_(&grid), b_(&b), f_(&f), bf_(pointwise_product(b, f)),
          tab_bf_(grid, bf_), tab_b_(grid, b), tab_f_(grid, f) {}

    const GridSpec& grid() const { return *grid_; }
    const GridFunction<S>& symbol() const { return *b_; }
    const GridFunction<S>& func() const { return *f_; }

    /// <bf, h~_{I0} x h~_{J0}>.
    S lhs(const HaarSymbol& h1, const HaarSymbol& h2) const {
        return tab_bf_.pairing(h1.cube, h1.sig, h2.cube, h2.sig);
    }

    /// Exact term list of the matching expansion identity.
    std::vector<ExpansionTerm<S>> terms(const HaarSymbol& h1, const HaarSymbol& h2) const {
        std::vector<ExpansionTerm<S>> out;
        const Cube& I0 = h1.cube;
        const Cube& J0 = h2.cube;
        const bool c1 = h1.cancellative(), c2 = h2.cancellative();
        S bavg = tab_b_.avg(I0, J0);
        if (c1 && c2) {
            for (int i = 1; i <= 8; ++i)
                out.push_back({ExpansionTermKind::ParaA, "A" + std::to_string(i),
                               haar_pairing(A(i), h1, h2)});
            out.push_back({ExpansionTermKind::FreeAverage, "free",
                           bavg * tab_f_.pairing(I0, h1.sig, J0, h2.sig)});
        } else if (c1 && !c2) {
            for (int i = 1; i <= 2; ++i)
                out.push_back({ExpansionTermKind::ParaSmallA, "a1_" + std::to_string(i),
                               haar_pairing(a(1, i), h1, h2)});
            out.push_back({ExpansionTermKind::Oscillation, "osc", oscillation1(h1, J0)});
            out.push_back({ExpansionTermKind::FreeAverage, "free",
                           bavg * tab_f_.pairing(I0, h1.sig, J0, 0)});
        } else if (!c1 && c2) {
            for (int i = 1; i <= 2; ++i)
                out.push_back({ExpansionTermKind::ParaSmallA, "a2_" + std::to_string(i),
                               haar_pairing(a(2, i), h1, h2)});
            out.push_back({ExpansionTermKind::Oscillation, "osc", oscillation2(I0, h2)});
            out.push_back({ExpansionTermKind::FreeAverage, "free",
                           bavg * tab_f_.pairing(I0, 0, J0, h2.sig)});
        } else {
            // <(b - <b>_{I0 x J0}) f, h^0 x h^0>, evaluated product-first so
            // the identity check is not circular
            GridFunction<S> osc_fn = *b_;
            for (auto& v : osc_fn.values()) v -= bavg;
            osc_fn = pointwise_product(osc_fn, *f_);
            out.push_back({ExpansionTermKind::Oscillation, "osc",
                           haar_pairing(osc_fn, HaarSymbol{I0, 0}, HaarSymbol{J0, 0})});
            out.push_back({ExpansionTermKind::FreeAverage, "free",
                           bavg * tab_f_.pairing(I0, 0, J0, 0)});
        }
        return out;
    }

    S residual(const HaarSymbol& h1, const HaarSymbol& h2) const {
        return lhs(h1, h2) - expansion_sum(terms(h1, h2));
    }

    /// Cached operator images; the A family materialises in one shared pass.
    const GridFunction<S>& A(int i) const {
        auto& slot = A_[static_cast<std::size_t>(i - 1)];
        if (!slot) {
            auto all = paraproduct_A_all(*grid_, *b_, *f_);
            for (int w = 0; w < 8; ++w)
                A_[static_cast<std::size_t>(w)] = std::move(all[static_cast<std::size_t>(w)]);
        }
        return *slot;
    }
    const GridFunction<S>& a(int axis, int i) const {
        auto& slot = (axis == 1 ? a1_ : a2_)[static_cast<std::size_t>(i - 1)];
        if (!slot) slot = paraproduct_a(axis, i, *grid_, *b_, *f_);
        return *slot;
    }

    /// <(<b>_{I0,1} - <b>_{I0 x J0}) <f, h_{I0}>_1, h^0_{J0}>.
    S oscillation1(const HaarSymbol& h1, const Cube& J0) const {
        Slice<S> bav = partial_average(*b_, 1, h1.cube);
        Slice<S> fp = partial_pairing(*f_, 1, h1);
        S shift = tab_b_.avg(h1.cube, J0);
        for (std::int64_t c = 0; c < bav.size(); ++c) bav.at(c) -= shift;
        return haar_pairing(pointwise_product(bav, fp), HaarSymbol{J0, 0});
    }

    /// Mirror of the above with the parameters exchanged.
    S oscillation2(const Cube& I0, const HaarSymbol& h2) const {
        Slice<S> bav = partial_average(*b_, 2, h2.cube);
        Slice<S> fp = partial_pairing(*f_, 2, h2);
        S shift = tab_b_.avg(I0, h2.cube);
        for (std::int64_t c = 0; c < bav.size(); ++c) bav.at(c) -= shift;
        return haar_pairing(pointwise_product(bav, fp), HaarSymbol{I0, 0});
    }

    S symbol_avg(const Cube& I, const Cube& J) const { return tab_b_.avg(I, J); }

private:
    const GridSpec* grid_;
    const GridFunction<S>* b_;
    const GridFunction<S>* f_;
    GridFunction<S> bf_;
    CoeffTables<S> tab_bf_, tab_b_, tab_f_;
    mutable std::array<std::optional<GridFunction<S>>, 8> A_;
    mutable std::array<std::optional<GridFunction<S>>, 2> a1_, a2_;
};

/// One-shot variant of the expansion for a single pairing.
template <class S>
std::vector<ExpansionTerm<S>> expand_product(const GridSpec& grid, const GridFunction<S>& b,
                                             const GridFunction<S>& f, const HaarSymbol& h1,
                                             const HaarSymbol& h2) {
    return ProductExpansion<S>(grid, b, f).terms(h1, h2);
}

}  // namespace bihaar
