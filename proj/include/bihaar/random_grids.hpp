#pragma once

#include "bihaar/commutator.hpp"

namespace bihaar {

/// The family {(omega, omega')} together with how to average over it:
/// exhaustive enumeration of all digit choices, or a seeded Monte Carlo
/// sample.
class GridEnsemble {
public:
    enum class Mode { Exhaustive, MonteCarlo, Single };

    static GridEnsemble exhaustive(int n, int m, int N1, int N2) {
        GridEnsemble e;
        e.mode_ = Mode::Exhaustive;
        e.n_ = n;
        e.m_ = m;
        e.N1_ = N1;
        e.N2_ = N2;
        if (n * N1 + m * N2 > 20)
            throw std::invalid_argument("GridEnsemble: exhaustive family too large");
        return e;
    }
    /// Degenerate one-member ensemble (e.g. the standard grids alone).
    static GridEnsemble single(const GridSpec& g) {
        GridEnsemble e;
        e.mode_ = Mode::Single;
        e.fixed_ = g;
        return e;
    }
    static GridEnsemble monte_carlo(int n, int m, int N1, int N2, int trials, std::uint64_t seed) {
        GridEnsemble e;
        e.mode_ = Mode::MonteCarlo;
        e.n_ = n;
        e.m_ = m;
        e.N1_ = N1;
        e.N2_ = N2;
        e.trials_ = trials;
        e.seed_ = seed;
        return e;
    }

    Mode mode() const { return mode_; }
    int size() const {
        if (mode_ == Mode::Single) return 1;
        return mode_ == Mode::Exhaustive ? 1 << (n_ * N1_ + m_ * N2_) : trials_;
    }

    /// Deterministic list of grids; exhaustive order is the binary counter.
    std::vector<GridSpec> grids() const {
        std::vector<GridSpec> out;
        if (mode_ == Mode::Single) {
            out.push_back(fixed_);
        } else if (mode_ == Mode::Exhaustive) {
            const int bits1 = n_ * N1_, bits2 = m_ * N2_;
            for (std::uint64_t code = 0; code < (std::uint64_t{1} << (bits1 + bits2)); ++code) {
                std::vector<std::uint32_t> o1(static_cast<std::size_t>(N1_), 0u),
                    o2(static_cast<std::size_t>(N2_), 0u);
                std::uint64_t c = code;
                for (int i = 0; i < N1_; ++i) {
                    o1[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(c & ((1u << n_) - 1u));
                    c >>= n_;
                }
                for (int i = 0; i < N2_; ++i) {
                    o2[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(c & ((1u << m_) - 1u));
                    c >>= m_;
                }
                out.push_back(GridSpec::shifted(n_, m_, N1_, N2_, std::move(o1), std::move(o2)));
            }
        } else {
            for (int t = 0; t < trials_; ++t) {
                auto o1 = sample_omega(mix_seed(seed_) ^ (2 * static_cast<std::uint64_t>(t)), n_, N1_);
                auto o2 = sample_omega(mix_seed(seed_ ^ 0x9e37ULL) ^ (2 * static_cast<std::uint64_t>(t) + 1),
                                       m_, N2_);
                out.push_back(GridSpec::shifted(n_, m_, N1_, N2_, std::move(o1), std::move(o2)));
            }
        }
        return out;
    }

private:
    Mode mode_ = Mode::Exhaustive;
    int n_ = 1, m_ = 1, N1_ = 1, N2_ = 1;
    int trials_ = 0;
    std::uint64_t seed_ = 0;
    GridSpec fixed_;
};

/// Exact or sample average of a scalar estimand over the ensemble.
template <class S, class F>
S grid_expectation_scalar(const GridEnsemble& ens, F&& estimand) {
    auto grids = ens.grids();
    S acc = scalar_ops<S>::zero();
    for (const auto& g : grids) acc += estimand(g);
    return acc / scalar_ops<S>::from_int(static_cast<long>(grids.size()));
}

template <class S, class F>
GridFunction<S> grid_expectation_function(const GridEnsemble& ens, const Mesh& mesh, F&& estimand) {
    auto grids = ens.grids();
    GridFunction<S> acc(mesh);
    for (const auto& g : grids) acc += estimand(g);
    S inv = scalar_ops<S>::one() / scalar_ops<S>::from_int(static_cast<long>(grids.size()));
    acc *= inv;
    return acc;
}

/// A grid-indexed family of linear operators on mesh functions.
template <class S>
struct OperatorFamily {
    std::function<GridFunction<S>(const GridSpec&, const GridFunction<S>&)> apply;
    std::string desc;
};

template <class S>
OperatorFamily<S> identity_family() {
    return {[](const GridSpec&, const GridFunction<S>& f) { return f; }, "id"};
}

/// phi_{D^axis_omega, b}: the grid enters through the Haar-sum axis only.
/// Float pipeline (the adapted maximal inside is a float object).
inline OperatorFamily<double> phi_family(int axis, GridFunction<double> b) {
    return {[axis, b = std::move(b)](const GridSpec& g, const GridFunction<double>& f) {
                return phi_b(g, axis, b, f);
            },
            std::string("phi_b^") + std::to_string(axis)};
}

template <class S>
OperatorFamily<S> a_family(int axis, int which, GridFunction<S> b) {
    return {[axis, which, b = std::move(b)](const GridSpec& g, const GridFunction<S>& f) {
                return paraproduct_a(axis, which, g, b, f);
            },
            "a^" + std::to_string(axis) + "_" + std::to_string(which)};
}

template <class S>
OperatorFamily<S> A_family(int which, GridFunction<S> b) {
    return {[which, b = std::move(b)](const GridSpec& g, const GridFunction<S>& f) {
                return paraproduct_A(which, g, b, f);
            },
            "A_" + std::to_string(which)};
}

/// [b2, a^axis_i(b1, .)] as a linear family.
template <class S>
OperatorFamily<S> commutator_a_family(int axis, int which, GridFunction<S> b1, GridFunction<S> b2) {
    return {[axis, which, b1 = std::move(b1), b2 = std::move(b2)](const GridSpec& g,
                                                                  const GridFunction<S>& f) {
                GridFunction<S> inner_op = paraproduct_a(axis, which, g, b1, f);
                GridFunction<S> first = pointwise_product(b2, inner_op);
                GridFunction<S> second = paraproduct_a(axis, which, g, b1, pointwise_product(b2, f));
                first -= second;
                return first;
            },
            "[b2,a]"};
}

/// phi_{omega,b2} applied after a^1_i(b1, .): the composed family from the
/// iterated argument.
inline OperatorFamily<double> phi_after_a_family(int axis, int which, GridFunction<double> b1,
                                                 GridFunction<double> b2) {
    return {[axis, which, b1 = std::move(b1), b2 = std::move(b2)](const GridSpec& g,
                                                                  const GridFunction<double>& f) {
                return phi_b(g, axis == 1 ? 1 : 2, b2, paraproduct_a(axis, which, g, b1, f));
            },
            "phi b2 after a b1"};
}

enum class RandSquareKind { Rect, Param1, Param2 };

/// Randomised square functions: pointwise ell^2 aggregates over the standard
/// grid of maximal functions of martingale blocks on translated rectangles.
/// The float pipeline carries these (there is a square root per cell).
template <class S>
GridFunction<double> randomized_square_function(const GridFunction<S>& f,
                                                const OperatorFamily<S>& U, RandSquareKind kind,
                                                int i, int j, const GridEnsemble& ens,
                                                const GridSpec& grid0) {
    const Mesh mesh = f.mesh();
    GridFunction<double> total(mesh);
    auto grids = ens.grids();
    const double inv = 1.0 / static_cast<double>(grids.size());

    for (const GridSpec& gw : grids) {
        auto Uf = U.apply(gw, f);
        GridFunction<double> Ufd(mesh);
        if constexpr (scalar_ops<S>::exact)
            Ufd = to_float(Uf);
        else
            Ufd = Uf;

        auto translate = [&](const Cube& c) {
            Cube t = c;
            t.grid = &gw;
            return t;
        };

        if (kind == RandSquareKind::Rect) {
            for (int lK = 0; lK + i < grid0.depth1(); ++lK)
                for (int lV = 0; lV + j < grid0.depth2(); ++lV)
                    for (const Cube& K : cubes_at_level(grid0, 1, lK)) {
                        if (K.pos[0] < 0) continue;  // standard-grid outer sum
                        for (const Cube& V : cubes_at_level(grid0, 2, lV)) {
                            if (V.pos[0] < 0) continue;
                            GridFunction<double> blk =
                                martingale_block(Ufd, translate(K), i, translate(V), j);
                            bool zero = true;
                            for (const auto& v : blk.values())
                                if (v != 0.0) {
                                    zero = false;
                                    break;
                                }
                            if (zero) continue;
                            GridFunction<double> m = strong_maximal(blk);
                            for (std::int64_t c = 0; c < total.size(); ++c)
                                total.values()[static_cast<std::size_t>(c)] +=
                                    m.values()[static_cast<std::size_t>(c)] *
                                    m.values()[static_cast<std::size_t>(c)] * inv;
                        }
                    }
        } else if (kind == RandSquareKind::Param1) {
            for (int lK = 0; lK + i < grid0.depth1(); ++lK)
                for (const Cube& K : cubes_at_level(grid0, 1, lK)) {
                    if (K.pos[0] < 0) continue;
                    GridFunction<double> blk = martingale_block1(Ufd, translate(K), i);
                    bool zero = true;
                    for (const auto& v : blk.values())
                        if (v != 0.0) {
                            zero = false;
                            break;
                        }
                    if (zero) continue;
                    GridFunction<double> m = maximal_param(blk, 1);
                    for (std::int64_t c = 0; c < total.size(); ++c)
                        total.values()[static_cast<std::size_t>(c)] +=
                            m.values()[static_cast<std::size_t>(c)] *
                            m.values()[static_cast<std::size_t>(c)] * inv;
                }
        } else {
            for (int lV = 0; lV + j < grid0.depth2(); ++lV)
                for (const Cube& V : cubes_at_level(grid0, 2, lV)) {
                    if (V.pos[0] < 0) continue;
                    GridFunction<double> blk = martingale_block2(Ufd, translate(V), j);
                    bool zero = true;
                    for (const auto& v : blk.values())
                        if (v != 0.0) {
                            zero = false;
                            break;
                        }
                    if (zero) continue;
                    GridFunction<double> m = maximal_param(blk, 2);
                    for (std::int64_t c = 0; c < total.size(); ++c)
                        total.values()[static_cast<std::size_t>(c)] +=
                            m.values()[static_cast<std::size_t>(c)] *
                            m.values()[static_cast<std::size_t>(c)] * inv;
                }
        }
    }
    for (auto& v : total.values()) v = std::sqrt(std::max(0.0, v));
    return total;
}

/// The localisation identity of the endgame pairing: replacing f3 by its
/// restriction to I3 x J3 does not change
/// <(<b>_{I3,1} - <b>_{I3 x J3}) <f3, h_{I3}>_1, h^0_{J3}>.
template <class S>
S localization_residual(const GridSpec& grid, const GridFunction<S>& b, const GridFunction<S>& f3,
                        const Cube& I3, const Cube& J3, std::uint32_t sig = 1) {
    auto pairing_of = [&](const GridFunction<S>& h) {
        Slice<S> bav = partial_average(b, 1, I3);
        S shift = average_over(b, I3, J3);
        for (std::int64_t c = 0; c < bav.size(); ++c) bav.at(c) -= shift;
        Slice<S> fp = partial_pairing(h, 1, HaarSymbol{I3, sig});
        return haar_pairing(pointwise_product(bav, fp), HaarSymbol{J3, 0});
    };
    GridFunction<S> restricted(f3.mesh());
    CellBox b1 = cell_box(I3), b2 = cell_box(J3);
    b1.for_each([&](std::int64_t c1) {
        b2.for_each([&](std::int64_t c2) { restricted.at(c1, c2) = f3.at(c1, c2); });
    });
    return pairing_of(f3) - pairing_of(restricted);
}

}  // namespace bihaar
