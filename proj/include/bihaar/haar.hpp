#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "bihaar/grid_function.hpp"

namespace bihaar {

/// Haar function h_I^eta: cube plus signature bitmask over the cube's
/// dimensions. Signature zero is the non-cancellative h^0 = |I|^{-1/2} 1_I.
struct HaarSymbol {
    Cube cube;
    std::uint32_t sig = 0;

    bool cancellative() const { return sig != 0; }
};

namespace detail {

/// Visit the mesh cells of `c` with the sign pattern of signature `sig`
/// (product over flagged dimensions of +1 on the left half, -1 on the right).
template <class F>
void for_each_cell_signed(const Cube& c, std::uint32_t sig, F&& fn) {
    if (sig != 0 && c.level >= c.depth()) return;  // below mesh resolution
    CellBox b = cell_box(c);
    if (b.empty()) return;
    const int d = b.d;
    const std::int64_t half = c.cells_per_dim() / 2;
    std::array<std::int64_t, kMaxDim> start{};
    for (int i = 0; i < d; ++i) start[static_cast<std::size_t>(i)] = c.cell_start(i);
    std::array<std::int64_t, kMaxDim> coord{};
    for (int i = 0; i < d; ++i) coord[static_cast<std::size_t>(i)] = b.lo[static_cast<std::size_t>(i)];
    while (true) {
        std::int64_t flat = 0;
        int sign = 1;
        for (int i = d - 1; i >= 0; --i) flat = flat * b.per_dim + coord[static_cast<std::size_t>(i)];
        for (int i = 0; i < d; ++i)
            if ((sig >> i) & 1u)
                if (coord[static_cast<std::size_t>(i)] - start[static_cast<std::size_t>(i)] >= half)
                    sign = -sign;
        fn(flat, sign);
        int i = 0;
        for (; i < d; ++i) {
            auto& ci = coord[static_cast<std::size_t>(i)];
            if (++ci < b.hi[static_cast<std::size_t>(i)]) break;
            ci = b.lo[static_cast<std::size_t>(i)];
        }
        if (i == d) break;
    }
}

/// Signed child list realising a single-axis Haar factor: h^0 keeps the cube
/// itself, a cancellative signature splits into children with corner signs.
/// Children that cannot meet the mesh are dropped. A cancellative symbol at
/// the maximal level has no mesh children and yields the empty list (its
/// pairings against mesh functions vanish). Fixed-capacity storage: this
/// sits inside the operator hot loops.
struct SignedParts {
    std::array<std::pair<Cube, int>, 1u << kMaxDim> part;
    int count = 0;

    const std::pair<Cube, int>* begin() const { return part.data(); }
    const std::pair<Cube, int>* end() const { return part.data() + count; }
};

inline SignedParts signed_parts(const Cube& c, std::uint32_t sig) {
    SignedParts out;
    if (sig == 0) {
        out.part[0] = {c, 1};
        out.count = 1;
        return out;
    }
    if (c.level >= c.depth()) return out;
    auto kids = c.children();
    const int d = c.dim();
    for (std::uint32_t corner = 0; corner < (1u << d); ++corner) {
        int sign = 1;
        for (int i = 0; i < d; ++i)
            if (((sig >> i) & 1u) && ((corner >> i) & 1u)) sign = -sign;
        if (kids[corner].in_index_range())
            out.part[static_cast<std::size_t>(out.count++)] = {kids[corner], sign};
    }
    return out;
}

}  // namespace detail

/// L^2 normalisation 2^{level*d/2} of a Haar factor.
template <class S>
S haar_norm_factor(const Cube& c) {
    return scalar_ops<S>::sqrt2_pow(static_cast<int>(c.level) * c.dim());
}

/// The function h^{eta}_I tensor h^{delta}_J on the mesh.
template <class S>
GridFunction<S> haar_function(const Mesh& mesh, const HaarSymbol& h1, const HaarSymbol& h2) {
    GridFunction<S> out(mesh);
    S n1 = haar_norm_factor<S>(h1.cube), n2 = haar_norm_factor<S>(h2.cube);
    detail::for_each_cell_signed(h1.cube, h1.sig, [&](std::int64_t c1, int s1) {
        detail::for_each_cell_signed(h2.cube, h2.sig, [&](std::int64_t c2, int s2) {
            out.at(c1, c2) = (s1 * s2 > 0) ? n1 * n2 : -(n1 * n2);
        });
    });
    return out;
}

template <class S>
Slice<S> haar_slice(const AxisGeom& geom, const HaarSymbol& h) {
    Slice<S> out(h.cube.param, geom);
    S n = haar_norm_factor<S>(h.cube);
    detail::for_each_cell_signed(h.cube, h.sig, [&](std::int64_t c, int s) {
        out.at(c) = s > 0 ? n : -n;
    });
    return out;
}

/// Full pairing <f, h_I^eta tensor h_J^delta>, computed cellwise.
template <class S>
S haar_pairing(const GridFunction<S>& f, const HaarSymbol& h1, const HaarSymbol& h2) {
    S acc = scalar_ops<S>::zero();
    detail::for_each_cell_signed(h1.cube, h1.sig, [&](std::int64_t c1, int s1) {
        detail::for_each_cell_signed(h2.cube, h2.sig, [&](std::int64_t c2, int s2) {
            if (s1 * s2 > 0)
                acc += f.at(c1, c2);
            else
                acc -= f.at(c1, c2);
        });
    });
    return acc * f.mesh().template cell_measure<S>() * haar_norm_factor<S>(h1.cube) *
           haar_norm_factor<S>(h2.cube);
}

template <class S>
S haar_pairing(const Slice<S>& f, const HaarSymbol& h) {
    S acc = scalar_ops<S>::zero();
    detail::for_each_cell_signed(h.cube, h.sig, [&](std::int64_t c, int s) {
        if (s > 0)
            acc += f.at(c);
        else
            acc -= f.at(c);
    });
    return acc * f.geom().template cell_measure<S>() * haar_norm_factor<S>(h.cube);
}

/// Partial pairing <f, h>_param: integrate against a Haar symbol in one
/// parameter, leaving a function of the other.
template <class S>
Slice<S> partial_pairing(const GridFunction<S>& f, int param, const HaarSymbol& h) {
    if (h.cube.param != param) throw std::invalid_argument("partial_pairing: param mismatch");
    const Mesh& mesh = f.mesh();
    int other = param == 1 ? 2 : 1;
    Slice<S> out(other, mesh.axis(other));
    S scale = mesh.axis(param).template cell_measure<S>() * haar_norm_factor<S>(h.cube);
    detail::for_each_cell_signed(h.cube, h.sig, [&](std::int64_t c, int s) {
        for (std::int64_t o = 0; o < out.size(); ++o) {
            const S& v = param == 1 ? f.at(c, o) : f.at(o, c);
            if (s > 0)
                out.at(o) += v;
            else
                out.at(o) -= v;
        }
    });
    out *= scale;
    return out;
}

/// <f>_{I,param}: the average in one parameter, as a function of the other.
template <class S>
Slice<S> partial_average(const GridFunction<S>& f, int param, const Cube& I) {
    HaarSymbol h{I, 0};
    Slice<S> out = partial_pairing(f, param, h);
    out *= haar_norm_factor<S>(I);  // |I|^{-1/2} * |I|^{-1/2} = 1/|I|
    return out;
}

// ---------------------------------------------------------------------------
// Precomputed integral tables: every Haar pairing against f on a fixed grid
// in O(2^d) lookups. colint/rowint hold single-axis cube integrals per cell
// of the other axis; rect holds full rectangle integrals.
// ---------------------------------------------------------------------------

template <class S>
class CoeffTables {
public:
    CoeffTables(const GridSpec& grid, const GridFunction<S>& f)
        : grid_(&grid), mesh_(f.mesh()), idx1_(grid, 1), idx2_(grid, 2) {
        if (!(Mesh::of(grid) == mesh_)) throw std::invalid_argument("CoeffTables: mesh mismatch");
        build(f);
    }

    const GridSpec& grid() const { return *grid_; }

    /// Integral of f over (I x J) intersect mesh.
    const S& integral(const Cube& I, const Cube& J) const {
        return rect_[static_cast<std::size_t>(idx1_.id(I) * idx2_.size() + idx2_.id(J))];
    }

    /// <f>_{I x J}, from the precomputed average table.
    const S& avg(const Cube& I, const Cube& J) const {
        return avg_[static_cast<std::size_t>(idx1_.id(I) * idx2_.size() + idx2_.id(J))];
    }

    /// <f>_{I,param} evaluated on a cell of the other axis.
    const S& partial_avg_on_cell(const Cube& I, std::int64_t other_cell) const {
        return I.param == 1
                   ? pavg1_[static_cast<std::size_t>(idx1_.id(I) * mesh_.cells2() + other_cell)]
                   : pavg2_[static_cast<std::size_t>(idx2_.id(I) * mesh_.cells1() + other_cell)];
    }

    /// <f, h^{eta}_I tensor h^{delta}_J> for single signatures.
    S pairing(const Cube& I, std::uint32_t eta, const Cube& J, std::uint32_t delta) const {
        auto p1 = detail::signed_parts(I, eta);
        auto p2 = detail::signed_parts(J, delta);
        S acc = scalar_ops<S>::zero();
        for (const auto& [A, sA] : p1)
            for (const auto& [B, sB] : p2) {
                if (sA * sB > 0)
                    acc += integral(A, B);
                else
                    acc -= integral(A, B);
            }
        return acc * haar_norm_factor<S>(I) * haar_norm_factor<S>(J);
    }

    /// Suppressed-signature pairing of one slot: sum over all nonzero
    /// signatures if cancellative, else the single h^0 value.
    S pairing_supp(const Cube& I, bool canc1, const Cube& J, bool canc2) const {
        S acc = scalar_ops<S>::zero();
        const std::uint32_t top1 = 1u << I.dim(), top2 = 1u << J.dim();
        for (std::uint32_t e = canc1 ? 1 : 0; e < (canc1 ? top1 : 1u); ++e)
            for (std::uint32_t d = canc2 ? 1 : 0; d < (canc2 ? top2 : 1u); ++d)
                acc += pairing(I, canc1 ? e : 0u, J, canc2 ? d : 0u);
        return acc;
    }

    /// Partial pairing value on a cell of the other axis, from the tables.
    S partial_on_cell(const Cube& I, std::uint32_t eta, std::int64_t other_cell) const {
        auto parts = detail::signed_parts(I, eta);
        S acc = scalar_ops<S>::zero();
        for (const auto& [A, sA] : parts) {
            const S& v = I.param == 1
                             ? colint_[static_cast<std::size_t>(idx1_.id(A) * mesh_.cells2() + other_cell)]
                             : rowint_[static_cast<std::size_t>(idx2_.id(A) * mesh_.cells1() + other_cell)];
            if (sA > 0)
                acc += v;
            else
                acc -= v;
        }
        return acc * haar_norm_factor<S>(I);
    }

private:
    void build(const GridFunction<S>& f) {
        const std::int64_t n1 = idx1_.size(), n2 = idx2_.size();
        const std::int64_t C1 = mesh_.cells1(), C2 = mesh_.cells2();
        colint_.assign(static_cast<std::size_t>(n1 * C2), scalar_ops<S>::zero());
        rowint_.assign(static_cast<std::size_t>(n2 * C1), scalar_ops<S>::zero());
        rect_.assign(static_cast<std::size_t>(n1 * n2), scalar_ops<S>::zero());

        S cm1 = mesh_.axis1.template cell_measure<S>();
        S cm2 = mesh_.axis2.template cell_measure<S>();

        // Finest level plus upward accumulation, param 1.
        for (int level = grid_->depth1(); level >= 0; --level) {
            for (const Cube& I : cubes_at_level(*grid_, 1, level)) {
                S* row = &colint_[static_cast<std::size_t>(idx1_.id(I) * C2)];
                if (level == grid_->depth1()) {
                    CellBox b = cell_box(I);
                    b.for_each([&](std::int64_t c1) {
                        for (std::int64_t c2 = 0; c2 < C2; ++c2) row[c2] += f.at(c1, c2) * cm1;
                    });
                } else {
                    for (const Cube& ch : I.children()) {
                        if (!ch.in_index_range()) continue;
                        const S* crow = &colint_[static_cast<std::size_t>(idx1_.id(ch) * C2)];
                        for (std::int64_t c2 = 0; c2 < C2; ++c2) row[c2] += crow[c2];
                    }
                }
            }
        }
        // Same along param 2.
        for (int level = grid_->depth2(); level >= 0; --level) {
            for (const Cube& J : cubes_at_level(*grid_, 2, level)) {
                S* row = &rowint_[static_cast<std::size_t>(idx2_.id(J) * C1)];
                if (level == grid_->depth2()) {
                    CellBox b = cell_box(J);
                    b.for_each([&](std::int64_t c2) {
                        for (std::int64_t c1 = 0; c1 < C1; ++c1) row[c1] += f.at(c1, c2) * cm2;
                    });
                } else {
                    for (const Cube& ch : J.children()) {
                        if (!ch.in_index_range()) continue;
                        const S* crow = &rowint_[static_cast<std::size_t>(idx2_.id(ch) * C1)];
                        for (std::int64_t c1 = 0; c1 < C1; ++c1) row[c1] += crow[c1];
                    }
                }
            }
        }
        // Rectangle integrals from column integrals.
        for (int l1 = 0; l1 <= grid_->depth1(); ++l1) {
            for (const Cube& I : cubes_at_level(*grid_, 1, l1)) {
                const S* col = &colint_[static_cast<std::size_t>(idx1_.id(I) * C2)];
                for (int l2 = grid_->depth2(); l2 >= 0; --l2) {
                    for (const Cube& J : cubes_at_level(*grid_, 2, l2)) {
                        S& cell = rect_[static_cast<std::size_t>(idx1_.id(I) * idx2_.size() + idx2_.id(J))];
                        if (l2 == grid_->depth2()) {
                            CellBox b = cell_box(J);
                            b.for_each([&](std::int64_t c2) { cell += col[c2] * cm2; });
                        } else {
                            for (const Cube& ch : J.children()) {
                                if (!ch.in_index_range()) continue;
                                cell += rect_[static_cast<std::size_t>(idx1_.id(I) * idx2_.size() +
                                                                       idx2_.id(ch))];
                            }
                        }
                    }
                }
            }
        }
        // Division-free average tables (measures are powers of two).
        avg_.assign(rect_.size(), scalar_ops<S>::zero());
        pavg1_.assign(colint_.size(), scalar_ops<S>::zero());
        pavg2_.assign(rowint_.size(), scalar_ops<S>::zero());
        for (int l1 = 0; l1 <= grid_->depth1(); ++l1)
            for (const Cube& I : cubes_at_level(*grid_, 1, l1)) {
                S invI = scalar_ops<S>::pow2(l1 * grid_->n());
                const S* col = &colint_[static_cast<std::size_t>(idx1_.id(I) * C2)];
                S* pav = &pavg1_[static_cast<std::size_t>(idx1_.id(I) * C2)];
                for (std::int64_t c = 0; c < C2; ++c) pav[c] = col[c] * invI;
                for (int l2 = 0; l2 <= grid_->depth2(); ++l2)
                    for (const Cube& J : cubes_at_level(*grid_, 2, l2)) {
                        S invJ = scalar_ops<S>::pow2(l2 * grid_->m());
                        std::size_t id = static_cast<std::size_t>(idx1_.id(I) * idx2_.size() + idx2_.id(J));
                        avg_[id] = rect_[id] * invI * invJ;
                    }
            }
        for (int l2 = 0; l2 <= grid_->depth2(); ++l2)
            for (const Cube& J : cubes_at_level(*grid_, 2, l2)) {
                S invJ = scalar_ops<S>::pow2(l2 * grid_->m());
                const S* row = &rowint_[static_cast<std::size_t>(idx2_.id(J) * C1)];
                S* pav = &pavg2_[static_cast<std::size_t>(idx2_.id(J) * C1)];
                for (std::int64_t c = 0; c < C1; ++c) pav[c] = row[c] * invJ;
            }
    }

    const GridSpec* grid_;
    Mesh mesh_;
    CubeIndexer idx1_, idx2_;
    std::vector<S> colint_, rowint_, rect_, avg_, pavg1_, pavg2_;
};

// ---------------------------------------------------------------------------
// Martingale differences, averages and blocks.
// ---------------------------------------------------------------------------

enum class MartingaleKind { Delta1, Delta2, DeltaRect, Avg1, Avg2, AvgRect };

/// E^1_I f = <f>_{I,1} 1_I as a mesh function.
template <class S>
GridFunction<S> martingale_avg1(const GridFunction<S>& f, const Cube& I) {
    GridFunction<S> out(f.mesh());
    Slice<S> a = partial_average(f, 1, I);
    cell_box(I).for_each([&](std::int64_t c1) {
        for (std::int64_t c2 = 0; c2 < f.cells2(); ++c2) out.at(c1, c2) = a.at(c2);
    });
    return out;
}

template <class S>
GridFunction<S> martingale_avg2(const GridFunction<S>& f, const Cube& J) {
    GridFunction<S> out(f.mesh());
    Slice<S> a = partial_average(f, 2, J);
    cell_box(J).for_each([&](std::int64_t c2) {
        for (std::int64_t c1 = 0; c1 < f.cells1(); ++c1) out.at(c1, c2) = a.at(c1);
    });
    return out;
}

template <class S>
GridFunction<S> martingale_avg_rect(const GridFunction<S>& f, const Cube& I, const Cube& J) {
    GridFunction<S> out(f.mesh());
    S a = average_over(f, I, J);
    CellBox b1 = cell_box(I), b2 = cell_box(J);
    b1.for_each([&](std::int64_t c1) { b2.for_each([&](std::int64_t c2) { out.at(c1, c2) = a; }); });
    return out;
}

/// Delta^1_I f via children averages; zero when I has no mesh children.
template <class S>
GridFunction<S> martingale_delta1(const GridFunction<S>& f, const Cube& I) {
    GridFunction<S> out(f.mesh());
    if (I.level >= I.depth()) return out;
    Slice<S> pa = partial_average(f, 1, I);
    for (const Cube& ch : children_in_range(I)) {
        Slice<S> ca = partial_average(f, 1, ch);
        cell_box(ch).for_each([&](std::int64_t c1) {
            for (std::int64_t c2 = 0; c2 < f.cells2(); ++c2) out.at(c1, c2) = ca.at(c2) - pa.at(c2);
        });
    }
    return out;
}

template <class S>
GridFunction<S> martingale_delta2(const GridFunction<S>& f, const Cube& J) {
    GridFunction<S> out(f.mesh());
    if (J.level >= J.depth()) return out;
    Slice<S> pa = partial_average(f, 2, J);
    for (const Cube& ch : children_in_range(J)) {
        Slice<S> ca = partial_average(f, 2, ch);
        cell_box(ch).for_each([&](std::int64_t c2) {
            for (std::int64_t c1 = 0; c1 < f.cells1(); ++c1) out.at(c1, c2) = ca.at(c1) - pa.at(c1);
        });
    }
    return out;
}

template <class S>
GridFunction<S> martingale_delta_rect(const GridFunction<S>& f, const Cube& I, const Cube& J) {
    return martingale_delta1(martingale_delta2(f, J), I);
}

template <class S>
GridFunction<S> martingale(const GridFunction<S>& f, MartingaleKind kind, const Cube& I,
                           const Cube& J = Cube{}) {
    switch (kind) {
        case MartingaleKind::Delta1: return martingale_delta1(f, I);
        case MartingaleKind::Delta2: return martingale_delta2(f, I);
        case MartingaleKind::DeltaRect: return martingale_delta_rect(f, I, J);
        case MartingaleKind::Avg1: return martingale_avg1(f, I);
        case MartingaleKind::Avg2: return martingale_avg2(f, I);
        case MartingaleKind::AvgRect: return martingale_avg_rect(f, I, J);
    }
    throw std::invalid_argument("martingale: unknown kind");
}

/// One-parameter martingale block Delta^1_{K,i} f.
template <class S>
GridFunction<S> martingale_block1(const GridFunction<S>& f, const Cube& K, int i) {
    GridFunction<S> out(f.mesh());
    if (K.level + i > K.depth()) throw std::invalid_argument("martingale_block1: depth exceeded");
    for (const Cube& I : descendants(K, i)) out += martingale_delta1(f, I);
    return out;
}

template <class S>
GridFunction<S> martingale_block2(const GridFunction<S>& f, const Cube& V, int j) {
    GridFunction<S> out(f.mesh());
    if (V.level + j > V.depth()) throw std::invalid_argument("martingale_block2: depth exceeded");
    for (const Cube& J : descendants(V, j)) out += martingale_delta2(f, J);
    return out;
}

/// Bi-parameter block Delta^{i,j}_{K x V} f = Delta^1_{K,i}(Delta^2_{V,j} f).
template <class S>
GridFunction<S> martingale_block(const GridFunction<S>& f, const Cube& K, int i, const Cube& V,
                                 int j) {
    return martingale_block1(martingale_block2(f, V, j), K, i);
}

// ---------------------------------------------------------------------------
// Haar expansion and reconstruction.
// ---------------------------------------------------------------------------

template <class S>
struct HaarCoefficient {
    HaarSymbol h1, h2;
    S value;
};

/// Complete orthogonal decomposition on the mesh: cancellative rectangle
/// coefficients at levels below the depth, mixed layers against unit-scale
/// h^0, and the unit-scale average layer. For the standard grid the system is
/// orthonormal, so Parseval holds coefficient-wise.
template <class S>
std::vector<HaarCoefficient<S>> haar_expand(const GridSpec& grid, const GridFunction<S>& f) {
    CoeffTables<S> tab(grid, f);
    std::vector<HaarCoefficient<S>> out;
    const std::uint32_t t1 = 1u << grid.n(), t2 = 1u << grid.m();

    std::vector<Cube> canc1, canc2;
    for (int l = 0; l < grid.depth1(); ++l)
        for (const Cube& I : cubes_at_level(grid, 1, l)) canc1.push_back(I);
    for (int l = 0; l < grid.depth2(); ++l)
        for (const Cube& J : cubes_at_level(grid, 2, l)) canc2.push_back(J);
    auto unit1 = cubes_at_level(grid, 1, 0);
    auto unit2 = cubes_at_level(grid, 2, 0);

    for (const Cube& I : canc1)
        for (std::uint32_t e = 1; e < t1; ++e)
            for (const Cube& J : canc2)
                for (std::uint32_t d = 1; d < t2; ++d)
                    out.push_back({HaarSymbol{I, e}, HaarSymbol{J, d}, tab.pairing(I, e, J, d)});
    for (const Cube& I : canc1)
        for (std::uint32_t e = 1; e < t1; ++e)
            for (const Cube& J : unit2)
                out.push_back({HaarSymbol{I, e}, HaarSymbol{J, 0}, tab.pairing(I, e, J, 0)});
    for (const Cube& I : unit1)
        for (const Cube& J : canc2)
            for (std::uint32_t d = 1; d < t2; ++d)
                out.push_back({HaarSymbol{I, 0}, HaarSymbol{J, d}, tab.pairing(I, 0, J, d)});
    for (const Cube& I : unit1)
        for (const Cube& J : unit2)
            out.push_back({HaarSymbol{I, 0}, HaarSymbol{J, 0}, tab.pairing(I, 0, J, 0)});
    return out;
}

template <class S>
GridFunction<S> haar_reconstruct(const Mesh& mesh, const std::vector<HaarCoefficient<S>>& coeffs) {
    GridFunction<S> out(mesh);
    for (const auto& c : coeffs) {
        if (scalar_ops<S>::is_zero(c.value)) continue;
        S n = c.value * haar_norm_factor<S>(c.h1.cube) * haar_norm_factor<S>(c.h2.cube);
        detail::for_each_cell_signed(c.h1.cube, c.h1.sig, [&](std::int64_t c1, int s1) {
            detail::for_each_cell_signed(c.h2.cube, c.h2.sig, [&](std::int64_t c2, int s2) {
                if (s1 * s2 > 0)
                    out.at(c1, c2) += n;
                else
                    out.at(c1, c2) -= n;
            });
        });
    }
    return out;
}

}  // namespace bihaar
