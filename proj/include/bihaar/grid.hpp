#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "bihaar/exact.hpp"

namespace bihaar {

inline constexpr int kMaxDim = 3;

/// Splitmix64 step; used to derive independent child seeds deterministically.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// A pair of (possibly translated) dyadic grids over the ambient box
/// [0,2)^n x [0,2)^m, truncated at depths N1 and N2. The translation of the
/// level-j cubes is sum_{i>j} 2^{-i} omega_i per axis, so digits beyond the
/// depth are invisible on the cell mesh and are fixed to zero.
class GridSpec {
public:
    GridSpec() = default;

    static GridSpec standard(int n, int m, int N1, int N2) {
        return GridSpec(n, m, N1, N2,
                        std::vector<std::uint32_t>(static_cast<std::size_t>(N1), 0u),
                        std::vector<std::uint32_t>(static_cast<std::size_t>(N2), 0u));
    }

    /// omega1[i-1] holds the digit vector for index i as a bitmask over the n
    /// axis-1 dimensions (bit d = component of omega_i in dimension d).
    static GridSpec shifted(int n, int m, int N1, int N2,
                            std::vector<std::uint32_t> omega1,
                            std::vector<std::uint32_t> omega2) {
        if (static_cast<int>(omega1.size()) != N1 || static_cast<int>(omega2.size()) != N2)
            throw std::invalid_argument("GridSpec: digit sequence length must equal depth");
        for (auto d : omega1)
            if (d >> n) throw std::invalid_argument("GridSpec: omega1 digit arity mismatch");
        for (auto d : omega2)
            if (d >> m) throw std::invalid_argument("GridSpec: omega2 digit arity mismatch");
        return GridSpec(n, m, N1, N2, std::move(omega1), std::move(omega2));
    }

    int dim(int param) const { return param == 1 ? n_ : m_; }
    int depth(int param) const { return param == 1 ? N1_ : N2_; }
    int n() const { return n_; }
    int m() const { return m_; }
    int depth1() const { return N1_; }
    int depth2() const { return N2_; }

    /// Digit for index i (1-based), as a bitmask over dimensions.
    std::uint32_t digit(int param, int i) const {
        const auto& om = param == 1 ? omega1_ : omega2_;
        return om[static_cast<std::size_t>(i - 1)];
    }
    const std::vector<std::uint32_t>& omega(int param) const {
        return param == 1 ? omega1_ : omega2_;
    }

    /// Translation of level-`level` cubes along dimension `d`, measured in
    /// finest-mesh cells: sum_{i>level} 2^{N-i} omega_i[d].
    std::int64_t shift_cells(int param, int level, int d) const {
        const int N = depth(param);
        std::int64_t s = 0;
        for (int i = level + 1; i <= N; ++i)
            s += static_cast<std::int64_t>((digit(param, i) >> d) & 1u) << (N - i);
        return s;
    }

    bool is_standard() const {
        for (auto d : omega1_)
            if (d) return false;
        for (auto d : omega2_)
            if (d) return false;
        return true;
    }

    bool operator==(const GridSpec& o) const {
        return n_ == o.n_ && m_ == o.m_ && N1_ == o.N1_ && N2_ == o.N2_ &&
               omega1_ == o.omega1_ && omega2_ == o.omega2_;
    }

private:
    GridSpec(int n, int m, int N1, int N2,
             std::vector<std::uint32_t> o1, std::vector<std::uint32_t> o2)
        : n_(n), m_(m), N1_(N1), N2_(N2), omega1_(std::move(o1)), omega2_(std::move(o2)) {
        if (n < 1 || m < 1 || n > kMaxDim || m > kMaxDim)
            throw std::invalid_argument("GridSpec: axis dims must be in [1,3]");
        if (N1 < 0 || N2 < 0) throw std::invalid_argument("GridSpec: negative depth");
    }

    int n_ = 1, m_ = 1, N1_ = 0, N2_ = 0;
    std::vector<std::uint32_t> omega1_, omega2_;
};

/// i.i.d. uniform digits in {0,1}^n for indices 1..N, deterministic per seed.
inline std::vector<std::uint32_t> sample_omega(std::uint64_t seed, int n, int N) {
    std::mt19937_64 rng(mix_seed(seed));
    std::vector<std::uint32_t> out(static_cast<std::size_t>(N));
    for (auto& d : out) d = static_cast<std::uint32_t>(rng() & ((1u << n) - 1u));
    return out;
}

/// A dyadic cube of one parameter space. Positions index the standard cube
/// that the grid translation is applied to; position -1 is the cube whose
/// translate pokes into [0,2)^d from the left. The owning GridSpec must
/// outlive the cube.
struct Cube {
    const GridSpec* grid = nullptr;
    std::int8_t param = 1;
    std::int8_t level = 0;
    std::array<std::int32_t, kMaxDim> pos{{0, 0, 0}};

    int dim() const { return grid->dim(param); }
    int depth() const { return grid->depth(param); }
    int cells_per_dim() const { return 1 << (depth() - level); }

    /// First mesh cell in dimension d; may be negative or past the mesh for
    /// boundary cubes of translated grids.
    std::int64_t cell_start(int d) const {
        return static_cast<std::int64_t>(pos[static_cast<std::size_t>(d)]) * cells_per_dim() +
               grid->shift_cells(param, level, d);
    }

    bool in_mesh() const {
        const std::int64_t axis = std::int64_t{1} << (depth() + 1);
        for (int d = 0; d < dim(); ++d) {
            std::int64_t s = cell_start(d);
            if (s < 0 || s + cells_per_dim() > axis) return false;
        }
        return true;
    }

    bool intersects_mesh() const {
        const std::int64_t axis = std::int64_t{1} << (depth() + 1);
        for (int d = 0; d < dim(); ++d) {
            std::int64_t s = cell_start(d);
            if (s + cells_per_dim() <= 0 || s >= axis) return false;
        }
        return true;
    }

    Cube ancestor(int k) const {
        if (k < 0 || k > level) throw std::invalid_argument("ancestor: k exceeds level");
        Cube a = *this;
        for (int step = 0; step < k; ++step) {
            std::uint32_t dig = grid->digit(param, a.level);  // digit used between a.level-1 and a.level
            for (int d = 0; d < dim(); ++d) {
                std::int32_t q = a.pos[static_cast<std::size_t>(d)] -
                                 static_cast<std::int32_t>((dig >> d) & 1u);
                a.pos[static_cast<std::size_t>(d)] = q >= 0 ? q / 2 : -((-q + 1) / 2);
            }
            a.level--;
        }
        return a;
    }

    std::vector<Cube> children() const {
        if (level >= depth()) throw std::invalid_argument("children: cube at maximal depth");
        std::uint32_t dig = grid->digit(param, level + 1);
        std::vector<Cube> out;
        out.reserve(std::size_t{1} << dim());
        for (std::uint32_t c = 0; c < (1u << dim()); ++c) {
            Cube ch = *this;
            ch.level = static_cast<std::int8_t>(level + 1);
            for (int d = 0; d < dim(); ++d)
                ch.pos[static_cast<std::size_t>(d)] =
                    2 * pos[static_cast<std::size_t>(d)] + static_cast<std::int32_t>((c >> d) & 1u) +
                    static_cast<std::int32_t>((dig >> d) & 1u);
            out.push_back(ch);
        }
        return out;
    }

    bool contains(const Cube& q) const {
        if (q.param != param || q.level < level) return false;
        Cube a = q.ancestor(q.level - level);
        return a == *this;
    }

    bool operator==(const Cube& o) const {
        if (param != o.param || level != o.level) return false;
        for (int d = 0; d < dim(); ++d)
            if (pos[static_cast<std::size_t>(d)] != o.pos[static_cast<std::size_t>(d)]) return false;
        return true;
    }
    bool operator!=(const Cube& o) const { return !(*this == o); }

    /// |Q| = 2^{-level*dim}, exact in either backend.
    template <class S>
    S measure() const {
        return scalar_ops<S>::pow2(-level * dim());
    }
    double measure_d() const { return std::ldexp(1.0, -level * dim()); }

    /// Positions -1 .. 2^{level+1}-1 are the cubes that can meet the mesh;
    /// anything outside lies fully beyond the ambient box.
    bool in_index_range() const {
        for (int d = 0; d < dim(); ++d) {
            std::int32_t p = pos[static_cast<std::size_t>(d)];
            if (p < -1 || p > (2 << level) - 1) return false;
        }
        return true;
    }
};

inline Cube make_cube(const GridSpec& g, int param, int level,
                      std::initializer_list<std::int32_t> pos) {
    Cube c;
    c.grid = &g;
    c.param = static_cast<std::int8_t>(param);
    c.level = static_cast<std::int8_t>(level);
    int d = 0;
    for (auto p : pos) c.pos[static_cast<std::size_t>(d++)] = p;
    return c;
}

/// Cubes of one level whose translate meets the mesh. For the standard grid
/// this is exactly the 2^{level+1} positions per dimension.
inline std::vector<Cube> cubes_at_level(const GridSpec& g, int param, int level) {
    const int d = g.dim(param);
    std::array<std::int32_t, kMaxDim> lo{}, hi{};
    for (int i = 0; i < d; ++i) {
        lo[static_cast<std::size_t>(i)] = g.shift_cells(param, level, i) > 0 ? -1 : 0;
        hi[static_cast<std::size_t>(i)] = (2 << level) - 1;
    }
    std::vector<Cube> out;
    Cube c;
    c.grid = &g;
    c.param = static_cast<std::int8_t>(param);
    c.level = static_cast<std::int8_t>(level);
    std::array<std::int32_t, kMaxDim> p = lo;
    while (true) {
        c.pos = p;
        out.push_back(c);
        int i = 0;
        for (; i < d; ++i) {
            if (p[static_cast<std::size_t>(i)] < hi[static_cast<std::size_t>(i)]) {
                p[static_cast<std::size_t>(i)]++;
                break;
            }
            p[static_cast<std::size_t>(i)] = lo[static_cast<std::size_t>(i)];
        }
        if (i == d) break;
    }
    return out;
}

inline std::vector<Cube> all_cubes(const GridSpec& g, int param) {
    std::vector<Cube> out;
    for (int level = 0; level <= g.depth(param); ++level) {
        auto lv = cubes_at_level(g, param, level);
        out.insert(out.end(), lv.begin(), lv.end());
    }
    return out;
}

/// Children that can meet the mesh (positions within the index range).
inline std::vector<Cube> children_in_range(const Cube& c) {
    std::vector<Cube> out;
    for (const Cube& k : c.children())
        if (k.in_index_range()) out.push_back(k);
    return out;
}

/// All cubes exactly `gens` generations below `top` that can meet the mesh.
inline std::vector<Cube> descendants(const Cube& top, int gens) {
    std::vector<Cube> cur{top};
    for (int s = 0; s < gens; ++s) {
        std::vector<Cube> next;
        next.reserve(cur.size() << top.dim());
        for (const auto& c : cur) {
            auto ch = children_in_range(c);
            next.insert(next.end(), ch.begin(), ch.end());
        }
        cur = std::move(next);
    }
    return cur;
}

/// The unique level-`level` cube of the grid containing a given mesh cell
/// (per-dimension cell coordinates).
inline Cube containing_cube(const GridSpec& g, int param, int level,
                            const std::array<std::int64_t, kMaxDim>& cell) {
    Cube c;
    c.grid = &g;
    c.param = static_cast<std::int8_t>(param);
    c.level = static_cast<std::int8_t>(level);
    const std::int64_t cpd = std::int64_t{1} << (g.depth(param) - level);
    for (int d = 0; d < g.dim(param); ++d) {
        std::int64_t rel = cell[static_cast<std::size_t>(d)] - g.shift_cells(param, level, d);
        std::int64_t q = rel >= 0 ? rel / cpd : -((-rel + cpd - 1) / cpd);
        c.pos[static_cast<std::size_t>(d)] = static_cast<std::int32_t>(q);
    }
    return c;
}

/// Product of one cube per parameter.
struct Rect {
    Cube first, second;

    template <class S>
    S measure() const {
        return first.measure<S>() * second.measure<S>();
    }
    bool operator==(const Rect& o) const { return first == o.first && second == o.second; }
};

/// Contiguous cube ids per (grid,param), with slot reserved for position -1 at
/// every level so translated grids index uniformly.
class CubeIndexer {
public:
    CubeIndexer() = default;
    CubeIndexer(const GridSpec& g, int param) : d_(g.dim(param)), N_(g.depth(param)) {
        offsets_.resize(static_cast<std::size_t>(N_) + 2, 0);
        for (int level = 0; level <= N_; ++level) {
            per_dim_.push_back((2 << level) + 1);  // positions -1..2^{level+1}-1
            std::int64_t count = 1;
            for (int i = 0; i < d_; ++i) count *= per_dim_.back();
            offsets_[static_cast<std::size_t>(level) + 1] =
                offsets_[static_cast<std::size_t>(level)] + count;
        }
    }

    std::int64_t size() const { return offsets_.back(); }

    std::int64_t id(const Cube& c) const {
        std::int64_t idx = 0;
        const std::int64_t per = per_dim_[static_cast<std::size_t>(c.level)];
        for (int i = d_ - 1; i >= 0; --i)
            idx = idx * per + (c.pos[static_cast<std::size_t>(i)] + 1);
        return offsets_[static_cast<std::size_t>(c.level)] + idx;
    }

    std::int64_t level_offset(int level) const { return offsets_[static_cast<std::size_t>(level)]; }

private:
    int d_ = 1, N_ = 0;
    std::vector<std::int64_t> offsets_;
    std::vector<std::int64_t> per_dim_;
};

}  // namespace bihaar
