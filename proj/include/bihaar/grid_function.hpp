#pragma once

#include <cstdint>
#include <functional>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "bihaar/grid.hpp"

namespace bihaar {

/// One axis group of the product mesh: d dimensions, 2^{N+1} cells per
/// dimension covering [0,2)^d at resolution 2^{-N}.
struct AxisGeom {
    int d = 1;
    int N = 0;

    std::int64_t cells_per_dim() const { return std::int64_t{1} << (N + 1); }
    std::int64_t size() const {
        std::int64_t s = 1;
        for (int i = 0; i < d; ++i) s *= cells_per_dim();
        return s;
    }
    /// Lebesgue measure of one cell, 2^{-Nd}.
    template <class S>
    S cell_measure() const {
        return scalar_ops<S>::pow2(-N * d);
    }
    bool operator==(const AxisGeom& o) const { return d == o.d && N == o.N; }
};

/// Clipped per-dimension cell ranges of a cube, plus flat iteration.
struct CellBox {
    int d = 1;
    std::int64_t per_dim = 1;                        // cells per dimension of the axis
    std::array<std::int64_t, kMaxDim> lo{}, hi{};    // half-open, already clipped

    bool empty() const {
        for (int i = 0; i < d; ++i)
            if (lo[static_cast<std::size_t>(i)] >= hi[static_cast<std::size_t>(i)]) return true;
        return false;
    }
    std::int64_t count() const {
        std::int64_t c = 1;
        for (int i = 0; i < d; ++i)
            c *= std::max<std::int64_t>(0, hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)]);
        return c;
    }

    /// Visit flat axis indices (dimension 0 has stride 1).
    template <class F>
    void for_each(F&& fn) const {
        if (empty()) return;
        std::array<std::int64_t, kMaxDim> c{};
        for (int i = 0; i < d; ++i) c[static_cast<std::size_t>(i)] = lo[static_cast<std::size_t>(i)];
        while (true) {
            std::int64_t flat = 0;
            for (int i = d - 1; i >= 0; --i) flat = flat * per_dim + c[static_cast<std::size_t>(i)];
            fn(flat);
            int i = 0;
            for (; i < d; ++i) {
                auto& ci = c[static_cast<std::size_t>(i)];
                if (++ci < hi[static_cast<std::size_t>(i)]) break;
                ci = lo[static_cast<std::size_t>(i)];
            }
            if (i == d) break;
        }
    }
};

inline CellBox cell_box(const Cube& c) {
    CellBox b;
    b.d = c.dim();
    b.per_dim = std::int64_t{1} << (c.depth() + 1);
    for (int i = 0; i < b.d; ++i) {
        std::int64_t s = c.cell_start(i);
        b.lo[static_cast<std::size_t>(i)] = std::max<std::int64_t>(0, s);
        b.hi[static_cast<std::size_t>(i)] = std::min<std::int64_t>(b.per_dim, s + c.cells_per_dim());
    }
    return b;
}

/// The product mesh both parameters share. The mesh depends only on the axis
/// dimensions and depths, never on grid translations: every shifted-grid cube
/// at admissible levels is a union of mesh cells.
struct Mesh {
    AxisGeom axis1{1, 0}, axis2{1, 0};

    static Mesh of(const GridSpec& g) {
        return Mesh{{g.n(), g.depth1()}, {g.m(), g.depth2()}};
    }
    const AxisGeom& axis(int param) const { return param == 1 ? axis1 : axis2; }
    std::int64_t cells1() const { return axis1.size(); }
    std::int64_t cells2() const { return axis2.size(); }
    std::int64_t size() const { return cells1() * cells2(); }
    template <class S>
    S cell_measure() const {
        return axis1.cell_measure<S>() * axis2.cell_measure<S>();
    }
    bool operator==(const Mesh& o) const { return axis1 == o.axis1 && axis2 == o.axis2; }
    bool operator!=(const Mesh& o) const { return !(*this == o); }
};

/// Piecewise-constant function on the product mesh; the universal carrier for
/// inputs, symbols, weights and operator outputs. Cell (c1,c2) sits at flat
/// index c1*cells2 + c2.
template <class S>
class GridFunction {
public:
    GridFunction() = default;
    explicit GridFunction(const Mesh& mesh)
        : mesh_(mesh), v_(static_cast<std::size_t>(mesh.size()), scalar_ops<S>::zero()) {}
    GridFunction(const Mesh& mesh, std::vector<S> values) : mesh_(mesh), v_(std::move(values)) {
        if (static_cast<std::int64_t>(v_.size()) != mesh.size())
            throw std::invalid_argument("GridFunction: value count does not match mesh");
    }

    const Mesh& mesh() const { return mesh_; }
    std::int64_t cells1() const { return mesh_.cells1(); }
    std::int64_t cells2() const { return mesh_.cells2(); }
    std::int64_t size() const { return mesh_.size(); }

    const S& at(std::int64_t c1, std::int64_t c2) const {
        return v_[static_cast<std::size_t>(c1 * mesh_.cells2() + c2)];
    }
    S& at(std::int64_t c1, std::int64_t c2) {
        return v_[static_cast<std::size_t>(c1 * mesh_.cells2() + c2)];
    }
    const std::vector<S>& values() const { return v_; }
    std::vector<S>& values() { return v_; }

    std::optional<Rect> support_hint;

    GridFunction& operator+=(const GridFunction& o) {
        check(o);
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
        return *this;
    }
    GridFunction& operator-=(const GridFunction& o) {
        check(o);
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
        return *this;
    }
    GridFunction& operator*=(const S& c) {
        for (auto& x : v_) x *= c;
        return *this;
    }
    friend GridFunction operator+(GridFunction a, const GridFunction& b) { return a += b; }
    friend GridFunction operator-(GridFunction a, const GridFunction& b) { return a -= b; }
    friend GridFunction operator*(const S& c, GridFunction a) { return a *= c; }

    bool operator==(const GridFunction& o) const { return mesh_ == o.mesh_ && v_ == o.v_; }

private:
    void check(const GridFunction& o) const {
        if (!(mesh_ == o.mesh_)) throw std::invalid_argument("GridFunction: mesh mismatch");
    }

    Mesh mesh_;
    std::vector<S> v_;
};

/// One-parameter function on a single axis group's mesh (the carrier for
/// partial pairings and for paraproduct symbols of one parameter).
template <class S>
class Slice {
public:
    Slice() = default;
    Slice(int param, const AxisGeom& geom)
        : param_(param), geom_(geom), v_(static_cast<std::size_t>(geom.size()), scalar_ops<S>::zero()) {}

    int param() const { return param_; }
    const AxisGeom& geom() const { return geom_; }
    std::int64_t size() const { return geom_.size(); }

    const S& at(std::int64_t c) const { return v_[static_cast<std::size_t>(c)]; }
    S& at(std::int64_t c) { return v_[static_cast<std::size_t>(c)]; }
    const std::vector<S>& values() const { return v_; }
    std::vector<S>& values() { return v_; }

    Slice& operator+=(const Slice& o) {
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
        return *this;
    }
    Slice& operator-=(const Slice& o) {
        for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
        return *this;
    }
    Slice& operator*=(const S& c) {
        for (auto& x : v_) x *= c;
        return *this;
    }
    friend Slice operator*(const S& c, Slice a) { return a *= c; }

private:
    int param_ = 1;
    AxisGeom geom_{};
    std::vector<S> v_;
};

template <class S>
GridFunction<S> pointwise_product(const GridFunction<S>& a, const GridFunction<S>& b) {
    GridFunction<S> out(a.mesh());
    for (std::int64_t i = 0; i < a.size(); ++i)
        out.values()[static_cast<std::size_t>(i)] =
            a.values()[static_cast<std::size_t>(i)] * b.values()[static_cast<std::size_t>(i)];
    return out;
}

template <class S>
Slice<S> pointwise_product(const Slice<S>& a, const Slice<S>& b) {
    Slice<S> out(a.param(), a.geom());
    for (std::int64_t i = 0; i < a.size(); ++i)
        out.at(i) = a.at(i) * b.at(i);
    return out;
}

template <class S>
GridFunction<S> constant_function(const Mesh& mesh, const S& c) {
    GridFunction<S> f(mesh);
    for (auto& x : f.values()) x = c;
    return f;
}

inline GridFunction<double> to_float(const GridFunction<Exact>& f) {
    GridFunction<double> out(f.mesh());
    for (std::int64_t i = 0; i < f.size(); ++i)
        out.values()[static_cast<std::size_t>(i)] = f.values()[static_cast<std::size_t>(i)].to_double();
    return out;
}

inline Slice<double> to_float(const Slice<Exact>& f) {
    Slice<double> out(f.param(), f.geom());
    for (std::int64_t i = 0; i < f.size(); ++i) out.at(i) = f.at(i).to_double();
    return out;
}

/// Integral over a rectangle (intersected with the mesh; functions extend by
/// zero outside it). Measures in the normalisation are always the true cube
/// measures.
template <class S>
S integral_over(const GridFunction<S>& f, const Cube& I, const Cube& J) {
    S cm = f.mesh().template cell_measure<S>();
    S acc = scalar_ops<S>::zero();
    CellBox b1 = cell_box(I), b2 = cell_box(J);
    b1.for_each([&](std::int64_t c1) {
        b2.for_each([&](std::int64_t c2) { acc += f.at(c1, c2); });
    });
    return acc * cm;
}

template <class S>
S average_over(const GridFunction<S>& f, const Cube& I, const Cube& J) {
    return integral_over(f, I, J) / (I.measure<S>() * J.measure<S>());
}

template <class S>
S integral_over(const Slice<S>& f, const Cube& I) {
    S cm = f.geom().template cell_measure<S>();
    S acc = scalar_ops<S>::zero();
    cell_box(I).for_each([&](std::int64_t c) { acc += f.at(c); });
    return acc * cm;
}

template <class S>
S average_over(const Slice<S>& f, const Cube& I) {
    return integral_over(f, I) / I.measure<S>();
}

template <class S>
S integral(const GridFunction<S>& f) {
    S cm = f.mesh().template cell_measure<S>();
    S acc = scalar_ops<S>::zero();
    for (const auto& x : f.values()) acc += x;
    return acc * cm;
}

template <class S>
S inner(const GridFunction<S>& f, const GridFunction<S>& g) {
    S cm = f.mesh().template cell_measure<S>();
    S acc = scalar_ops<S>::zero();
    for (std::int64_t i = 0; i < f.size(); ++i)
        acc += f.values()[static_cast<std::size_t>(i)] * g.values()[static_cast<std::size_t>(i)];
    return acc * cm;
}

template <class S>
S inner(const Slice<S>& f, const Slice<S>& g) {
    S cm = f.geom().template cell_measure<S>();
    S acc = scalar_ops<S>::zero();
    for (std::int64_t i = 0; i < f.size(); ++i) acc += f.at(i) * g.at(i);
    return acc * cm;
}

namespace detail {
inline std::string cell_to_text(const Exact& v) { return v.str(); }
inline std::string cell_to_text(double v) {
    std::ostringstream os;
    os << std::hexfloat << v;
    return os.str();
}
inline void cell_from_text(std::istream& in, Exact& v) {
    std::string a, b;
    in >> a >> b;
    v = Exact::parse(a, b);
}
inline void cell_from_text(std::istream& in, double& v) {
    std::string t;
    in >> t;
    v = std::strtod(t.c_str(), nullptr);
}
}  // namespace detail

/// Textual serialisation: header with dims/depths/backend, then cells in
/// row-major order (axis-1 cell outer). Exact cells round-trip bit-exactly as
/// two rational strings.
template <class S>
void write_gridfunction(std::ostream& out, const GridFunction<S>& f) {
    out << "bihaar-gridfunction v1\n";
    out << f.mesh().axis1.d << " " << f.mesh().axis2.d << " " << f.mesh().axis1.N << " "
        << f.mesh().axis2.N << " " << scalar_ops<S>::name() << "\n";
    for (std::int64_t i = 0; i < f.size(); ++i)
        out << detail::cell_to_text(f.values()[static_cast<std::size_t>(i)]) << "\n";
}

template <class S>
GridFunction<S> read_gridfunction(std::istream& in) {
    std::string magic, version;
    in >> magic >> version;
    if (magic != "bihaar-gridfunction" || version != "v1")
        throw std::invalid_argument("read_gridfunction: bad header");
    int n, m, N1, N2;
    std::string backend;
    in >> n >> m >> N1 >> N2 >> backend;
    if (backend != scalar_ops<S>::name())
        throw std::invalid_argument("read_gridfunction: backend mismatch: " + backend);
    Mesh mesh{{n, N1}, {m, N2}};
    GridFunction<S> f(mesh);
    for (std::int64_t i = 0; i < f.size(); ++i)
        detail::cell_from_text(in, f.values()[static_cast<std::size_t>(i)]);
    if (!in) throw std::invalid_argument("read_gridfunction: truncated payload");
    return f;
}

}  // namespace bihaar
