#pragma once

#include <memory>
#include <string>

#include "bihaar/spaces.hpp"
#include "json.hpp"

namespace bihaar {

enum class OpClass { Shift, PartialParaproduct, FullParaproduct };

inline const char* op_class_name(OpClass c) {
    switch (c) {
        case OpClass::Shift: return "shift";
        case OpClass::PartialParaproduct: return "partial-paraproduct";
        case OpClass::FullParaproduct: return "full-paraproduct";
    }
    return "?";
}

/// Per-slot (f1, f2, output) and per-parameter cancellation flags. Shifts
/// carry exactly one non-cancellative slot per parameter and full
/// paraproducts exactly one cancellative slot per parameter; that gives the
/// nine types of each. A permissive escape hatch allows experimenting with
/// other placements.
struct CancellationPattern {
    std::array<std::array<bool, 2>, 3> canc{{{true, true}, {true, true}, {true, true}}};

    static CancellationPattern shift_pattern(int h0_slot_p1, int h0_slot_p2) {
        CancellationPattern p;
        p.canc[static_cast<std::size_t>(h0_slot_p1)][0] = false;
        p.canc[static_cast<std::size_t>(h0_slot_p2)][1] = false;
        return p;
    }
    static CancellationPattern full_pattern(int canc_slot_p1, int canc_slot_p2) {
        CancellationPattern p;
        for (int s = 0; s < 3; ++s) {
            p.canc[static_cast<std::size_t>(s)][0] = s == canc_slot_p1;
            p.canc[static_cast<std::size_t>(s)][1] = s == canc_slot_p2;
        }
        return p;
    }

    int count_noncanc(int param) const {
        int c = 0;
        for (int s = 0; s < 3; ++s)
            if (!canc[static_cast<std::size_t>(s)][static_cast<std::size_t>(param - 1)]) ++c;
        return c;
    }
    int noncanc_slot(int param) const {
        for (int s = 0; s < 3; ++s)
            if (!canc[static_cast<std::size_t>(s)][static_cast<std::size_t>(param - 1)]) return s;
        return -1;
    }
    int canc_slot(int param) const {
        for (int s = 0; s < 3; ++s)
            if (canc[static_cast<std::size_t>(s)][static_cast<std::size_t>(param - 1)]) return s;
        return -1;
    }
    bool shift_valid() const { return count_noncanc(1) == 1 && count_noncanc(2) == 1; }
    bool full_valid() const { return count_noncanc(1) == 2 && count_noncanc(2) == 2; }

    void swap_slots(int a, int b, bool param1, bool param2) {
        if (param1) std::swap(canc[static_cast<std::size_t>(a)][0], canc[static_cast<std::size_t>(b)][0]);
        if (param2) std::swap(canc[static_cast<std::size_t>(a)][1], canc[static_cast<std::size_t>(b)][1]);
    }

    std::string str() const {
        std::string s;
        const char* names[3] = {"f1", "f2", "out"};
        for (int param = 1; param <= 2; ++param) {
            if (param == 2) s += "|";
            s += "p" + std::to_string(param) + ":";
            bool first = true;
            for (int slot = 0; slot < 3; ++slot)
                if (!canc[static_cast<std::size_t>(slot)][static_cast<std::size_t>(param - 1)]) {
                    if (!first) s += ",";
                    s += names[slot];
                    first = false;
                }
            if (first) s += "-";
        }
        return s;
    }

    bool operator==(const CancellationPattern& o) const { return canc == o.canc; }
};

// ---------------------------------------------------------------------------
// Shifts.
// ---------------------------------------------------------------------------

struct ShiftTuple {
    Cube K, V;
    std::array<Cube, 3> I, J;
};

/// Coefficient normalisation of a shift tuple,
/// (|I1||I2||I3|)^{1/2} / |K|^2 * (|J1||J2||J3|)^{1/2} / |V|^2.
template <class S>
S shift_coeff_bound(const ShiftTuple& t) {
    int e1 = 0, e2 = 0;
    for (int i = 0; i < 3; ++i) {
        e1 -= t.I[static_cast<std::size_t>(i)].level * t.I[static_cast<std::size_t>(i)].dim();
        e2 -= t.J[static_cast<std::size_t>(i)].level * t.J[static_cast<std::size_t>(i)].dim();
    }
    e1 += 4 * t.K.level * t.K.dim();
    e2 += 4 * t.V.level * t.V.dim();
    return scalar_ops<S>::sqrt2_pow(e1) * scalar_ops<S>::sqrt2_pow(e2);
}

template <class S>
struct ShiftCoeff {
    ShiftTuple tuple;
    S a;
};

template <class S>
class ShiftSpec {
public:
    ShiftSpec(GridSpec grid, std::array<int, 3> k, std::array<int, 3> v, CancellationPattern pat,
              std::vector<ShiftCoeff<S>> coeffs, bool permissive = false)
        : grid_(std::make_shared<const GridSpec>(std::move(grid))), k_(k), v_(v), pat_(pat),
          coeffs_(std::move(coeffs)), permissive_(permissive) {
        if (!permissive_ && !pat_.shift_valid())
            throw std::invalid_argument("ShiftSpec: pattern must have exactly one h^0 slot per parameter");
        for (int i = 0; i < 3; ++i) {
            if (k_[static_cast<std::size_t>(i)] < 0 || v_[static_cast<std::size_t>(i)] < 0)
                throw std::invalid_argument("ShiftSpec: negative complexity");
            if (k_[static_cast<std::size_t>(i)] > grid_->depth1() || v_[static_cast<std::size_t>(i)] > grid_->depth2())
                throw std::invalid_argument("ShiftSpec: complexity exceeds depth");
        }
        // stored cubes reference the spec's own immutable grid copy
        for (auto& c : coeffs_) {
            c.tuple.K.grid = grid_.get();
            c.tuple.V.grid = grid_.get();
            for (int i = 0; i < 3; ++i) {
                c.tuple.I[static_cast<std::size_t>(i)].grid = grid_.get();
                c.tuple.J[static_cast<std::size_t>(i)].grid = grid_.get();
            }
        }
        for (auto& c : coeffs_) validate(c);
    }

    const GridSpec& grid() const { return *grid_; }
    const std::array<int, 3>& k() const { return k_; }
    const std::array<int, 3>& v() const { return v_; }
    const CancellationPattern& pattern() const { return pat_; }
    const std::vector<ShiftCoeff<S>>& coeffs() const { return coeffs_; }
    bool permissive() const { return permissive_; }

    int complexity_max() const {
        int m = 0;
        for (int i = 0; i < 3; ++i)
            m = std::max({m, k_[static_cast<std::size_t>(i)], v_[static_cast<std::size_t>(i)]});
        return m;
    }

    /// Bilinear partial adjoint: exchange one input slot with the output slot
    /// in the chosen parameters. Cancellation flags travel with the slots.
    ShiftSpec adjoint(int slot, bool param1 = true, bool param2 = true) const {
        if (slot != 0 && slot != 1) throw std::invalid_argument("adjoint: slot must be 0 or 1");
        std::array<int, 3> nk = k_, nv = v_;
        if (param1) std::swap(nk[static_cast<std::size_t>(slot)], nk[2]);
        if (param2) std::swap(nv[static_cast<std::size_t>(slot)], nv[2]);
        CancellationPattern np = pat_;
        np.swap_slots(slot, 2, param1, param2);
        std::vector<ShiftCoeff<S>> nc = coeffs_;
        for (auto& c : nc) {
            if (param1) std::swap(c.tuple.I[static_cast<std::size_t>(slot)], c.tuple.I[2]);
            if (param2) std::swap(c.tuple.J[static_cast<std::size_t>(slot)], c.tuple.J[2]);
        }
        return ShiftSpec(*grid_, nk, nv, np, std::move(nc), permissive_);
    }

private:
    void validate(const ShiftCoeff<S>& c) const {
        for (int i = 0; i < 3; ++i) {
            const Cube& I = c.tuple.I[static_cast<std::size_t>(i)];
            const Cube& J = c.tuple.J[static_cast<std::size_t>(i)];
            if (I.level - k_[static_cast<std::size_t>(i)] != c.tuple.K.level ||
                !(I.ancestor(k_[static_cast<std::size_t>(i)]) == c.tuple.K))
                throw std::invalid_argument("ShiftSpec: I tuple not k_i generations below K");
            if (J.level - v_[static_cast<std::size_t>(i)] != c.tuple.V.level ||
                !(J.ancestor(v_[static_cast<std::size_t>(i)]) == c.tuple.V))
                throw std::invalid_argument("ShiftSpec: J tuple not v_i generations below V");
        }
        S bound = shift_coeff_bound<S>(c.tuple);
        if (scalar_ops<S>::less(bound, scalar_ops<S>::abs(c.a)))
            throw std::invalid_argument("ShiftSpec: coefficient violates the normalisation bound");
    }

    std::shared_ptr<const GridSpec> grid_;
    std::array<int, 3> k_, v_;
    CancellationPattern pat_;
    std::vector<ShiftCoeff<S>> coeffs_;
    bool permissive_;
};

namespace detail {

/// Accumulate coeff * (sum over suppressed signatures of h_I x h_J) with the
/// given cancellation flags.
template <class S>
void add_haar_supp(GridFunction<S>& out, const Cube& I, bool canc1, const Cube& J, bool canc2,
                   const S& coeff) {
    const std::uint32_t t1 = 1u << I.dim(), t2 = 1u << J.dim();
    S base = coeff * haar_norm_factor<S>(I) * haar_norm_factor<S>(J);
    for (std::uint32_t e = canc1 ? 1 : 0; e < (canc1 ? t1 : 1u); ++e)
        for (std::uint32_t d = canc2 ? 1 : 0; d < (canc2 ? t2 : 1u); ++d)
            for_each_cell_signed(I, canc1 ? e : 0u, [&](std::int64_t c1, int s1) {
                for_each_cell_signed(J, canc2 ? d : 0u, [&](std::int64_t c2, int s2) {
                    if (s1 * s2 > 0)
                        out.at(c1, c2) += base;
                    else
                        out.at(c1, c2) -= base;
                });
            });
}

}  // namespace detail

template <class S>
GridFunction<S> apply_shift(const ShiftSpec<S>& sp, const GridFunction<S>& f1,
                            const GridFunction<S>& f2) {
    CoeffTables<S> t1(sp.grid(), f1), t2(sp.grid(), f2);
    GridFunction<S> out(f1.mesh());
    const auto& pat = sp.pattern();
    for (const auto& c : sp.coeffs()) {
        S p1 = t1.pairing_supp(c.tuple.I[0], pat.canc[0][0], c.tuple.J[0], pat.canc[0][1]);
        if (scalar_ops<S>::is_zero(p1)) continue;
        S p2 = t2.pairing_supp(c.tuple.I[1], pat.canc[1][0], c.tuple.J[1], pat.canc[1][1]);
        if (scalar_ops<S>::is_zero(p2)) continue;
        detail::add_haar_supp(out, c.tuple.I[2], pat.canc[2][0], c.tuple.J[2], pat.canc[2][1],
                              c.a * p1 * p2);
    }
    return out;
}

/// <S(f1,f2), f3> through the applied function.
template <class S>
S shift_form(const ShiftSpec<S>& sp, const GridFunction<S>& f1, const GridFunction<S>& f2,
             const GridFunction<S>& f3) {
    return inner(apply_shift(sp, f1, f2), f3);
}

/// Same pairing from the coefficient-level triple sum; an independent route
/// kept for duality cross-checks.
template <class S>
S shift_form_direct(const ShiftSpec<S>& sp, const GridFunction<S>& f1, const GridFunction<S>& f2,
                    const GridFunction<S>& f3) {
    CoeffTables<S> t1(sp.grid(), f1), t2(sp.grid(), f2), t3(sp.grid(), f3);
    S acc = scalar_ops<S>::zero();
    const auto& pat = sp.pattern();
    for (const auto& c : sp.coeffs()) {
        S p1 = t1.pairing_supp(c.tuple.I[0], pat.canc[0][0], c.tuple.J[0], pat.canc[0][1]);
        S p2 = t2.pairing_supp(c.tuple.I[1], pat.canc[1][0], c.tuple.J[1], pat.canc[1][1]);
        S p3 = t3.pairing_supp(c.tuple.I[2], pat.canc[2][0], c.tuple.J[2], pat.canc[2][1]);
        acc += c.a * p1 * p2 * p3;
    }
    return acc;
}

/// Absolute-value variant of the triple sum divided by the norm product: the
/// empirical boundedness certificate every model operator is assumed to
/// carry.
template <class S>
double shift_abs_sum_ratio(const ShiftSpec<S>& sp, const GridFunction<S>& f1,
                           const GridFunction<S>& f2, const GridFunction<S>& f3, double p,
                           double q, double rprime) {
    CoeffTables<S> t1(sp.grid(), f1), t2(sp.grid(), f2), t3(sp.grid(), f3);
    const auto& pat = sp.pattern();
    double acc = 0;
    for (const auto& c : sp.coeffs()) {
        double p1 = scalar_ops<S>::to_double(
            t1.pairing_supp(c.tuple.I[0], pat.canc[0][0], c.tuple.J[0], pat.canc[0][1]));
        double p2 = scalar_ops<S>::to_double(
            t2.pairing_supp(c.tuple.I[1], pat.canc[1][0], c.tuple.J[1], pat.canc[1][1]));
        double p3 = scalar_ops<S>::to_double(
            t3.pairing_supp(c.tuple.I[2], pat.canc[2][0], c.tuple.J[2], pat.canc[2][1]));
        acc += std::fabs(scalar_ops<S>::to_double(c.a) * p1 * p2 * p3);
    }
    double denom = lp_norm(f1, p) * lp_norm(f2, q) * lp_norm(f3, rprime);
    return denom > 0 ? acc / denom : 0.0;
}

// ---------------------------------------------------------------------------
// Bilinear paraproducts in one parameter.
// ---------------------------------------------------------------------------

enum class ParaForm { Plain, Adj1, Adj2 };

inline const char* para_form_name(ParaForm f) {
    switch (f) {
        case ParaForm::Plain: return "A_b";
        case ParaForm::Adj1: return "A_b^{1*}";
        case ParaForm::Adj2: return "A_b^{2*}";
    }
    return "?";
}

template <class S>
Slice<S> bilinear_paraproduct(const GridSpec& grid, ParaForm form, const Slice<S>& b,
                              const Slice<S>& g1, const Slice<S>& g2) {
    const int param = b.param();
    Slice<S> out(param, b.geom());
    const std::uint32_t top = 1u << grid.dim(param);
    for (const Cube& V : all_cubes(grid, param)) {
        S a1 = average_over(g1, V), a2 = average_over(g2, V);
        S inv_meas = scalar_ops<S>::one() / V.measure<S>();
        for (std::uint32_t sig = 1; sig < top; ++sig) {
            HaarSymbol h{V, sig};
            S lb = haar_pairing(b, h);
            if (scalar_ops<S>::is_zero(lb)) continue;
            switch (form) {
                case ParaForm::Plain: {
                    S coeff = lb * a1 * a2 * haar_norm_factor<S>(V);
                    detail::for_each_cell_signed(V, sig, [&](std::int64_t c, int s) {
                        if (s > 0)
                            out.at(c) += coeff;
                        else
                            out.at(c) -= coeff;
                    });
                    break;
                }
                case ParaForm::Adj1: {
                    S coeff = lb * haar_pairing(g1, h) * a2 * inv_meas;
                    cell_box(V).for_each([&](std::int64_t c) { out.at(c) += coeff; });
                    break;
                }
                case ParaForm::Adj2: {
                    S coeff = lb * a1 * haar_pairing(g2, h) * inv_meas;
                    cell_box(V).for_each([&](std::int64_t c) { out.at(c) += coeff; });
                    break;
                }
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Partial paraproducts.
// ---------------------------------------------------------------------------

struct PartialTuple {
    Cube K;
    std::array<Cube, 3> I;
};

template <class S>
struct PartialEntry {
    PartialTuple tuple;
    Slice<S> symbol;  // lives on the paraproduct axis
};

template <class S>
class PartialParaproductSpec {
public:
    PartialParaproductSpec(GridSpec grid, int shift_axis, std::array<int, 3> k, int h0_slot,
                           ParaForm form, std::vector<PartialEntry<S>> entries)
        : grid_(std::make_shared<const GridSpec>(std::move(grid))), shift_axis_(shift_axis), k_(k),
          h0_slot_(h0_slot), form_(form), entries_(std::move(entries)) {
        if (shift_axis_ != 1 && shift_axis_ != 2)
            throw std::invalid_argument("PartialParaproductSpec: axis must be 1 or 2");
        if (h0_slot_ < 0 || h0_slot_ > 2)
            throw std::invalid_argument("PartialParaproductSpec: h0 slot out of range");
        for (auto& e : entries_) {
            e.tuple.K.grid = grid_.get();
            for (int i = 0; i < 3; ++i) e.tuple.I[static_cast<std::size_t>(i)].grid = grid_.get();
        }
        for (auto& e : entries_) validate(e);
    }

    const GridSpec& grid() const { return *grid_; }
    int shift_axis() const { return shift_axis_; }
    int para_axis() const { return shift_axis_ == 1 ? 2 : 1; }
    const std::array<int, 3>& k() const { return k_; }
    int h0_slot() const { return h0_slot_; }
    ParaForm form() const { return form_; }
    const std::vector<PartialEntry<S>>& entries() const { return entries_; }

    int complexity_max() const { return std::max({k_[0], k_[1], k_[2]}); }

private:
    void validate(const PartialEntry<S>& e) const {
        for (int i = 0; i < 3; ++i) {
            const Cube& I = e.tuple.I[static_cast<std::size_t>(i)];
            if (I.level - k_[static_cast<std::size_t>(i)] != e.tuple.K.level ||
                !(I.ancestor(k_[static_cast<std::size_t>(i)]) == e.tuple.K))
                throw std::invalid_argument("PartialParaproductSpec: tuple not below K");
        }
        if (e.symbol.param() != para_axis())
            throw std::invalid_argument("PartialParaproductSpec: symbol on wrong axis");
        // BMO admissibility mirrors the shift coefficient bound on one axis.
        int exp = 4 * e.tuple.K.level * e.tuple.K.dim();
        for (int i = 0; i < 3; ++i)
            exp -= e.tuple.I[static_cast<std::size_t>(i)].level * e.tuple.I[static_cast<std::size_t>(i)].dim();
        S bound = scalar_ops<S>::sqrt2_pow(exp);
        if constexpr (!scalar_ops<S>::exact) {
            // symbols rescaled onto the boundary can land an ulp above it
            bound *= 1.0 + 0x1.0p-30;
        }
        S norm = slice_dyadic_bmo(*grid_, e.symbol);
        if (scalar_ops<S>::less(bound, norm))
            throw std::invalid_argument("PartialParaproductSpec: symbol BMO exceeds the bound");
    }

    std::shared_ptr<const GridSpec> grid_;
    int shift_axis_;
    std::array<int, 3> k_;
    int h0_slot_;
    ParaForm form_;
    std::vector<PartialEntry<S>> entries_;
};

template <class S>
GridFunction<S> apply_partial_paraproduct(const PartialParaproductSpec<S>& sp,
                                          const GridFunction<S>& f1, const GridFunction<S>& f2) {
    const int axis = sp.shift_axis();
    const Mesh& mesh = f1.mesh();
    GridFunction<S> out(mesh);
    const std::uint32_t top = 1u << sp.grid().dim(axis);
    for (const auto& e : sp.entries()) {
        // suppressed signature sums per input slot (bilinearity of pi)
        auto slot_slice = [&](const GridFunction<S>& f, int slot) {
            const Cube& I = e.tuple.I[static_cast<std::size_t>(slot)];
            Slice<S> acc(sp.para_axis(), mesh.axis(sp.para_axis()));
            if (sp.h0_slot() == slot) {
                acc = partial_pairing(f, axis, HaarSymbol{I, 0});
            } else {
                for (std::uint32_t s = 1; s < top; ++s) acc += partial_pairing(f, axis, HaarSymbol{I, s});
            }
            return acc;
        };
        Slice<S> g1 = slot_slice(f1, 0), g2 = slot_slice(f2, 1);
        Slice<S> pi = bilinear_paraproduct(sp.grid(), sp.form(), e.symbol, g1, g2);
        const Cube& I3 = e.tuple.I[2];
        S norm3 = haar_norm_factor<S>(I3);
        auto write = [&](std::uint32_t sig) {
            detail::for_each_cell_signed(I3, sig, [&](std::int64_t c, int s) {
                for (std::int64_t o = 0; o < pi.size(); ++o) {
                    S v = pi.at(o) * norm3;
                    if (s < 0) v = -v;
                    if (axis == 1)
                        out.at(c, o) += v;
                    else
                        out.at(o, c) += v;
                }
            });
        };
        if (sp.h0_slot() == 2)
            write(0);
        else
            for (std::uint32_t s = 1; s < top; ++s) write(s);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Full paraproducts.
// ---------------------------------------------------------------------------

template <class S>
class FullParaproductSpec {
public:
    FullParaproductSpec(GridSpec grid, CancellationPattern pat, GridFunction<S> symbol)
        : grid_(std::move(grid)), pat_(pat), symbol_(std::move(symbol)) {
        if (!pat_.full_valid())
            throw std::invalid_argument(
                "FullParaproductSpec: pattern must have exactly one cancellative slot per parameter");
    }

    const GridSpec& grid() const { return grid_; }
    const CancellationPattern& pattern() const { return pat_; }
    const GridFunction<S>& symbol() const { return symbol_; }

private:
    GridSpec grid_;
    CancellationPattern pat_;
    GridFunction<S> symbol_;
};

namespace detail {

/// Pairing of f against u_K x u_V where u is the cancellative h^{sig} or the
/// L^1-normalised average 1_Q/|Q| depending on the flag.
template <class S>
S mixed_factor(const CoeffTables<S>& tab, const Cube& K, std::uint32_t eta, bool canc1,
               const Cube& V, std::uint32_t delta, bool canc2) {
    S v = tab.pairing(K, canc1 ? eta : 0u, V, canc2 ? delta : 0u);
    if (!canc1) v *= haar_norm_factor<S>(K);
    if (!canc2) v *= haar_norm_factor<S>(V);
    return v;
}

template <class S>
void add_mixed(GridFunction<S>& out, const Cube& K, std::uint32_t eta, bool canc1, const Cube& V,
               std::uint32_t delta, bool canc2, const S& coeff) {
    S base = coeff * haar_norm_factor<S>(K) * haar_norm_factor<S>(V);
    if (!canc1) base *= haar_norm_factor<S>(K);
    if (!canc2) base *= haar_norm_factor<S>(V);
    for_each_cell_signed(K, canc1 ? eta : 0u, [&](std::int64_t c1, int s1) {
        for_each_cell_signed(V, canc2 ? delta : 0u, [&](std::int64_t c2, int s2) {
            if (s1 * s2 > 0)
                out.at(c1, c2) += base;
            else
                out.at(c1, c2) -= base;
        });
    });
}

}  // namespace detail

template <class S>
GridFunction<S> apply_full_paraproduct(const FullParaproductSpec<S>& sp, const GridFunction<S>& f1,
                                       const GridFunction<S>& f2) {
    const GridSpec& g = sp.grid();
    CoeffTables<S> tb(g, sp.symbol()), t1(g, f1), t2(g, f2);
    GridFunction<S> out(f1.mesh());
    const auto& pat = sp.pattern();
    const std::uint32_t top1 = 1u << g.n(), top2 = 1u << g.m();
    for (const Cube& K : all_cubes(g, 1))
        for (const Cube& V : all_cubes(g, 2))
            for (std::uint32_t eta = 1; eta < top1; ++eta)
                for (std::uint32_t delta = 1; delta < top2; ++delta) {
                    // lambda^b never moves: always <b, h_K x h_V>
                    S lam = tb.pairing(K, eta, V, delta);
                    if (scalar_ops<S>::is_zero(lam)) continue;
                    S p1 = detail::mixed_factor(t1, K, eta, pat.canc[0][0], V, delta, pat.canc[0][1]);
                    if (scalar_ops<S>::is_zero(p1)) continue;
                    S p2 = detail::mixed_factor(t2, K, eta, pat.canc[1][0], V, delta, pat.canc[1][1]);
                    if (scalar_ops<S>::is_zero(p2)) continue;
                    detail::add_mixed(out, K, eta, pat.canc[2][0], V, delta, pat.canc[2][1],
                                      lam * p1 * p2);
                }
    return out;
}

/// Trilinear pairing of the full paraproduct via the coefficient sum; second
/// route for duality tests.
template <class S>
S full_paraproduct_form_direct(const FullParaproductSpec<S>& sp, const GridFunction<S>& f1,
                               const GridFunction<S>& f2, const GridFunction<S>& f3) {
    const GridSpec& g = sp.grid();
    CoeffTables<S> tb(g, sp.symbol()), t1(g, f1), t2(g, f2), t3(g, f3);
    const auto& pat = sp.pattern();
    const std::uint32_t top1 = 1u << g.n(), top2 = 1u << g.m();
    S acc = scalar_ops<S>::zero();
    for (const Cube& K : all_cubes(g, 1))
        for (const Cube& V : all_cubes(g, 2))
            for (std::uint32_t eta = 1; eta < top1; ++eta)
                for (std::uint32_t delta = 1; delta < top2; ++delta) {
                    S lam = tb.pairing(K, eta, V, delta);
                    if (scalar_ops<S>::is_zero(lam)) continue;
                    S p1 = detail::mixed_factor(t1, K, eta, pat.canc[0][0], V, delta, pat.canc[0][1]);
                    S p2 = detail::mixed_factor(t2, K, eta, pat.canc[1][0], V, delta, pat.canc[1][1]);
                    S p3 = detail::mixed_factor(t3, K, eta, pat.canc[2][0], V, delta, pat.canc[2][1]);
                    acc += lam * p1 * p2 * p3;
                }
    return acc;
}

/// Absolute-sum certificate for full paraproducts, mirroring the shift
/// version: sum of |lambda| |slot factors| over all rectangles and
/// signatures, against the norm product.
template <class S>
double full_abs_sum_ratio(const FullParaproductSpec<S>& sp, const GridFunction<S>& f1,
                          const GridFunction<S>& f2, const GridFunction<S>& f3, double p, double q,
                          double rprime) {
    const GridSpec& g = sp.grid();
    CoeffTables<S> tb(g, sp.symbol()), t1(g, f1), t2(g, f2), t3(g, f3);
    const auto& pat = sp.pattern();
    const std::uint32_t top1 = 1u << g.n(), top2 = 1u << g.m();
    double acc = 0;
    for (const Cube& K : all_cubes(g, 1))
        for (const Cube& V : all_cubes(g, 2))
            for (std::uint32_t eta = 1; eta < top1; ++eta)
                for (std::uint32_t delta = 1; delta < top2; ++delta) {
                    double lam = scalar_ops<S>::to_double(tb.pairing(K, eta, V, delta));
                    if (lam == 0) continue;
                    double p1 = scalar_ops<S>::to_double(
                        detail::mixed_factor(t1, K, eta, pat.canc[0][0], V, delta, pat.canc[0][1]));
                    double p2 = scalar_ops<S>::to_double(
                        detail::mixed_factor(t2, K, eta, pat.canc[1][0], V, delta, pat.canc[1][1]));
                    double p3 = scalar_ops<S>::to_double(
                        detail::mixed_factor(t3, K, eta, pat.canc[2][0], V, delta, pat.canc[2][1]));
                    acc += std::fabs(lam * p1 * p2 * p3);
                }
    double denom = lp_norm(f1, p) * lp_norm(f2, q) * lp_norm(f3, rprime);
    return denom > 0 ? acc / denom : 0.0;
}

/// Same certificate for partial paraproducts: the paraproduct-axis sum is
/// taken with absolute values term by term.
template <class S>
double partial_abs_sum_ratio(const PartialParaproductSpec<S>& sp, const GridFunction<S>& f1,
                             const GridFunction<S>& f2, const GridFunction<S>& f3, double p,
                             double q, double rprime) {
    const int axis = sp.shift_axis();
    const GridSpec& g = sp.grid();
    const Mesh& mesh = f1.mesh();
    const std::uint32_t top = 1u << g.dim(axis);
    const std::uint32_t topp = 1u << g.dim(sp.para_axis());
    double acc = 0;
    for (const auto& e : sp.entries()) {
        auto slot_slice = [&](const GridFunction<S>& f, int slot) {
            const Cube& I = e.tuple.I[static_cast<std::size_t>(slot)];
            Slice<S> s(sp.para_axis(), mesh.axis(sp.para_axis()));
            if (sp.h0_slot() == slot) {
                s = partial_pairing(f, axis, HaarSymbol{I, 0});
            } else {
                for (std::uint32_t sg = 1; sg < top; ++sg) s += partial_pairing(f, axis, HaarSymbol{I, sg});
            }
            return s;
        };
        Slice<S> g1 = slot_slice(f1, 0), g2 = slot_slice(f2, 1), g3 = slot_slice(f3, 2);
        // absolute paraproduct sum over the other axis
        for (const Cube& V : all_cubes(g, sp.para_axis())) {
            double a1, a2, a3;
            for (std::uint32_t sg = 1; sg < topp; ++sg) {
                double lb = scalar_ops<S>::to_double(haar_pairing(e.symbol, HaarSymbol{V, sg}));
                if (lb == 0) continue;
                switch (sp.form()) {
                    case ParaForm::Plain:
                        a1 = scalar_ops<S>::to_double(average_over(g1, V));
                        a2 = scalar_ops<S>::to_double(average_over(g2, V));
                        a3 = scalar_ops<S>::to_double(haar_pairing(g3, HaarSymbol{V, sg}));
                        break;
                    case ParaForm::Adj1:
                        a1 = scalar_ops<S>::to_double(haar_pairing(g1, HaarSymbol{V, sg}));
                        a2 = scalar_ops<S>::to_double(average_over(g2, V));
                        a3 = scalar_ops<S>::to_double(average_over(g3, V));
                        break;
                    default:
                        a1 = scalar_ops<S>::to_double(average_over(g1, V));
                        a2 = scalar_ops<S>::to_double(haar_pairing(g2, HaarSymbol{V, sg}));
                        a3 = scalar_ops<S>::to_double(average_over(g3, V));
                        break;
                }
                acc += std::fabs(lb * a1 * a2 * a3);
            }
        }
    }
    double denom = lp_norm(f1, p) * lp_norm(f2, q) * lp_norm(f3, rprime);
    return denom > 0 ? acc / denom : 0.0;
}

// ---------------------------------------------------------------------------
// Random admissible specs.
// ---------------------------------------------------------------------------

/// Number of admissible tuples of a shift family on this grid.
inline std::uint64_t count_shift_tuples(const GridSpec& grid, const std::array<int, 3>& k,
                                        const std::array<int, 3>& v) {
    const int kmax = std::max({k[0], k[1], k[2]});
    const int vmax = std::max({v[0], v[1], v[2]});
    auto side = [&](int param, const std::array<int, 3>& c, int cmax) {
        std::uint64_t total = 0;
        for (int l = 0; l + cmax <= grid.depth(param); ++l) {
            std::uint64_t per_cube = 1;
            for (int i = 0; i < 3; ++i)
                per_cube *= std::uint64_t{1} << (c[static_cast<std::size_t>(i)] * grid.dim(param));
            // boundary cubes can have fewer descendants; count the full-position ones
            total += static_cast<std::uint64_t>(cubes_at_level(grid, param, l).size()) * per_cube;
        }
        return total;
    };
    return side(1, k, kmax) * side(2, v, vmax);
}

/// Coefficients drawn at |a| = saturation * bound with a random sign; each
/// admissible tuple enters independently with probability `sparsity`. Small
/// families are enumerated with per-tuple coins; large families are sampled
/// (round(sparsity * total) uniform draws, de-duplicated), which keeps spec
/// construction affordable at scan complexities.
template <class S>
ShiftSpec<S> random_shift_spec(const GridSpec& grid, std::array<int, 3> k, std::array<int, 3> v,
                               const CancellationPattern& pat, double saturation, double sparsity,
                               std::uint64_t seed, bool permissive = false) {
    std::mt19937_64 rng(mix_seed(seed ^ 0x5f5f5f5fULL));
    std::vector<ShiftCoeff<S>> coeffs;
    const int kmax = std::max({k[0], k[1], k[2]});
    const int vmax = std::max({v[0], v[1], v[2]});
    S sat = saturation == 1.0 ? scalar_ops<S>::one()
                              : S(scalar_ops<S>::dyadic(static_cast<long>(saturation * 4096.0), 12));
    auto coin = [&](double p) {
        return (static_cast<double>(rng() >> 11) * 0x1.0p-53) < p;
    };
    const std::uint64_t total = count_shift_tuples(grid, k, v);
    constexpr std::uint64_t kEnumerationCap = 1u << 18;

    if (sparsity >= 1.0 || total <= kEnumerationCap) {
        for (int lK = 0; lK + kmax <= grid.depth1(); ++lK)
            for (const Cube& K : cubes_at_level(grid, 1, lK)) {
                auto d0 = descendants(K, k[0]), d1 = descendants(K, k[1]), d2 = descendants(K, k[2]);
                for (int lV = 0; lV + vmax <= grid.depth2(); ++lV)
                    for (const Cube& V : cubes_at_level(grid, 2, lV)) {
                        auto e0 = descendants(V, v[0]), e1 = descendants(V, v[1]), e2 = descendants(V, v[2]);
                        for (const Cube& I1 : d0)
                            for (const Cube& I2 : d1)
                                for (const Cube& I3 : d2)
                                    for (const Cube& J1 : e0)
                                        for (const Cube& J2 : e1)
                                            for (const Cube& J3 : e2) {
                                                if (sparsity < 1.0 && !coin(sparsity)) continue;
                                                ShiftTuple t{K, V, {I1, I2, I3}, {J1, J2, J3}};
                                                S a = shift_coeff_bound<S>(t) * sat;
                                                if (coin(0.5)) a = -a;
                                                coeffs.push_back({t, a});
                                            }
                    }
            }
        return ShiftSpec<S>(grid, k, v, pat, std::move(coeffs), permissive);
    }

    // sampled construction for very large families
    std::vector<Cube> tops1, tops2;
    for (int lK = 0; lK + kmax <= grid.depth1(); ++lK)
        for (const Cube& K : cubes_at_level(grid, 1, lK)) tops1.push_back(K);
    for (int lV = 0; lV + vmax <= grid.depth2(); ++lV)
        for (const Cube& V : cubes_at_level(grid, 2, lV)) tops2.push_back(V);
    auto pick_descendant = [&](const Cube& top, int gens) {
        Cube c = top;
        for (int s2 = 0; s2 < gens; ++s2) {
            auto kids = c.children();
            c = kids[rng() % kids.size()];
        }
        return c;
    };
    std::uint64_t want = static_cast<std::uint64_t>(sparsity * static_cast<double>(total) + 0.5);
    std::set<std::string> seen;
    int misses = 0;
    while (coeffs.size() < want && misses < 1 << 16) {
        const Cube& K = tops1[rng() % tops1.size()];
        const Cube& V = tops2[rng() % tops2.size()];
        ShiftTuple t{K, V,
                     {pick_descendant(K, k[0]), pick_descendant(K, k[1]), pick_descendant(K, k[2])},
                     {pick_descendant(V, v[0]), pick_descendant(V, v[1]), pick_descendant(V, v[2])}};
        bool in_range = true;
        for (int i = 0; i < 3; ++i)
            if (!t.I[static_cast<std::size_t>(i)].in_index_range() ||
                !t.J[static_cast<std::size_t>(i)].in_index_range())
                in_range = false;
        if (!in_range) {
            ++misses;
            continue;
        }
        std::string key;
        auto add_key = [&key](const Cube& c) {
            key += std::to_string(c.level) + ":" + std::to_string(c.pos[0]) + ":" +
                   std::to_string(c.pos[1]) + ";";
        };
        add_key(t.K);
        add_key(t.V);
        for (int i = 0; i < 3; ++i) {
            add_key(t.I[static_cast<std::size_t>(i)]);
            add_key(t.J[static_cast<std::size_t>(i)]);
        }
        if (!seen.insert(key).second) {
            ++misses;
            continue;
        }
        S a = shift_coeff_bound<S>(t) * sat;
        if (coin(0.5)) a = -a;
        coeffs.push_back({t, a});
    }
    return ShiftSpec<S>(grid, k, v, pat, std::move(coeffs), permissive);
}

/// Sparsity chosen so the expected coefficient count hits `target`.
template <class S>
ShiftSpec<S> random_shift_spec_target(const GridSpec& grid, std::array<int, 3> k,
                                      std::array<int, 3> v, const CancellationPattern& pat,
                                      double saturation, std::uint64_t target, std::uint64_t seed,
                                      bool permissive = false) {
    std::uint64_t total = count_shift_tuples(grid, k, v);
    double sparsity = total == 0 ? 1.0 : std::min(1.0, static_cast<double>(target) / static_cast<double>(total));
    return random_shift_spec<S>(grid, k, v, pat, saturation, sparsity, seed, permissive);
}

/// Symbols are random Haar-coefficient slices rescaled so the dyadic BMO norm
/// equals saturation * bound exactly.
template <class S>
PartialParaproductSpec<S> random_partial_spec(const GridSpec& grid, int shift_axis,
                                              std::array<int, 3> k, int h0_slot, ParaForm form,
                                              double saturation, double sparsity,
                                              std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed ^ 0xabcdefULL));
    auto coin = [&](double p) { return (static_cast<double>(rng() >> 11) * 0x1.0p-53) < p; };
    const int para_axis = shift_axis == 1 ? 2 : 1;
    const int kmax = std::max({k[0], k[1], k[2]});
    const Mesh mesh = Mesh::of(grid);
    S sat = saturation == 1.0 ? scalar_ops<S>::one()
                              : S(scalar_ops<S>::dyadic(static_cast<long>(saturation * 4096.0), 12));

    std::vector<PartialEntry<S>> entries;
    for (int lK = 0; lK + kmax <= grid.depth(shift_axis); ++lK)
        for (const Cube& K : cubes_at_level(grid, shift_axis, lK)) {
            auto d0 = descendants(K, k[0]), d1 = descendants(K, k[1]), d2 = descendants(K, k[2]);
            for (const Cube& I1 : d0)
                for (const Cube& I2 : d1)
                    for (const Cube& I3 : d2) {
                        if (!coin(sparsity)) continue;
                        Slice<S> sym(para_axis, mesh.axis(para_axis));
                        for (std::int64_t c = 0; c < sym.size(); ++c)
                            sym.at(c) = scalar_ops<S>::dyadic(static_cast<long>(rng() % 17) - 8, 3);
                        S norm = slice_dyadic_bmo(grid, sym);
                        if (scalar_ops<S>::is_zero(norm)) continue;
                        int exp = 4 * K.level * K.dim();
                        exp -= I1.level * I1.dim() + I2.level * I2.dim() + I3.level * I3.dim();
                        S scale = scalar_ops<S>::sqrt2_pow(exp) * sat / norm;
                        sym *= scale;
                        entries.push_back({PartialTuple{K, {I1, I2, I3}}, std::move(sym)});
                    }
        }
    return PartialParaproductSpec<S>(grid, shift_axis, k, h0_slot, form, std::move(entries));
}

template <class S>
FullParaproductSpec<S> random_full_spec(const GridSpec& grid, const CancellationPattern& pat,
                                        double saturation, std::uint64_t seed) {
    std::mt19937_64 rng(mix_seed(seed ^ 0x77aa77ULL));
    Mesh mesh = Mesh::of(grid);
    GridFunction<S> b(mesh);
    for (std::int64_t i = 0; i < b.size(); ++i)
        b.values()[static_cast<std::size_t>(i)] =
            scalar_ops<S>::dyadic(static_cast<long>(rng() % 33) - 16, 4);
    double pb = product_bmo(grid, b).value;
    if (pb > 0) {
        double target = std::min(saturation / pb, 1e6);
        b *= S(scalar_ops<S>::dyadic(static_cast<long>(target * 65536.0), 16));
    }
    return FullParaproductSpec<S>(grid, pat, std::move(b));
}

// ---------------------------------------------------------------------------
// Spec serialisation (structured text via JSON).
// ---------------------------------------------------------------------------

namespace detail {

inline nlohmann::json cube_to_json(const Cube& c) {
    nlohmann::json pos = nlohmann::json::array();
    for (int d = 0; d < c.dim(); ++d) pos.push_back(c.pos[static_cast<std::size_t>(d)]);
    return {{"param", static_cast<int>(c.param)}, {"level", static_cast<int>(c.level)}, {"pos", pos}};
}

inline Cube cube_from_json(const GridSpec& g, const nlohmann::json& j) {
    Cube c;
    c.grid = &g;
    c.param = static_cast<std::int8_t>(j.at("param").get<int>());
    c.level = static_cast<std::int8_t>(j.at("level").get<int>());
    auto pos = j.at("pos");
    for (std::size_t d = 0; d < pos.size(); ++d) c.pos[d] = pos[d].get<std::int32_t>();
    return c;
}

inline nlohmann::json scalar_to_json(const Exact& v) {
    return {{"rat", v.rat().get_str()}, {"irr", v.irr().get_str()}};
}
inline nlohmann::json scalar_to_json(double v) {
    std::ostringstream os;
    os << std::hexfloat << v;
    return os.str();
}
inline void scalar_from_json(const nlohmann::json& j, Exact& v) {
    v = Exact::parse(j.at("rat").get<std::string>(), j.at("irr").get<std::string>());
}
inline void scalar_from_json(const nlohmann::json& j, double& v) {
    v = std::strtod(j.get<std::string>().c_str(), nullptr);
}

inline nlohmann::json grid_to_json(const GridSpec& g) {
    return {{"n", g.n()},   {"m", g.m()},   {"N1", g.depth1()}, {"N2", g.depth2()},
            {"omega1", g.omega(1)}, {"omega2", g.omega(2)}};
}

inline GridSpec grid_from_json(const nlohmann::json& j) {
    return GridSpec::shifted(j.at("n").get<int>(), j.at("m").get<int>(), j.at("N1").get<int>(),
                             j.at("N2").get<int>(),
                             j.at("omega1").get<std::vector<std::uint32_t>>(),
                             j.at("omega2").get<std::vector<std::uint32_t>>());
}

}  // namespace detail

template <class S>
nlohmann::json shift_spec_to_json(const ShiftSpec<S>& sp) {
    nlohmann::json j;
    j["class"] = op_class_name(OpClass::Shift);
    j["backend"] = scalar_ops<S>::name();
    j["grid"] = detail::grid_to_json(sp.grid());
    j["k"] = sp.k();
    j["v"] = sp.v();
    j["h0_slot_p1"] = sp.pattern().noncanc_slot(1);
    j["h0_slot_p2"] = sp.pattern().noncanc_slot(2);
    j["permissive"] = sp.permissive();
    nlohmann::json entries = nlohmann::json::array();
    for (const auto& c : sp.coeffs()) {
        nlohmann::json e;
        e["K"] = detail::cube_to_json(c.tuple.K);
        e["V"] = detail::cube_to_json(c.tuple.V);
        for (int i = 0; i < 3; ++i) {
            e["I"][static_cast<std::size_t>(i)] = detail::cube_to_json(c.tuple.I[static_cast<std::size_t>(i)]);
            e["J"][static_cast<std::size_t>(i)] = detail::cube_to_json(c.tuple.J[static_cast<std::size_t>(i)]);
        }
        e["a"] = detail::scalar_to_json(c.a);
        entries.push_back(std::move(e));
    }
    j["coeffs"] = std::move(entries);
    return j;
}

/// The spec's constructor rebinds all cubes to its own grid copy, so parsing
/// can use a local grid.
template <class S>
ShiftSpec<S> shift_spec_from_json(const nlohmann::json& j) {
    GridSpec grid = detail::grid_from_json(j.at("grid"));
    std::array<int, 3> k = j.at("k").get<std::array<int, 3>>();
    std::array<int, 3> v = j.at("v").get<std::array<int, 3>>();
    CancellationPattern pat = CancellationPattern::shift_pattern(j.at("h0_slot_p1").get<int>(),
                                                                 j.at("h0_slot_p2").get<int>());
    std::vector<ShiftCoeff<S>> coeffs;
    for (const auto& e : j.at("coeffs")) {
        ShiftCoeff<S> c;
        c.tuple.K = detail::cube_from_json(grid, e.at("K"));
        c.tuple.V = detail::cube_from_json(grid, e.at("V"));
        for (std::size_t i = 0; i < 3; ++i) {
            c.tuple.I[i] = detail::cube_from_json(grid, e.at("I")[i]);
            c.tuple.J[i] = detail::cube_from_json(grid, e.at("J")[i]);
        }
        detail::scalar_from_json(e.at("a"), c.a);
        coeffs.push_back(std::move(c));
    }
    return ShiftSpec<S>(grid, k, v, pat, std::move(coeffs), j.value("permissive", false));
}

}  // namespace bihaar
