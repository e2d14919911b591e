#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include <gmpxx.h>

namespace bihaar {

/// Element of the field Q(sqrt(2)), stored as a + b*sqrt(2) with arbitrary
/// precision rational coefficients. Every Haar coefficient on a dyadic mesh
/// lives here, so algebraic identities can be verified with residual exactly
/// zero instead of a floating point tolerance.
class Exact {
public:
    Exact() : a_(0), b_(0) {}
    Exact(long v) : a_(v), b_(0) {}
    Exact(const mpq_class& a) : a_(a), b_(0) {}
    Exact(mpq_class a, mpq_class b) : a_(std::move(a)), b_(std::move(b)) {
        a_.canonicalize();
        b_.canonicalize();
    }

    static Exact sqrt2() { return Exact(mpq_class(0), mpq_class(1)); }

    /// num / 2^log2den
    static Exact dyadic(long num, int log2den) {
        mpz_class den = 1;
        mpz_mul_2exp(den.get_mpz_t(), den.get_mpz_t(), log2den);
        mpq_class q(mpz_class(num), den);
        q.canonicalize();
        return Exact(q);
    }

    /// 2^e for any integer e.
    static Exact pow2(int e) {
        mpq_class q;
        if (e >= 0) {
            mpz_class z = 1;
            mpz_mul_2exp(z.get_mpz_t(), z.get_mpz_t(), e);
            q = mpq_class(z);
        } else {
            mpz_class z = 1;
            mpz_mul_2exp(z.get_mpz_t(), z.get_mpz_t(), -e);
            q = mpq_class(mpz_class(1), z);
        }
        q.canonicalize();
        return Exact(q);
    }

    /// (sqrt 2)^e; the |I|^{+-1/2} normalisations are all of this shape.
    static Exact sqrt2_pow(int e) {
        if ((e % 2) == 0) return pow2(e / 2);
        int half = (e - (e > 0 ? 1 : -1)) / 2;  // e = 2*half + sign
        Exact p = pow2(half);
        if (e > 0) return Exact(mpq_class(0), p.a_);
        // e negative and odd: 2^{half} / sqrt2 = 2^{half-1} * sqrt2
        return Exact(mpq_class(0), p.a_ / 2);
    }

    const mpq_class& rat() const { return a_; }
    const mpq_class& irr() const { return b_; }

    bool is_zero() const { return sgn(a_) == 0 && sgn(b_) == 0; }
    bool is_rational() const { return sgn(b_) == 0; }

    Exact operator-() const { return Exact(-a_, -b_); }
    Exact operator+(const Exact& o) const { return Exact(a_ + o.a_, b_ + o.b_); }
    Exact operator-(const Exact& o) const { return Exact(a_ - o.a_, b_ - o.b_); }
    Exact operator*(const Exact& o) const {
        return Exact(a_ * o.a_ + 2 * b_ * o.b_, a_ * o.b_ + b_ * o.a_);
    }
    Exact operator/(const Exact& o) const {
        // 1/(a+b s2) = (a - b s2) / (a^2 - 2 b^2); the norm vanishes only at 0.
        mpq_class norm = o.a_ * o.a_ - 2 * o.b_ * o.b_;
        if (sgn(norm) == 0) throw std::domain_error("Exact: division by zero");
        Exact num = *this * Exact(o.a_, -o.b_);
        return Exact(num.a_ / norm, num.b_ / norm);
    }

    Exact& operator+=(const Exact& o) { a_ += o.a_; b_ += o.b_; return *this; }
    Exact& operator-=(const Exact& o) { a_ -= o.a_; b_ -= o.b_; return *this; }
    Exact& operator*=(const Exact& o) { *this = *this * o; return *this; }
    Exact& operator/=(const Exact& o) { *this = *this / o; return *this; }

    bool operator==(const Exact& o) const { return a_ == o.a_ && b_ == o.b_; }
    bool operator!=(const Exact& o) const { return !(*this == o); }

    /// Sign of a + b*sqrt2, decided exactly by comparing a^2 against 2 b^2.
    int sign() const {
        int sa = sgn(a_), sb = sgn(b_);
        if (sb == 0) return sa;
        if (sa == 0) return sb;
        if (sa == sb) return sa;
        // opposite signs: |a| vs |b| sqrt2
        mpq_class a2 = a_ * a_, b22 = 2 * b_ * b_;
        int c = cmp(a2, b22);
        if (c == 0) return 0;  // unreachable for nonzero b (sqrt2 irrational)
        return c > 0 ? sa : sb;
    }

    bool operator<(const Exact& o) const { return (*this - o).sign() < 0; }
    bool operator>(const Exact& o) const { return o < *this; }
    bool operator<=(const Exact& o) const { return !(o < *this); }
    bool operator>=(const Exact& o) const { return !(*this < o); }

    Exact abs() const { return sign() < 0 ? -*this : *this; }

    /// Convert through 128-bit floats so near-cancelling a, b pairs still
    /// round to double essentially correctly.
    double to_double() const {
        if (sgn(b_) == 0) return mpf_class(a_, 128).get_d();
        mpf_class fa(a_, 128), fb(b_, 128), s2(2, 128);
        mpf_sqrt(s2.get_mpf_t(), s2.get_mpf_t());
        mpf_class r = fa + fb * s2;
        return r.get_d();
    }

    std::string str() const {
        return a_.get_str() + " " + b_.get_str();
    }
    static Exact parse(const std::string& sa, const std::string& sb) {
        mpq_class a(sa), b(sb);
        a.canonicalize();
        b.canonicalize();
        return Exact(std::move(a), std::move(b));
    }

private:
    mpq_class a_, b_;
};

inline Exact operator*(long c, const Exact& x) { return Exact(c) * x; }

/// Uniform access to the two scalar backends. Code templated on S uses only
/// these hooks plus ordinary arithmetic operators.
template <class S>
struct scalar_ops;

template <>
struct scalar_ops<double> {
    static constexpr bool exact = false;
    static const char* name() { return "float"; }
    static double zero() { return 0.0; }
    static double one() { return 1.0; }
    static double from_int(long v) { return static_cast<double>(v); }
    static double dyadic(long num, int log2den) { return std::ldexp(static_cast<double>(num), -log2den); }
    static double pow2(int e) { return std::ldexp(1.0, e); }
    static double sqrt2_pow(int e) {
        if ((e % 2) == 0) return std::ldexp(1.0, e / 2);
        return std::ldexp(M_SQRT2, (e - 1) / 2);  // e odd: 2^{(e-1)/2} * sqrt2
    }
    static double to_double(double v) { return v; }
    static double abs(double v) { return std::fabs(v); }
    static bool is_zero(double v) { return v == 0.0; }
    static int sign(double v) { return v > 0 ? 1 : (v < 0 ? -1 : 0); }
    static bool less(double x, double y) { return x < y; }
};

template <>
struct scalar_ops<Exact> {
    static constexpr bool exact = true;
    static const char* name() { return "exact"; }
    static Exact zero() { return Exact(); }
    static Exact one() { return Exact(1); }
    static Exact from_int(long v) { return Exact(v); }
    static Exact dyadic(long num, int log2den) { return Exact::dyadic(num, log2den); }
    static Exact pow2(int e) { return Exact::pow2(e); }
    static Exact sqrt2_pow(int e) { return Exact::sqrt2_pow(e); }
    static double to_double(const Exact& v) { return v.to_double(); }
    static Exact abs(const Exact& v) { return v.abs(); }
    static bool is_zero(const Exact& v) { return v.is_zero(); }
    static int sign(const Exact& v) { return v.sign(); }
    static bool less(const Exact& x, const Exact& y) { return x < y; }
};

}  // namespace bihaar
