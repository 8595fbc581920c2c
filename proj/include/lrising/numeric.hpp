#pragma once

#include <boost/multiprecision/float128.hpp>

#include <cmath>
#include <type_traits>

namespace lrising {

using quad = boost::multiprecision::float128;

template <class T>
inline constexpr bool is_quad_v = std::is_same_v<T, quad>;

template <class Real>
inline Real rexp(const Real& x) {
    using std::exp;
    return exp(x);
}

template <class Real>
inline Real rlog(const Real& x) {
    using std::log;
    return log(x);
}

template <class Real>
inline Real rpow(const Real& x, const Real& y) {
    using std::pow;
    return pow(x, y);
}

template <class Real>
inline Real rabs(const Real& x) {
    using std::abs;
    return abs(x);
}

template <class Real>
inline Real rlog1p(const Real& x) {
    if constexpr (is_quad_v<Real>) {
        return quad(::log1pq(x.backend().value()));
    } else {
        using std::log1p;
        return log1p(x);
    }
}

template <class Real>
inline Real rexpm1(const Real& x) {
    if constexpr (is_quad_v<Real>) {
        return quad(::expm1q(x.backend().value()));
    } else {
        using std::expm1;
        return std::expm1(x);
    }
}

// Neumaier compensated sum; adding in a fixed order makes results reproducible.
template <class Real>
class CompensatedSum {
public:
    void add(const Real& v) {
        Real t = sum_ + v;
        if (rabs(sum_) >= rabs(v))
            comp_ += (sum_ - t) + v;
        else
            comp_ += (v - t) + sum_;
        sum_ = t;
    }
    void add(const CompensatedSum& o) {
        add(o.sum_);
        add(o.comp_);
    }
    Real value() const { return sum_ + comp_; }

private:
    Real sum_{0};
    Real comp_{0};
};

}  // namespace lrising
