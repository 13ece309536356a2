#include "ragadapt/math_util.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace ragadapt {

double pairwise_sum(std::span<const double> x) {
    const std::size_t n = x.size();
    if (n <= 8) {
        double acc = 0.0;
        for (double v : x) acc += v;
        return acc;
    }
    const std::size_t mid = n / 2;
    return pairwise_sum(x.first(mid)) + pairwise_sum(x.subspan(mid));
}

double pairwise_mean(std::span<const double> x) {
    return pairwise_sum(x) / static_cast<double>(x.size());
}

namespace {

// Continued fraction for the incomplete beta (Lentz's method).
double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 400;
    constexpr double kEps = 3e-16;
    constexpr double kTiny = 1e-300;

    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;
    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < kTiny) d = kTiny;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        const double m2 = 2.0 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < kTiny) d = kTiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < kTiny) c = kTiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kEps) break;
    }
    return h;
}

}  // namespace

double betainc(double a, double b, double x) {
    if (!(a > 0.0) || !(b > 0.0)) throw std::invalid_argument("betainc: a, b must be positive");
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    const double front = std::exp(a * std::log(x) + b * std::log1p(-x) - lbeta);
    if (x < (a + 1.0) / (a + b + 2.0)) {
        return front * betacf(a, b, x) / a;
    }
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double betainc_inv(double a, double b, double p) {
    if (p <= 0.0) return 0.0;
    if (p >= 1.0) return 1.0;
    double lo = 0.0, hi = 1.0;
    double x = 0.5;
    for (int i = 0; i < 60; ++i) {
        x = 0.5 * (lo + hi);
        if (betainc(a, b, x) < p) {
            lo = x;
        } else {
            hi = x;
        }
    }
    // Newton polish with the beta density; bisection bracket as the safety net.
    const double lbeta = std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b);
    for (int i = 0; i < 8; ++i) {
        const double f = betainc(a, b, x) - p;
        const double logpdf = (a - 1.0) * std::log(x) + (b - 1.0) * std::log1p(-x) - lbeta;
        const double step = f * std::exp(-logpdf);
        double next = x - step;
        if (!(next > lo && next < hi)) break;
        x = next;
    }
    return x;
}

std::string format_g17(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

}  // namespace ragadapt
