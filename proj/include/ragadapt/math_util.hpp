#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace ragadapt {

// Sum with a fixed halving tree (split at n/2). The result is independent of
// chunking/threading decisions elsewhere, which keeps risks and CSV output
// bit-reproducible; it is also far more accurate than left-to-right accumulation.
double pairwise_sum(std::span<const double> x);

// Mean via pairwise_sum; empty input is the caller's error to raise.
double pairwise_mean(std::span<const double> x);

// Regularized incomplete beta I_x(a, b) via the Lentz continued fraction.
// Used for the spherical-cap radial CDF and its inverse.
double betainc(double a, double b, double x);

// Inverse of betainc in x for fixed (a, b): bisection then Newton polish.
double betainc_inv(double a, double b, double p);

// %.17g rendering shared by every CSV/report writer (round-trip exact).
std::string format_g17(double x);

}  // namespace ragadapt
