#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ragadapt/heads.hpp"
#include "ragadapt/world.hpp"

// Numerical verification of the framework's risk bounds on generated worlds:
// measured separation/concentration/shift/gap quantities, the four joint
// head-correctness events, the shared-confusion rate rho_d, and one checker
// per lemma/theorem, each reporting an lhs <= rhs verdict.
namespace ragadapt {

// Absolute slack absorbing float rounding in every inequality verdict.
inline constexpr double kBoundSlack = 1e-9;

struct BoundCheck {
    std::string name;
    double lhs = 0.0;
    double rhs = 0.0;
    bool satisfied = false;   // lhs <= rhs + kBoundSlack
    bool applicable = true;   // preconditions held; false means the verdict is not asserted
    std::string context;      // self-contained parameter echo (key=value list)
};

BoundCheck make_bound_check(std::string name, double lhs, double rhs, bool applicable,
                            std::string context);

struct WorldStats {
    double nu = 0.0;         // 1 - max_{i != j} sbar_i . sbar_j
    double tau = 0.0;        // max_{i != j} (t_j - t_i) . sbar_i
    double rho_c_hat = 0.0;  // max over classes of the empirical outlier fraction
};

// nu and tau from the world's matrices, rho_c_hat from the sample set
// (fraction with chordal distance to its class prototype >= configured kappa).
WorldStats measure_world_stats(const World& world, std::span<const LabeledSample> samples);

// xi_c = 1 - kbar_{q_c} . sbar_c where kbar_{q_c} is the normalized population
// mean of the retrieval cluster closest to the query (text t_c or one-shot s_c).
struct RetrievalShift {
    std::vector<double> xi;   // per class, 1-based class c at xi[c-1]
    double xi_max = 0.0;
    double std_error = 0.0;   // 0 for the exact route
};

// Exact route: the normalized mean of a uniform cap distribution is its
// center (rotational symmetry about the center axis), so kbar_{q_c} is the
// nearest cluster center itself and the shift needs no sampling.
RetrievalShift measure_retrieval_shift(const World& world, RetrievalMode mode);
// Monte-Carlo cross-check of the same quantity; std_error from batch spread.
RetrievalShift measure_retrieval_shift_mc(const World& world, RetrievalMode mode,
                                          std::size_t draws, std::uint64_t seed);

// { j : v_i - v_j <= z }, ascending. Contains i whenever z >= 0; negative z
// (which arises in the ensemble theorem's threshold) may exclude it.
std::vector<ClassId> phi_set(std::span<const double> v, ClassId i, double z);

// Joint correctness of the linear text head argmax T^T z and the linear cache
// head argmax Kbar^T z on every sample, plus rho_d at requested thresholds.
struct EventSummary {
    std::size_t n = 0;
    std::size_t count[4] = {0, 0, 0, 0};  // E1..E4: both wrong / only T right / only Kbar right / both right
    std::size_t confusion_denom = 0;      // |E2 or E3|
    std::vector<double> z_values;
    std::vector<std::optional<double>> rho_d;  // absent when confusion_denom == 0

    double p(std::size_t event) const {  // event in 1..4
        return static_cast<double>(count[event - 1]) / static_cast<double>(n);
    }
};

EventSummary classify_events(std::span<const LabeledSample> samples, const ClassAverages& text,
                             const ClassAverages& k_bar, std::span<const double> z_values);

// Risk bound for the prototype matrix:
//   lhs = empirical CE risk of Sbar
//   rhs = (1-rho_c) log(1 + (C-1) e^{2k-nu}) + rho_c log(1 + (C-1) e^2)
BoundCheck check_lemma_soln_good(const World& world, std::span<const LabeledSample> samples);

// One-shot head logit-gap bound and its accuracy corollary.
//   gap:      lhs = empirical high quantile of max_{i!=y} s_i.z - s_y.z, rhs = 4k - nu
//   accuracy: lhs = one-shot head 0-1 risk, rhs = rho_c + 3 sigma_binomial
//             (applicable only when 4k < nu)
struct TopAccResult {
    BoundCheck gap;
    BoundCheck accuracy;
};
TopAccResult check_lemma_top_acc(const World& world, std::span<const LabeledSample> samples);

// One trial of the ensemble-risk bound for a fresh K-shot oracle cache:
//   lhs = R(alpha T + gamma Kbar) - R(Sbar)
//   rhs = L (alpha max_j ||(T - Sbar)^T z_j|| + gamma kappa sqrt(8C/K log(C/d))
//            + gamma sqrt(2 C xi))
// with L = sqrt(e^2 + 1). The max over test samples of the modality term is an
// interpretation (the statement leaves z free); the trial also reports the
// sample mean of that term for reference.
struct UniTrial {
    double lhs = 0.0;
    double rhs = 0.0;
    double modality_max = 0.0;
    double modality_mean = 0.0;
};
UniTrial theorem_uni_trial(const World& world, std::span<const LabeledSample> samples,
                           double alpha, double gamma, std::size_t k, double delta,
                           RetrievalMode mode, double xi, std::uint64_t seed);

// Repeats the trial; lhs = fraction of trials violating the bound, rhs = delta.
BoundCheck check_theorem_uni(const World& world, std::span<const LabeledSample> samples,
                             double alpha, double gamma, std::size_t k, double delta,
                             RetrievalMode mode, std::size_t trials, std::uint64_t seed);

// 0-1 risk bound of the half-half linear ensemble over an I2I oracle cache:
//   main:      lhs = R01(0.5 T + 0.5 Kbar)
//              rhs = P(E1) + (P(E2)+P(E3)) rho_d(z*) + rho_out,
//              z* = max{6k - nu, 2k + tau}, rho_out = empirical outlier fraction
//   corollary: when (P(E2)+P(E3))(1 - rho_d) - rho_out >= max{P(E2), P(E3)},
//              asserts R01(ensemble) <= R01(text head)
struct EnsembleResult {
    BoundCheck main;
    BoundCheck corollary;  // applicable only when the condition above measures true
    EventSummary events;
    double z_star = 0.0;
    double rho_out = 0.0;
};
EnsembleResult check_theorem_ensemble(const World& world, std::span<const LabeledSample> samples,
                                      std::size_t k, std::uint64_t seed);

// Gradient-norm bound of the cross-entropy on [-1,1]^C:
//   lhs = max sampled ||grad l(v, y)||_2, rhs = sqrt(e^2 + 1)
BoundCheck check_lipschitz(std::span<const std::size_t> class_counts, std::size_t trials_per_c,
                           std::uint64_t seed);

// Concentration of the normalized K-sample cluster mean around the center:
//   per trial, exceed iff max_c ||mean_hat_c - center_c|| > kappa sqrt(8/K log(C/d));
//   lhs = exceedance fraction, rhs = delta + 3 sigma_binomial
BoundCheck check_bernstein(const World& world, std::size_t k, double delta, std::size_t trials,
                           std::uint64_t seed);

// Everything the verify pipeline measured for one world, emitted as
// structured text (human) and flat CSV (machine), one row per check.
struct TheoryReport {
    WorldStats stats;
    double kappa_used = 0.0;
    double xi_i2i = 0.0;
    double xi_t2i = 0.0;
    EventSummary events;
    std::vector<BoundCheck> checks;
};

void write_report_text(std::ostream& os, const TheoryReport& report);
void write_report_csv(std::ostream& os, const TheoryReport& report);

}  // namespace ragadapt
