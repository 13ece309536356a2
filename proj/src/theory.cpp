#include "ragadapt/theory.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "ragadapt/math_util.hpp"
#include "ragadapt/retrieval.hpp"

namespace ragadapt {

namespace {

// Lipschitz constant of the cross-entropy on [-1,1]^C.
double lipschitz_l() { return std::sqrt(std::exp(2.0) + 1.0); }

double euclid_dist(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

std::vector<double> normalized_mean(const std::vector<UnitVector>& points) {
    const std::size_t d = points.front().dim();
    std::vector<double> m(d, 0.0);
    for (const auto& p : points)
        for (std::size_t i = 0; i < d; ++i) m[i] += p[i];
    double norm2 = 0.0;
    for (double x : m) norm2 += x * x;
    if (norm2 <= 1e-24) throw ZeroVectorError("normalized_mean: cluster mean vanished");
    const double norm = std::sqrt(norm2);
    for (double& x : m) x /= norm;
    return m;
}

// Per-class K-shot oracle cache averages; queries by mode (text / one-shot /
// the prototype itself for the oracle arm).
ClassAverages oracle_kbar(const World& world, RetrievalMode mode, std::size_t k,
                          std::uint64_t seed) {
    std::vector<UnitVector> cols;
    cols.reserve(world.classes());
    for (std::size_t c = 0; c < world.classes(); ++c) {
        UnitVector query = mode == RetrievalMode::T2I    ? world.text().unit(c)
                           : mode == RetrievalMode::I2I ? world.one_shot().unit(c)
                                                        : world.prototypes().unit(c);
        const auto draws =
            oracle_retrieve(world, query, k, rng::derive_seed(seed, "kbar-class", c));
        cols.push_back(UnitVector::normalize(normalized_mean(draws)));
    }
    return ClassAverages::from_columns(cols);
}

std::string join_context(std::initializer_list<std::pair<const char*, std::string>> kv) {
    std::ostringstream os;
    bool first = true;
    for (const auto& [key, value] : kv) {
        if (!first) os << "; ";
        os << key << "=" << value;
        first = false;
    }
    return os.str();
}

std::string g17(double x) { return format_g17(x); }

double binomial_sigma(double p, std::size_t n) {
    return std::sqrt(p * (1.0 - p) / static_cast<double>(n));
}

}  // namespace

BoundCheck make_bound_check(std::string name, double lhs, double rhs, bool applicable,
                            std::string context) {
    BoundCheck check;
    check.name = std::move(name);
    check.lhs = lhs;
    check.rhs = rhs;
    check.satisfied = lhs <= rhs + kBoundSlack;
    check.applicable = applicable;
    check.context = std::move(context);
    return check;
}

WorldStats measure_world_stats(const World& world, std::span<const LabeledSample> samples) {
    if (samples.empty()) throw EmptySampleSetError("measure_world_stats: no samples");
    const auto& sbar = world.prototypes();
    const auto& text = world.text();
    const std::size_t c_total = world.classes();

    WorldStats stats;
    double max_inner = -2.0;
    double tau = -4.0;
    for (std::size_t i = 0; i < c_total; ++i)
        for (std::size_t j = 0; j < c_total; ++j) {
            if (i == j) continue;
            max_inner = std::max(max_inner, dot(sbar.column(i), sbar.column(j)));
            tau = std::max(tau, dot(text.column(j), sbar.column(i)) -
                                    dot(text.column(i), sbar.column(i)));
        }
    stats.nu = 1.0 - max_inner;
    stats.tau = tau;

    const double kappa = world.config().kappa;
    std::vector<std::size_t> total(c_total, 0), outliers(c_total, 0);
    for (const auto& s : samples) {
        const std::size_t c = s.y - 1;
        ++total[c];
        if (chordal_distance(s.z, sbar.unit(c)) >= kappa) ++outliers[c];
    }
    stats.rho_c_hat = 0.0;
    for (std::size_t c = 0; c < c_total; ++c)
        if (total[c] > 0)
            stats.rho_c_hat = std::max(
                stats.rho_c_hat, static_cast<double>(outliers[c]) / static_cast<double>(total[c]));
    return stats;
}

RetrievalShift measure_retrieval_shift(const World& world, RetrievalMode mode) {
    RetrievalShift out;
    out.xi.reserve(world.classes());
    for (std::size_t c = 0; c < world.classes(); ++c) {
        UnitVector query = mode == RetrievalMode::T2I    ? world.text().unit(c)
                           : mode == RetrievalMode::I2I ? world.one_shot().unit(c)
                                                        : world.prototypes().unit(c);
        const auto& cluster = world.clusters()[world.nearest_cluster(query)];
        out.xi.push_back(1.0 - dot(cluster.center.span(), world.prototypes().column(c)));
    }
    out.xi_max = *std::max_element(out.xi.begin(), out.xi.end());
    out.std_error = 0.0;
    return out;
}

RetrievalShift measure_retrieval_shift_mc(const World& world, RetrievalMode mode,
                                          std::size_t draws, std::uint64_t seed) {
    constexpr std::size_t kBatches = 10;
    const std::size_t per_batch = std::max<std::size_t>(1, draws / kBatches);
    RetrievalShift out;
    out.xi.reserve(world.classes());
    double worst_se = 0.0;
    for (std::size_t c = 0; c < world.classes(); ++c) {
        UnitVector query = mode == RetrievalMode::T2I    ? world.text().unit(c)
                           : mode == RetrievalMode::I2I ? world.one_shot().unit(c)
                                                        : world.prototypes().unit(c);
        const auto& cluster = world.clusters()[world.nearest_cluster(query)];
        const auto proto = world.prototypes().column(c);

        rng::Substream stream(seed, "xi-mc", c);
        std::vector<double> pooled(world.dim(), 0.0);
        std::vector<double> batch_xi(kBatches);
        for (std::size_t b = 0; b < kBatches; ++b) {
            std::vector<double> mean(world.dim(), 0.0);
            for (std::size_t i = 0; i < per_batch; ++i) {
                const UnitVector u = sample_class_point(cluster.center, cluster.kappa, 0.0, stream);
                for (std::size_t t = 0; t < world.dim(); ++t) mean[t] += u[t];
            }
            for (std::size_t t = 0; t < world.dim(); ++t) pooled[t] += mean[t];
            double norm2 = 0.0;
            for (double x : mean) norm2 += x * x;
            const double norm = std::sqrt(norm2);
            double inner = 0.0;
            for (std::size_t t = 0; t < world.dim(); ++t) inner += mean[t] / norm * proto[t];
            batch_xi[b] = 1.0 - inner;
        }
        double norm2 = 0.0;
        for (double x : pooled) norm2 += x * x;
        const double norm = std::sqrt(norm2);
        double inner = 0.0;
        for (std::size_t t = 0; t < world.dim(); ++t) inner += pooled[t] / norm * proto[t];
        out.xi.push_back(1.0 - inner);

        const double mean_xi = pairwise_mean(batch_xi);
        double var = 0.0;
        for (double x : batch_xi) var += (x - mean_xi) * (x - mean_xi);
        var /= static_cast<double>(kBatches - 1);
        worst_se = std::max(worst_se, std::sqrt(var / static_cast<double>(kBatches)));
    }
    out.xi_max = *std::max_element(out.xi.begin(), out.xi.end());
    out.std_error = worst_se;
    return out;
}

std::vector<ClassId> phi_set(std::span<const double> v, ClassId i, double z) {
    std::vector<ClassId> out;
    const double vi = v[i - 1];
    for (std::size_t j = 0; j < v.size(); ++j)
        if (vi - v[j] <= z) out.push_back(static_cast<ClassId>(j + 1));
    return out;
}

EventSummary classify_events(std::span<const LabeledSample> samples, const ClassAverages& text,
                             const ClassAverages& k_bar, std::span<const double> z_values) {
    if (samples.empty()) throw EmptySampleSetError("classify_events: no samples");
    EventSummary summary;
    summary.n = samples.size();
    summary.z_values.assign(z_values.begin(), z_values.end());
    std::vector<std::size_t> confused(z_values.size(), 0);

    for (const auto& s : samples) {
        const auto t_scores = text.matrix().transpose_apply(s.z.span());
        const auto k_scores = k_bar.matrix().transpose_apply(s.z.span());
        const bool t_right = argmax_class(t_scores) == s.y;
        const bool k_right = argmax_class(k_scores) == s.y;
        const std::size_t event = t_right ? (k_right ? 3 : 1) : (k_right ? 2 : 0);
        ++summary.count[event];
        if (event == 1 || event == 2) {  // E2 or E3
            ++summary.confusion_denom;
            for (std::size_t zi = 0; zi < z_values.size(); ++zi) {
                const auto phi_t = phi_set(t_scores, s.y, z_values[zi]);
                const auto phi_k = phi_set(k_scores, s.y, z_values[zi]);
                std::vector<ClassId> both;
                std::set_intersection(phi_t.begin(), phi_t.end(), phi_k.begin(), phi_k.end(),
                                      std::back_inserter(both));
                if (both.size() != 1 || both.front() != s.y) ++confused[zi];
            }
        }
    }

    summary.rho_d.resize(z_values.size());
    for (std::size_t zi = 0; zi < z_values.size(); ++zi)
        if (summary.confusion_denom > 0)
            summary.rho_d[zi] = static_cast<double>(confused[zi]) /
                                static_cast<double>(summary.confusion_denom);
    return summary;
}

BoundCheck check_lemma_soln_good(const World& world, std::span<const LabeledSample> samples) {
    const auto& cfg = world.config();
    const double c1 = static_cast<double>(world.classes()) - 1.0;
    const double lhs =
        empirical_risk(world.prototypes().matrix(), samples);
    const double rhs =
        (1.0 - cfg.rho_c) * std::log1p(c1 * std::exp(2.0 * cfg.kappa - cfg.nu_target)) +
        cfg.rho_c * std::log1p(c1 * std::exp(2.0));
    return make_bound_check(
        "lemma_soln_good", lhs, rhs, true,
        join_context({{"kappa", g17(cfg.kappa)},
                      {"nu", g17(cfg.nu_target)},
                      {"rho_c", g17(cfg.rho_c)},
                      {"classes", std::to_string(world.classes())},
                      {"n", std::to_string(samples.size())}}));
}

TopAccResult check_lemma_top_acc(const World& world, std::span<const LabeledSample> samples) {
    if (samples.empty()) throw EmptySampleSetError("check_lemma_top_acc: no samples");
    const auto& cfg = world.config();
    const double kappa = cfg.kappa;
    for (std::size_t c = 0; c < world.classes(); ++c) {
        const double drift =
            chordal_distance(world.one_shot().unit(c), world.prototypes().unit(c));
        if (drift > kappa + kBoundSlack)
            throw AssumptionViolatedError(
                "check_lemma_top_acc: one-shot sample for class " + std::to_string(c + 1) +
                " drifts " + g17(drift) + " > kappa from its prototype");
    }
    const double nu = world.measured_nu();
    const std::size_t n = samples.size();

    std::vector<double> gaps;
    gaps.reserve(n);
    std::size_t wrong = 0;
    for (const auto& s : samples) {
        const auto scores = world.one_shot().matrix().transpose_apply(s.z.span());
        double best_other = -2.0;
        for (std::size_t i = 0; i < scores.size(); ++i)
            if (i != s.y - 1) best_other = std::max(best_other, scores[i]);
        gaps.push_back(best_other - scores[s.y - 1]);
        if (argmax_class(scores) != s.y) ++wrong;
    }
    std::sort(gaps.begin(), gaps.end());

    // The pointwise gap bound covers inliers only; the empirical outlier count
    // fluctuates around rho_c * n, so the tested quantile backs off by three
    // binomial sigmas to stay below the inlier mass.
    const double sigma = binomial_sigma(cfg.rho_c, n);
    const double level = std::clamp(1.0 - cfg.rho_c - 3.0 * sigma, 0.0, 1.0);
    const std::size_t idx = static_cast<std::size_t>(std::clamp<long long>(
        static_cast<long long>(std::ceil(level * static_cast<double>(n))) - 1, 0,
        static_cast<long long>(n) - 1));

    TopAccResult result;
    const std::string base_context =
        join_context({{"kappa", g17(kappa)},
                      {"nu", g17(nu)},
                      {"rho_c", g17(cfg.rho_c)},
                      {"n", std::to_string(n)},
                      {"quantile_level", g17(level)}});
    result.gap = make_bound_check("lemma_top_acc_gap", gaps[idx], 4.0 * kappa - nu, true,
                                  base_context);
    const double error_rate = static_cast<double>(wrong) / static_cast<double>(n);
    result.accuracy =
        make_bound_check("lemma_top_acc_accuracy", error_rate, cfg.rho_c + 3.0 * sigma,
                         4.0 * kappa < nu, base_context);
    return result;
}

UniTrial theorem_uni_trial(const World& world, std::span<const LabeledSample> samples,
                           double alpha, double gamma, std::size_t k, double delta,
                           RetrievalMode mode, double xi, std::uint64_t seed) {
    const std::size_t c_total = world.classes();
    const std::size_t d = world.dim();
    const ClassAverages k_bar = oracle_kbar(world, mode, k, seed);

    FeatureMatrix blend(d, c_total);
    for (std::size_t c = 0; c < c_total; ++c) {
        auto out = blend.column(c);
        const auto t = world.text().column(c);
        const auto kb = k_bar.column(c);
        for (std::size_t i = 0; i < d; ++i) out[i] = alpha * t[i] + gamma * kb[i];
    }

    UniTrial trial;
    trial.lhs = empirical_risk(blend, samples) -
                empirical_risk(world.prototypes().matrix(), samples);

    std::vector<double> modality(samples.size());
    for (std::size_t j = 0; j < samples.size(); ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < c_total; ++c) {
            const double diff = dot(world.text().column(c), samples[j].z.span()) -
                                dot(world.prototypes().column(c), samples[j].z.span());
            acc += diff * diff;
        }
        modality[j] = std::sqrt(acc);
    }
    trial.modality_max = *std::max_element(modality.begin(), modality.end());
    trial.modality_mean = pairwise_mean(modality);

    const double cc = static_cast<double>(c_total);
    const double sample_term = world.config().kappa *
                               std::sqrt(8.0 * cc / static_cast<double>(k) * std::log(cc / delta));
    const double shift_term = std::sqrt(2.0 * cc * xi);
    trial.rhs = lipschitz_l() * (alpha * trial.modality_max + gamma * sample_term +
                                 gamma * shift_term);
    return trial;
}

BoundCheck check_theorem_uni(const World& world, std::span<const LabeledSample> samples,
                             double alpha, double gamma, std::size_t k, double delta,
                             RetrievalMode mode, std::size_t trials, std::uint64_t seed) {
    if (alpha < 0.0 || gamma < 0.0 || alpha + gamma > 1.0 + 1e-12)
        throw WeightSumViolationError("check_theorem_uni: need alpha, gamma >= 0 with sum <= 1");
    if (samples.empty()) throw EmptySampleSetError("check_theorem_uni: no samples");

    const double xi = measure_retrieval_shift(world, mode).xi_max;
    std::size_t violations = 0;
    std::vector<double> lhs_vals(trials), rhs_vals(trials);
    for (std::size_t t = 0; t < trials; ++t) {
        const UniTrial trial = theorem_uni_trial(world, samples, alpha, gamma, k, delta, mode, xi,
                                                 rng::derive_seed(seed, "uni-trial", t));
        lhs_vals[t] = trial.lhs;
        rhs_vals[t] = trial.rhs;
        if (trial.lhs > trial.rhs + kBoundSlack) ++violations;
    }
    const double fail_rate = static_cast<double>(violations) / static_cast<double>(trials);
    const char* mode_name = mode == RetrievalMode::T2I ? "t2i" : "i2i";
    return make_bound_check(
        std::string("theorem_uni_") + mode_name, fail_rate, delta, true,
        join_context({{"alpha", g17(alpha)},
                      {"gamma", g17(gamma)},
                      {"k", std::to_string(k)},
                      {"delta", g17(delta)},
                      {"xi", g17(xi)},
                      {"trials", std::to_string(trials)},
                      {"mean_risk_gap", g17(pairwise_mean(lhs_vals))},
                      {"mean_bound", g17(pairwise_mean(rhs_vals))},
                      {"seed", std::to_string(seed)}}));
}

EnsembleResult check_theorem_ensemble(const World& world, std::span<const LabeledSample> samples,
                                      std::size_t k, std::uint64_t seed) {
    if (samples.empty()) throw EmptySampleSetError("check_theorem_ensemble: no samples");
    const auto& cfg = world.config();
    const double kappa = cfg.kappa;
    const double nu = world.measured_nu();
    const double tau = world.measured_tau();

    const ClassAverages k_bar = oracle_kbar(world, RetrievalMode::I2I, k, seed);

    // The bound's 6k - nu cache-gap step needs every cache average within
    // chordal 2k of its prototype; when I2I retrieval lands in a wrong
    // cluster that fails and the verdict is reported not-applicable.
    bool applicable = true;
    for (std::size_t c = 0; c < world.classes(); ++c)
        if (chordal_distance(k_bar.unit(c), world.prototypes().unit(c)) >
            2.0 * kappa + kBoundSlack)
            applicable = false;

    EnsembleResult result;
    result.z_star = std::max(6.0 * kappa - nu, 2.0 * kappa + tau);
    const double z_values[1] = {result.z_star};
    result.events = classify_events(samples, world.text(), k_bar, z_values);

    std::size_t outliers = 0;
    for (const auto& s : samples)
        if (chordal_distance(s.z, world.prototypes().unit(s.y - 1)) >= kappa) ++outliers;
    result.rho_out = static_cast<double>(outliers) / static_cast<double>(samples.size());

    const EnsembleWeights w{0.5, 0.0, 0.5};
    const Predictor ensemble = [&](const UnitVector& z) {
        return theory_logits(w, world.text(), world.one_shot(), k_bar, z);
    };
    const double lhs = zero_one_risk(ensemble, samples);

    const double rho_d = result.events.rho_d[0].value_or(0.0);
    const double p2 = result.events.p(2), p3 = result.events.p(3);
    const double rhs = result.events.p(1) + (p2 + p3) * rho_d + result.rho_out;

    const std::string context =
        join_context({{"kappa", g17(kappa)},
                      {"nu", g17(nu)},
                      {"tau", g17(tau)},
                      {"z_star", g17(result.z_star)},
                      {"p1", g17(result.events.p(1))},
                      {"p2", g17(p2)},
                      {"p3", g17(p3)},
                      {"p4", g17(result.events.p(4))},
                      {"rho_d", result.events.rho_d[0] ? g17(rho_d) : std::string("absent")},
                      {"rho_out", g17(result.rho_out)},
                      {"k", std::to_string(k)},
                      {"n", std::to_string(samples.size())},
                      {"seed", std::to_string(seed)}});
    result.main = make_bound_check("theorem_ensemble", lhs, rhs, applicable, context);

    const bool condition =
        (p2 + p3) * (1.0 - rho_d) - result.rho_out >= std::max(p2, p3) - 1e-12;
    const double zoc_risk = result.events.p(1) + p3;  // exact count identity
    result.corollary = make_bound_check("theorem_ensemble_corollary", lhs, zoc_risk,
                                        applicable && condition, context);
    return result;
}

BoundCheck check_lipschitz(std::span<const std::size_t> class_counts, std::size_t trials_per_c,
                           std::uint64_t seed) {
    double worst = 0.0;
    for (const std::size_t c : class_counts) {
        rng::Substream stream(seed, "lipschitz", c);
        std::vector<double> v(c);
        for (std::size_t t = 0; t < trials_per_c; ++t) {
            for (double& x : v) x = stream.uniform(-1.0, 1.0);
            const ClassId y = static_cast<ClassId>(1 + stream.uniform_below(c));
            const auto grad = cross_entropy_grad(v, y);
            double norm2 = 0.0;
            for (double g : grad) norm2 += g * g;
            worst = std::max(worst, std::sqrt(norm2));
        }
    }
    std::string c_list;
    for (const std::size_t c : class_counts) {
        if (!c_list.empty()) c_list += "/";
        c_list += std::to_string(c);
    }
    return make_bound_check("lipschitz", worst, lipschitz_l(), true,
                            join_context({{"classes", c_list},
                                          {"trials_per_c", std::to_string(trials_per_c)},
                                          {"seed", std::to_string(seed)}}));
}

BoundCheck check_bernstein(const World& world, std::size_t k, double delta, std::size_t trials,
                           std::uint64_t seed) {
    const std::size_t c_total = world.classes();
    const double cc = static_cast<double>(c_total);
    const double kappa = world.config().kappa;
    const double bound = kappa * std::sqrt(8.0 / static_cast<double>(k) * std::log(cc / delta));

    std::size_t exceed = 0;
    for (std::size_t t = 0; t < trials; ++t) {
        double worst = 0.0;
        for (std::size_t c = 0; c < c_total; ++c) {
            const auto& cluster = world.clusters()[c];  // class prototypes come first
            rng::Substream stream(rng::derive_seed(seed, "bernstein-trial", t), "class", c);
            std::vector<UnitVector> draws;
            draws.reserve(k);
            for (std::size_t i = 0; i < k; ++i)
                draws.push_back(sample_class_point(cluster.center, cluster.kappa, 0.0, stream));
            const auto mean = normalized_mean(draws);
            worst = std::max(worst, euclid_dist(mean, cluster.center.span()));
        }
        if (worst > bound + kBoundSlack) ++exceed;
    }
    const double fraction = static_cast<double>(exceed) / static_cast<double>(trials);
    const double sigma = binomial_sigma(delta, trials);
    return make_bound_check("bernstein", fraction, delta + 3.0 * sigma, true,
                            join_context({{"k", std::to_string(k)},
                                          {"delta", g17(delta)},
                                          {"kappa", g17(kappa)},
                                          {"classes", std::to_string(c_total)},
                                          {"bound", g17(bound)},
                                          {"trials", std::to_string(trials)},
                                          {"seed", std::to_string(seed)}}));
}

void write_report_text(std::ostream& os, const TheoryReport& report) {
    os << "measured quantities\n";
    os << "  nu        = " << g17(report.stats.nu) << "\n";
    os << "  tau       = " << g17(report.stats.tau) << "\n";
    os << "  rho_c_hat = " << g17(report.stats.rho_c_hat) << "\n";
    os << "  kappa     = " << g17(report.kappa_used)
       << "  (cosine equivalent " << g17(1.0 - report.kappa_used * report.kappa_used / 2.0)
       << ")\n";
    os << "  xi_i2i    = " << g17(report.xi_i2i) << "\n";
    os << "  xi_t2i    = " << g17(report.xi_t2i) << "\n";
    if (report.events.n > 0) {
        os << "events (n = " << report.events.n << ")\n";
        os << "  p1 = " << g17(report.events.p(1)) << "  p2 = " << g17(report.events.p(2))
           << "  p3 = " << g17(report.events.p(3)) << "  p4 = " << g17(report.events.p(4))
           << "\n";
        for (std::size_t i = 0; i < report.events.z_values.size(); ++i) {
            os << "  rho_d(" << g17(report.events.z_values[i]) << ") = ";
            if (report.events.rho_d[i]) os << g17(*report.events.rho_d[i]);
            else os << "absent (no E2/E3 samples)";
            os << "\n";
        }
    }
    os << "checks\n";
    for (const auto& check : report.checks) {
        const char* verdict = !check.applicable ? "N/A " : check.satisfied ? "PASS" : "FAIL";
        os << "  [" << verdict << "] " << check.name << ": lhs " << g17(check.lhs) << " vs rhs "
           << g17(check.rhs) << "\n";
        os << "         " << check.context << "\n";
    }
}

void write_report_csv(std::ostream& os, const TheoryReport& report) {
    os << "name,lhs,rhs,satisfied,applicable,context\n";
    for (const auto& check : report.checks)
        os << check.name << "," << g17(check.lhs) << "," << g17(check.rhs) << ","
           << (check.satisfied ? 1 : 0) << "," << (check.applicable ? 1 : 0) << ","
           << check.context << "\n";
}

}  // namespace ragadapt
