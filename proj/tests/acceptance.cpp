// Acceptance gate: one binary, one pass/fail line per criterion, exit 0 only
// when every criterion holds. Criteria with a stated wall-clock budget fail
// when they run over it. argv[1] is the CLI binary, exercised by the
// determinism criterion; everything else calls the library directly.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "ragadapt/experiment.hpp"
#include "ragadapt/math_util.hpp"
#include "ragadapt/rng.hpp"
#include "ragadapt/store_io.hpp"

using namespace ragadapt;

namespace {

std::string g_cli_path;  // set from argv[1] in main

std::string fmt(const char* pattern, double a, double b = 0.0) {
    char buf[160];
    std::snprintf(buf, sizeof buf, pattern, a, b);
    return buf;
}

// A catalogue of small worlds with varied geometry and all three text modes.
World mixed_world(std::uint64_t index, std::uint64_t seed_base) {
    WorldConfig wc;
    wc.classes = 3 + index % 6;
    wc.dim = 8 + 8 * (index % 2);
    wc.kappa = 0.05 + 0.01 * (index % 5);
    wc.nu_target = 0.4 + 0.1 * (index % 3);
    wc.db_per_cluster = 32;
    wc.master_seed = seed_base + index;
    switch (index % 3) {
        case 0: wc.tau_mode = TauMode::Mirror; break;
        case 1:
            wc.tau_mode = TauMode::Perturbed;
            wc.tau_scale = 0.1;
            break;
        default:
            wc.tau_mode = TauMode::AdversarialCluster;
            wc.adversarial_fraction = (index % 2) ? 0.5 : 1.0;
            break;
    }
    return make_world(wc);
}

World adversarial_world(std::uint64_t index, std::uint64_t seed_base) {
    WorldConfig wc;
    wc.classes = 3 + index % 6;
    wc.dim = 8 + 8 * (index % 2);
    wc.kappa = 0.05 + 0.03 * (index % 5);
    wc.nu_target = 0.5 + 0.2 * (index % 3);
    wc.db_per_cluster = 32;
    wc.master_seed = seed_base + index;
    wc.tau_mode = TauMode::AdversarialCluster;
    wc.adversarial_fraction = 1.0;
    return make_world(wc);
}

// Mean cross-entropy of the EN head, the objective fine-tuning minimizes.
double en_risk(const Cache& cache, const ClassAverages& text, const EnsembleWeights& w,
               std::span<const LabeledSample> samples) {
    std::vector<double> losses;
    losses.reserve(samples.size());
    for (const auto& s : samples) {
        const auto en = ensemble_logits(w, zoc_logits(text, s.z), ret_logits(cache, s.z));
        losses.push_back(cross_entropy(en.scores, s.y));
    }
    return pairwise_mean(losses);
}

// K fresh oracle draws per class around the class prototype.
Cache oracle_cache(const World& world, std::size_t k, double omega, std::uint64_t seed) {
    Cache cache(world.dim(), world.classes(), k, omega);
    for (std::size_t c = 0; c < world.classes(); ++c) {
        const auto draws = oracle_retrieve(world, world.prototypes().unit(c), k,
                                           rng::derive_seed(seed, "shots", c));
        for (std::size_t i = 0; i < k; ++i) {
            auto dst = cache.shot(static_cast<ClassId>(c + 1), i);
            std::copy(draws[i].values().begin(), draws[i].values().end(), dst.begin());
        }
    }
    return cache;
}

template <typename E, typename F>
bool throws_exactly(F&& f) {
    try {
        f();
    } catch (const E&) {
        return true;
    } catch (...) {
        return false;
    }
    return false;
}

std::string read_bytes(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

void write_bytes(const std::filesystem::path& path, const std::string& bytes) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

// 1: closed-form risk of the prototype matrix on the two-point antipodal
// world: log(1 + e^-2).
bool prototype_risk_exact(std::string& detail) {
    const UnitVector e1 = UnitVector::normalize(std::vector<double>{1.0, 0.0});
    const UnitVector e1_neg = UnitVector::normalize(std::vector<double>{-1.0, 0.0});
    const FeatureMatrix prototypes = FeatureMatrix::from_columns({e1, e1_neg});
    const std::vector<LabeledSample> samples = {{e1, 1}, {e1_neg, 2}};
    const double risk = empirical_risk(prototypes, samples);
    const double expected = 0.12692801104297249;  // log(1 + e^-2)
    detail = fmt("risk=%.17g", risk);
    return std::fabs(risk - expected) <= 1e-9;
}

// 2: sampled loss-gradient norms stay under sqrt(e^2 + 1) and the analytic
// gradient matches central finite differences.
bool gradient_norm_bound(std::string& detail) {
    const std::vector<std::size_t> class_counts = {2, 10, 100};
    const auto bound =
        check_lipschitz(class_counts, 100000, rng::derive_seed(2026, "acceptance-lipschitz"));
    if (!bound.satisfied) {
        detail = "norm bound: " + bound.context;
        return false;
    }

    const double h = 1e-6;
    double worst_rel = 0.0;
    for (const std::size_t c : class_counts) {
        rng::Substream stream(2026, "acceptance-fd", c);
        for (int point = 0; point < 30; ++point) {
            std::vector<double> v(c);
            for (double& x : v) x = stream.uniform(-1.0, 1.0);
            const auto y = static_cast<ClassId>(1 + stream.uniform_below(c));
            const auto grad = cross_entropy_grad(v, y);
            double diff2 = 0.0, fd2 = 0.0;
            for (std::size_t i = 0; i < c; ++i) {
                const double saved = v[i];
                v[i] = saved + h;
                const double up = cross_entropy(v, y);
                v[i] = saved - h;
                const double down = cross_entropy(v, y);
                v[i] = saved;
                const double fd = (up - down) / (2.0 * h);
                diff2 += (grad[i] - fd) * (grad[i] - fd);
                fd2 += fd * fd;
            }
            worst_rel = std::max(worst_rel, std::sqrt(diff2) / std::sqrt(fd2));
        }
    }
    detail = fmt("max_norm=%.12g, fd_rel=%.3g", bound.lhs, worst_rel);
    return worst_rel <= 1e-6;
}

// 3: the materialized one-hot value matrix for K=2, C=3.
bool value_matrix_fixture(std::string& detail) {
    const std::vector<std::vector<int>> expected = {
        {1, 1, 0, 0, 0, 0}, {0, 0, 1, 1, 0, 0}, {0, 0, 0, 0, 1, 1}};
    const bool ok = materialize_v(2, 3) == expected;
    detail = ok ? "3x6 exact" : "matrix mismatch";
    return ok;
}

// 4: retrieval shift obeys xi_i2i <= 2 kappa^2 on 120 worlds and
// xi_t2i >= nu - 2 kappa on the 60 fully misdirected ones.
bool retrieval_shift_bounds(std::string& detail) {
    std::size_t i2i_ok = 0, t2i_ok = 0;
    for (std::uint64_t s = 1; s <= 60; ++s) {
        WorldConfig wc;
        wc.classes = 3 + s % 6;
        wc.dim = 8 + 8 * (s % 2);
        wc.kappa = 0.05 + 0.03 * (s % 5);
        wc.nu_target = 0.4 + 0.15 * (s % 3);
        wc.db_per_cluster = 32;
        wc.master_seed = 100 + s;
        wc.tau_mode = (s % 2) ? TauMode::Mirror : TauMode::Perturbed;
        wc.tau_scale = (s % 2) ? 0.0 : 0.15;
        const World w = make_world(wc);
        const double xi = measure_retrieval_shift(w, RetrievalMode::I2I).xi_max;
        if (xi <= 2.0 * wc.kappa * wc.kappa + kBoundSlack) ++i2i_ok;
    }
    for (std::uint64_t s = 1; s <= 60; ++s) {
        const World w = adversarial_world(s, 500);
        const double kappa = w.config().kappa;
        const double xi_i = measure_retrieval_shift(w, RetrievalMode::I2I).xi_max;
        if (xi_i <= 2.0 * kappa * kappa + kBoundSlack) ++i2i_ok;
        const double xi_t = measure_retrieval_shift(w, RetrievalMode::T2I).xi_max;
        if (xi_t >= w.measured_nu() - 2.0 * kappa - kBoundSlack) ++t2i_ok;
    }
    detail = fmt("i2i %.0f/120, t2i %.0f/60", double(i2i_ok), double(t2i_ok));
    return i2i_ok == 120 && t2i_ok == 60;
}

// 5: one-shot head accuracy floor 1 - rho_c - 3 sigma on well-separated
// worlds; zero errors when the outlier mass is zero.
bool prototype_head_accuracy(std::string& detail) {
    for (const double rho : {0.0, 0.05}) {
        for (std::uint64_t s = 1; s <= 5; ++s) {
            WorldConfig wc;
            wc.classes = 3 + s;
            wc.dim = 8 + 8 * (s % 2);
            wc.kappa = 0.1;
            wc.nu_target = 0.6;
            wc.rho_c = rho;
            wc.db_per_cluster = 32;
            wc.master_seed = 40 + s;
            const World w = make_world(wc);
            const auto samples =
                sample_target_set(w, 10000, rng::derive_seed(wc.master_seed, "acc-samples"));
            const auto res = check_lemma_top_acc(w, samples);
            if (!res.accuracy.applicable || !res.accuracy.satisfied) {
                detail = fmt("rho=%.2f world %.0f: ", rho, double(s)) + res.accuracy.context;
                return false;
            }
            if (rho == 0.0 && res.accuracy.lhs != 0.0) {
                detail = fmt("rho=0 world %.0f has error rate %.6g", double(s), res.accuracy.lhs);
                return false;
            }
        }
    }
    detail = "10 worlds, zero errors at rho_c=0";
    return true;
}

// 6: the ensemble-risk bound fails in at most a delta fraction of 200 cache
// draws for every (mode, K), and the I2I rhs is strictly below the T2I rhs
// on every fully misdirected world.
bool ensemble_risk_coverage(std::string& detail) {
    for (const bool adversarial : {false, true}) {
        WorldConfig wc;
        wc.classes = 4;
        wc.dim = 8;
        wc.kappa = 0.1;
        wc.nu_target = 0.6;
        wc.db_per_cluster = 32;
        wc.master_seed = 7;
        if (adversarial) {
            wc.tau_mode = TauMode::AdversarialCluster;
            wc.adversarial_fraction = 1.0;
        }
        const World w = make_world(wc);
        const auto samples = sample_target_set(w, 2000, rng::derive_seed(7, "uni-samples"));
        for (const std::size_t k : {1, 4, 16}) {
            for (const auto mode : {RetrievalMode::I2I, RetrievalMode::T2I}) {
                const auto bound = check_theorem_uni(w, samples, 0.5, 0.5, k, 0.1, mode, 200,
                                                     rng::derive_seed(7, "uni-trials", k));
                if (!bound.satisfied) {
                    detail = bound.context;
                    return false;
                }
            }
        }
    }
    for (std::uint64_t s = 1; s <= 20; ++s) {
        const World w = adversarial_world(s, 0);
        const auto samples = sample_target_set(w, 1000, rng::derive_seed(s, "rhs-samples"));
        const double xi_i = measure_retrieval_shift(w, RetrievalMode::I2I).xi_max;
        const double xi_t = measure_retrieval_shift(w, RetrievalMode::T2I).xi_max;
        const auto ti = theorem_uni_trial(w, samples, 0.5, 0.5, 8, 0.1, RetrievalMode::I2I, xi_i, s);
        const auto tt = theorem_uni_trial(w, samples, 0.5, 0.5, 8, 0.1, RetrievalMode::T2I, xi_t, s);
        if (!(ti.rhs < tt.rhs)) {
            detail = fmt("world %.0f: i2i rhs %.6g", double(s), ti.rhs) + fmt(" !< t2i rhs %.6g", tt.rhs);
            return false;
        }
    }
    detail = "12 bound configs, strict rhs split on 20/20 worlds";
    return true;
}

// 7: the 0-1 ensemble bound holds on all 50 mixed worlds, and whenever the
// corollary condition measures true the ensemble beats the text head.
bool zero_one_bound_sweep(std::string& detail) {
    std::size_t corollary_hits = 0;
    for (std::uint64_t s = 1; s <= 50; ++s) {
        const World w = mixed_world(s, 1000);
        const std::uint64_t seed = w.config().master_seed;
        const auto samples = sample_target_set(w, 2000, rng::derive_seed(seed, "en-samples"));
        const auto res = check_theorem_ensemble(w, samples, 16, rng::derive_seed(seed, "en-cache"));
        if (!res.main.applicable || !res.main.satisfied) {
            detail = "main: " + res.main.context;
            return false;
        }
        if (res.corollary.applicable) {
            ++corollary_hits;
            if (!res.corollary.satisfied) {
                detail = "corollary: " + res.corollary.context;
                return false;
            }
        }
    }
    detail = fmt("50 worlds, corollary active on %.0f", double(corollary_hits));
    return true;
}

// 8: cache-mean concentration at the closed-form radius, 1000 fresh caches.
bool cache_mean_concentration(std::string& detail) {
    WorldConfig wc;
    wc.classes = 10;
    wc.dim = 16;
    wc.kappa = 0.3;
    wc.nu_target = 0.6;
    wc.db_per_cluster = 32;
    wc.master_seed = 9;
    const World w = make_world(wc);
    const auto bound = check_bernstein(w, 16, 0.05, 1000, rng::derive_seed(9, "bernstein"));
    detail = fmt("exceed=%.4f of rhs=%.4f", bound.lhs, bound.rhs);
    if (bound.context.find("bound=0.48828708921561875") == std::string::npos) {
        detail = "closed-form radius drifted: " + bound.context;
        return false;
    }
    return bound.satisfied;
}

// 9: the joint-event counts reproduce both heads' 0-1 risks exactly.
bool event_risk_identities(std::string& detail) {
    for (std::uint64_t s = 1; s <= 10; ++s) {
        const World w = mixed_world(s, 3000);
        const std::uint64_t seed = w.config().master_seed;
        const auto samples = sample_target_set(w, 2000, rng::derive_seed(seed, "ev-samples"));

        std::vector<UnitVector> cols;
        for (std::size_t c = 0; c < w.classes(); ++c) {
            const auto draws = oracle_retrieve(w, w.one_shot().unit(c), 8,
                                               rng::derive_seed(seed, "ev-kbar", c));
            std::vector<double> mean(w.dim(), 0.0);
            for (const auto& v : draws)
                for (std::size_t i = 0; i < w.dim(); ++i) mean[i] += v[i];
            cols.push_back(UnitVector::normalize(mean));
        }
        const ClassAverages k_bar = ClassAverages::from_columns(cols);

        std::size_t text_errors = 0, cache_errors = 0;
        for (const auto& sample : samples) {
            if (argmax_class(w.text().matrix().transpose_apply(sample.z.span())) != sample.y)
                ++text_errors;
            if (argmax_class(k_bar.matrix().transpose_apply(sample.z.span())) != sample.y)
                ++cache_errors;
        }
        const auto events = classify_events(samples, w.text(), k_bar, std::span<const double>{});
        if (events.count[0] + events.count[2] != text_errors ||
            events.count[0] + events.count[1] != cache_errors) {
            detail = fmt("world %.0f: counts do not match head errors", double(s));
            return false;
        }
    }
    detail = "10 worlds exact";
    return true;
}

// 10: per-run mean-accuracy orderings on misdirected-text worlds:
// oracle >= i2i and i2i > t2i for the ensemble, and the ensemble beats both
// of its component heads under i2i and oracle retrieval, each in >= 48 of
// 50 seeded runs.
bool mode_accuracy_ordering(std::string& detail) {
    ExperimentConfig cfg;
    cfg.world.classes = 16;
    cfg.world.dim = 16;
    cfg.world.kappa = 0.35;
    cfg.world.nu_target = 0.11;
    cfg.world.tau_mode = TauMode::AdversarialCluster;
    cfg.world.adversarial_fraction = 0.5;
    cfg.world.db_per_cluster = 48;
    cfg.shots = {1, 4, 16};
    cfg.modes = {RetrievalMode::T2I, RetrievalMode::I2I, RetrievalMode::OracleId};
    cfg.heads = {ExperimentHead::ZOC, ExperimentHead::RET, ExperimentHead::EN};
    cfg.weights = {{0.25, 0.75}};
    cfg.omega = 4.0;
    cfg.trials = 50;
    cfg.test_n = 2000;
    cfg.master_seed = 11;

    const auto rows = run_rows(cfg, 4);
    struct Mean {
        double sum = 0.0;
        std::size_t n = 0;
    };
    std::map<std::tuple<std::size_t, int, int>, Mean> means;
    for (const auto& r : rows) {
        auto& m = means[{r.trial, static_cast<int>(r.mode), static_cast<int>(r.head)}];
        m.sum += r.accuracy;
        m.n += 1;
    }
    const auto mean_of = [&](std::size_t trial, RetrievalMode mode, ExperimentHead head) {
        const auto& m = means.at({trial, static_cast<int>(mode), static_cast<int>(head)});
        return m.sum / static_cast<double>(m.n);
    };

    std::size_t oracle_ge_i2i = 0, i2i_gt_t2i = 0, en_beats_i2i = 0, en_beats_oracle = 0;
    for (std::size_t t = 0; t < cfg.trials; ++t) {
        const double zoc = mean_of(t, RetrievalMode::T2I, ExperimentHead::ZOC);
        const double en_t2i = mean_of(t, RetrievalMode::T2I, ExperimentHead::EN);
        const double en_i2i = mean_of(t, RetrievalMode::I2I, ExperimentHead::EN);
        const double en_oracle = mean_of(t, RetrievalMode::OracleId, ExperimentHead::EN);
        const double ret_i2i = mean_of(t, RetrievalMode::I2I, ExperimentHead::RET);
        const double ret_oracle = mean_of(t, RetrievalMode::OracleId, ExperimentHead::RET);
        if (en_oracle >= en_i2i) ++oracle_ge_i2i;
        if (en_i2i > en_t2i) ++i2i_gt_t2i;
        if (en_i2i > zoc && en_i2i > ret_i2i) ++en_beats_i2i;
        if (en_oracle > zoc && en_oracle > ret_oracle) ++en_beats_oracle;
    }
    detail = fmt("o>=i %.0f, i>t %.0f", double(oracle_ge_i2i), double(i2i_gt_t2i)) +
             fmt(", en_i %.0f, en_o %.0f of 50", double(en_beats_i2i), double(en_beats_oracle));
    return oracle_ge_i2i >= 48 && i2i_gt_t2i >= 48 && en_beats_i2i >= 48 && en_beats_oracle >= 48;
}

// 11: fine-tuning gradient against finite differences, strict risk descent
// on every seeded run, and lr = 0 leaving the cache bit-identical.
bool finetune_descent(std::string& detail) {
    rng::Substream stream(2026, "acceptance-ft");
    const std::size_t dim = 4, classes = 3, shots = 2;
    Cache cache(dim, classes, shots, 2.0);
    for (std::size_t j = 0; j < cache.columns(); ++j) {
        std::vector<double> v(dim);
        for (double& x : v) x = stream.normal();
        const auto u = UnitVector::normalize(v);
        std::copy(u.values().begin(), u.values().end(), cache.column(j).begin());
    }
    std::vector<UnitVector> text_cols;
    for (std::size_t c = 0; c < classes; ++c) {
        std::vector<double> v(dim);
        for (double& x : v) x = stream.normal();
        text_cols.push_back(UnitVector::normalize(v));
    }
    const ClassAverages text = ClassAverages::from_columns(text_cols);
    std::vector<LabeledSample> train;
    for (int i = 0; i < 16; ++i) {
        std::vector<double> v(dim);
        for (double& x : v) x = stream.normal();
        train.push_back({UnitVector::normalize(v),
                         static_cast<ClassId>(1 + stream.uniform_below(classes))});
    }
    const EnsembleWeights w{0.5, 0.0, 0.5};

    const auto grad = ragadapt::detail::en_cache_gradient(cache, text, w, train);
    const double h = 1e-6;
    double worst_rel = 0.0;
    Cache probe = cache;
    for (std::size_t j = 0; j < probe.columns(); ++j) {
        for (std::size_t i = 0; i < dim; ++i) {
            const double saved = probe.column(j)[i];
            probe.column(j)[i] = saved + h;
            const double up = en_risk(probe, text, w, train);
            probe.column(j)[i] = saved - h;
            const double down = en_risk(probe, text, w, train);
            probe.column(j)[i] = saved;
            const double fd = (up - down) / (2.0 * h);
            worst_rel = std::max(worst_rel,
                                 std::fabs(grad.column(j)[i] - fd) / std::max(1.0, std::fabs(fd)));
        }
    }
    if (worst_rel > 1e-5) {
        detail = fmt("fd_rel=%.3g", worst_rel);
        return false;
    }

    for (std::uint64_t s = 1; s <= 5; ++s) {
        WorldConfig wc;
        wc.classes = 4;
        wc.dim = 8;
        wc.kappa = 0.2;
        wc.nu_target = 0.6;
        wc.db_per_cluster = 32;
        wc.master_seed = 60 + s;
        const World world = make_world(wc);
        const auto train_set = sample_target_set(world, 256, rng::derive_seed(wc.master_seed, "ft"));
        const Cache start = oracle_cache(world, 4, 2.0, rng::derive_seed(wc.master_seed, "cache"));

        FinetuneOptions frozen;
        frozen.lr = 0.0;
        frozen.epochs = 10;
        if (!(finetune_cache(start, world.text(), w, train_set, frozen).matrix() ==
              start.matrix())) {
            detail = fmt("lr=0 mutated the cache (seed %.0f)", double(s));
            return false;
        }

        FinetuneOptions opts;
        opts.lr = 5e-3;
        opts.epochs = 40;
        const double before = en_risk(start, world.text(), w, train_set);
        const Cache tuned = finetune_cache(start, world.text(), w, train_set, opts);
        const double after = en_risk(tuned, world.text(), w, train_set);
        if (!(after < before)) {
            detail = fmt("no descent: %.6g -> %.6g", before, after);
            return false;
        }
    }
    detail = fmt("fd_rel=%.3g, descent on 5/5 runs", worst_rel);
    return true;
}

// 12: byte-identical CSV output across thread counts through the CLI,
// bit-exact container round trip, and named errors on corrupted files.
bool determinism_and_format(std::string& detail) {
    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "ragadapt-acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);

    const fs::path cfg_path = dir / "tiny.cfg";
    {
        std::ofstream os(cfg_path);
        os << "[world]\n"
              "classes = 3\n"
              "dim = 6\n"
              "kappa = 0.1\n"
              "nu_target = 0.6\n"
              "tau_mode = mirror\n"
              "db_per_cluster = 16\n"
              "\n"
              "[run]\n"
              "trials = 2\n"
              "test_n = 50\n"
              "train_n = 32\n"
              "shots = 1 2\n"
              "modes = t2i i2i oracle\n"
              "heads = zoc ret en en_f\n"
              "\n"
              "[weights]\n"
              "ratios = 1\n"
              "omega = 2\n"
              "\n"
              "[finetune]\n"
              "lr = 0.001\n"
              "epochs = 3\n";
    }
    const auto run_cli = [&](const std::string& out, int threads) {
        std::ostringstream cmd;
        cmd << '"' << g_cli_path << '"' << " run -c " << cfg_path << " -o " << (dir / out)
            << " -t " << threads << " -s 5 -q";
        return std::system(cmd.str().c_str());
    };
    if (run_cli("out1", 1) != 0 || run_cli("out2", 4) != 0) {
        detail = "CLI run failed";
        return false;
    }
    for (const char* name : {"results.csv", "summary.csv", "manifest.txt"}) {
        if (read_bytes(dir / "out1" / name) != read_bytes(dir / "out2" / name)) {
            detail = std::string(name) + " differs across thread counts";
            return false;
        }
        if (read_bytes(dir / "out1" / name).empty()) {
            detail = std::string(name) + " is empty";
            return false;
        }
    }

    rng::Substream stream(2026, "acceptance-store");
    EmbeddingStore store(5);
    for (int i = 0; i < 7; ++i) {
        std::vector<double> v(5);
        for (double& x : v) x = stream.normal();
        store.add(UnitVector::normalize(v), static_cast<ClassId>(1 + i % 3));
    }
    const fs::path p1 = dir / "store1.raeb", p2 = dir / "store2.raeb";
    write_store(p1, store);
    write_store(p2, read_store(p1));
    const std::string bytes = read_bytes(p1);
    if (bytes != read_bytes(p2)) {
        detail = "write-read-write is not byte identical";
        return false;
    }

    const fs::path bad = dir / "bad.raeb";
    write_bytes(bad, bytes.substr(0, bytes.size() - 1));
    if (!throws_exactly<TruncatedFileError>([&] { read_store(bad); })) {
        detail = "truncation not detected";
        return false;
    }
    std::string magic = bytes;
    magic[0] = 'X';
    write_bytes(bad, magic);
    if (!throws_exactly<BadMagicError>([&] { read_store(bad); })) {
        detail = "bad magic not detected";
        return false;
    }
    std::string version = bytes;
    version[4] = 2;
    write_bytes(bad, version);
    if (!throws_exactly<UnsupportedVersionError>([&] { read_store(bad); })) {
        detail = "unsupported version not detected";
        return false;
    }
    write_bytes(bad, bytes + '\0');
    if (!throws_exactly<TrailingBytesError>([&] { read_store(bad); })) {
        detail = "trailing bytes not detected";
        return false;
    }

    fs::remove_all(dir);
    detail = "CLI byte-identical at 1 and 4 threads, container checks pass";
    return true;
}

struct Criterion {
    int id;
    const char* label;
    double budget_s;  // 0 means no stated wall-clock budget
    bool (*fn)(std::string&);
};

const Criterion kCriteria[] = {
    {1, "two-point prototype risk", 1.0, prototype_risk_exact},
    {2, "loss gradient norm bound + finite differences", 30.0, gradient_norm_bound},
    {3, "one-hot value matrix fixture", 0.0, value_matrix_fixture},
    {4, "retrieval shift bounds across 120 worlds", 300.0, retrieval_shift_bounds},
    {5, "one-shot head accuracy floor", 0.0, prototype_head_accuracy},
    {6, "ensemble risk bound coverage + rhs mode split", 0.0, ensemble_risk_coverage},
    {7, "zero-one ensemble bound sweep + corollary", 0.0, zero_one_bound_sweep},
    {8, "cache-mean concentration coverage", 0.0, cache_mean_concentration},
    {9, "joint-event risk identities", 0.0, event_risk_identities},
    {10, "retrieval-mode accuracy ordering", 600.0, mode_accuracy_ordering},
    {11, "fine-tuning gradient + risk descent", 0.0, finetune_descent},
    {12, "determinism, round trip, corruption errors", 0.0, determinism_and_format},
};

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::fprintf(stderr, "usage: %s <ragadapt-cli-path>\n", argv[0]);
        return 2;
    }
    g_cli_path = argv[1];

    int failed = 0;
    for (const auto& criterion : kCriteria) {
        std::string detail;
        const auto start = std::chrono::steady_clock::now();
        bool ok = false;
        try {
            ok = criterion.fn(detail);
        } catch (const std::exception& e) {
            detail = std::string("exception: ") + e.what();
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (ok && criterion.budget_s > 0.0 && elapsed > criterion.budget_s) {
            ok = false;
            detail += fmt(" [over %.0f s budget]", criterion.budget_s);
        }
        if (!ok) ++failed;
        std::printf("[%s] %02d %-48s %7.2f s%s%s\n", ok ? "PASS" : "FAIL", criterion.id,
                    criterion.label, elapsed, detail.empty() ? "" : "  -- ", detail.c_str());
    }
    std::printf("acceptance: %d/12 criteria passed\n", 12 - failed);
    return failed == 0 ? 0 : 1;
}
