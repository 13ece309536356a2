#include "ragadapt/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "ragadapt/math_util.hpp"
#include "ragadapt/retrieval.hpp"

namespace ragadapt {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return "";
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

double parse_double(const std::string& value, int line) {
    char* end = nullptr;
    const double x = std::strtod(value.c_str(), &end);
    if (end == value.c_str() || *end != '\0')
        throw ConfigError("expected a number, got '" + value + "'", line);
    return x;
}

std::size_t parse_size(const std::string& value, int line) {
    const double x = parse_double(value, line);
    if (x < 0 || x != static_cast<double>(static_cast<std::size_t>(x)))
        throw ConfigError("expected a non-negative integer, got '" + value + "'", line);
    return static_cast<std::size_t>(x);
}

std::uint64_t parse_u64(const std::string& value, int line) {
    try {
        std::size_t pos = 0;
        const std::uint64_t x = std::stoull(value, &pos);
        if (pos != value.size()) throw std::invalid_argument(value);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("expected an unsigned integer, got '" + value + "'", line);
    }
}

bool parse_bool(const std::string& value, int line) {
    if (value == "1" || value == "true") return true;
    if (value == "0" || value == "false") return false;
    throw ConfigError("expected 0/1/true/false, got '" + value + "'", line);
}

std::vector<std::string> split_list(const std::string& value) {
    std::istringstream is(value);
    std::vector<std::string> out;
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}

std::vector<std::size_t> parse_size_list(const std::string& value, int line) {
    std::vector<std::size_t> out;
    for (const auto& tok : split_list(value)) out.push_back(parse_size(tok, line));
    if (out.empty()) throw ConfigError("expected a non-empty list", line);
    return out;
}

TauMode parse_tau_mode(const std::string& value, int line) {
    if (value == "mirror") return TauMode::Mirror;
    if (value == "perturbed") return TauMode::Perturbed;
    if (value == "adversarial") return TauMode::AdversarialCluster;
    throw ConfigError("unknown tau_mode '" + value + "' (mirror|perturbed|adversarial)", line);
}

RetrievalMode parse_mode(const std::string& value, int line) {
    if (value == "t2i") return RetrievalMode::T2I;
    if (value == "i2i") return RetrievalMode::I2I;
    if (value == "oracle") return RetrievalMode::OracleId;
    throw ConfigError("unknown retrieval mode '" + value + "' (t2i|i2i|oracle)", line);
}

ExperimentHead parse_head(const std::string& value, int line) {
    if (value == "zoc") return ExperimentHead::ZOC;
    if (value == "ret") return ExperimentHead::RET;
    if (value == "en") return ExperimentHead::EN;
    if (value == "en_f") return ExperimentHead::EN_F;
    throw ConfigError("unknown head '" + value + "' (zoc|ret|en|en_f)", line);
}

// First-error-wins parallel loop with a shared work counter; results must be
// written to pre-sized slots so scheduling cannot reorder anything.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, n));
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::mutex error_mutex;
    std::exception_ptr error;
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= n) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

void atomic_write(const std::filesystem::path& path, const std::string& content) {
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw IoError("cannot open " + tmp.string() + " for writing");
        os.write(content.data(), static_cast<std::streamsize>(content.size()));
        os.close();
        if (!os) throw IoError("write failed for " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Cache build_mode_cache(const World& world, RetrievalMode mode, std::size_t k, double omega,
                       std::size_t seeds_per_class, std::uint64_t trial_seed) {
    const std::size_t classes = world.classes();
    switch (mode) {
        case RetrievalMode::T2I:
            return build_cache(world.database(), QuerySet::t2i(world.text()), k, omega);
        case RetrievalMode::I2I: {
            std::vector<std::vector<UnitVector>> seeds(classes);
            for (std::size_t c = 0; c < classes; ++c) {
                rng::Substream stream(trial_seed, "i2i-seeds", c);
                for (std::size_t j = 0; j < seeds_per_class; ++j)
                    seeds[c].push_back(sample_class_point(world.prototypes().unit(c),
                                                          world.config().kappa, 0.0, stream));
            }
            return build_cache(world.database(), QuerySet::i2i(std::move(seeds)), k, omega);
        }
        case RetrievalMode::OracleId: {
            Cache cache(world.dim(), classes, k, omega, true);
            for (std::size_t c = 0; c < classes; ++c) {
                const auto draws =
                    oracle_retrieve(world, world.prototypes().unit(c), k,
                                    rng::derive_seed(trial_seed, "oracle-arm", c));
                for (std::size_t i = 0; i < k; ++i) {
                    auto col = cache.shot(static_cast<ClassId>(c + 1), i);
                    std::copy(draws[i].span().begin(), draws[i].span().end(), col.begin());
                }
            }
            return cache;
        }
    }
    throw ConfigError("build_mode_cache: unknown mode");
}

struct HeadScore {
    double accuracy;
    double ce_risk;
};

template <typename LogitsFn>
HeadScore evaluate_head(LogitsFn&& logits_of, std::span<const LabeledSample> test) {
    std::size_t correct = 0;
    std::vector<double> losses(test.size());
    for (std::size_t i = 0; i < test.size(); ++i) {
        const LogitVector logits = logits_of(test[i].z);
        if (predict(logits) == test[i].y) ++correct;
        losses[i] = cross_entropy(logits.scores, test[i].y);
    }
    return {static_cast<double>(correct) / static_cast<double>(test.size()),
            pairwise_mean(losses)};
}

std::vector<ResultRow> run_trial(const ExperimentConfig& cfg, std::size_t trial) {
    const std::uint64_t trial_seed = rng::derive_seed(cfg.master_seed, "trial", trial);
    WorldConfig wc = cfg.world;
    wc.master_seed = rng::derive_seed(trial_seed, "world");
    const World world = make_world(wc);
    const auto test = sample_target_set(world, cfg.test_n, rng::derive_seed(trial_seed, "test"));

    const bool wants_finetune =
        std::find(cfg.heads.begin(), cfg.heads.end(), ExperimentHead::EN_F) != cfg.heads.end();
    std::vector<LabeledSample> train;
    if (wants_finetune)
        train = sample_target_set(world, cfg.train_n, rng::derive_seed(trial_seed, "train"));

    std::vector<ResultRow> rows;
    for (const std::size_t k : cfg.shots) {
        for (const RetrievalMode mode : cfg.modes) {
            const Cache cache =
                build_mode_cache(world, mode, k, cfg.omega, cfg.seeds_per_class, trial_seed);
            for (const ExperimentHead head : cfg.heads) {
                auto emit = [&](double alpha, double gamma, const HeadScore& score) {
                    rows.push_back({trial, k, mode, head, alpha, gamma, cfg.omega,
                                    score.accuracy, score.ce_risk});
                };
                switch (head) {
                    case ExperimentHead::ZOC:
                        emit(1.0, 0.0, evaluate_head(
                                           [&](const UnitVector& z) {
                                               return zoc_logits(world.text(), z);
                                           },
                                           test));
                        break;
                    case ExperimentHead::RET:
                        emit(0.0, 1.0, evaluate_head(
                                           [&](const UnitVector& z) {
                                               return ret_logits(cache, z);
                                           },
                                           test));
                        break;
                    case ExperimentHead::EN:
                        for (const WeightPoint& w : cfg.weights) {
                            const EnsembleWeights ew{w.alpha, 0.0, w.gamma};
                            emit(w.alpha, w.gamma,
                                 evaluate_head(
                                     [&](const UnitVector& z) {
                                         return ensemble_logits(ew, zoc_logits(world.text(), z),
                                                                ret_logits(cache, z));
                                     },
                                     test));
                        }
                        break;
                    case ExperimentHead::EN_F:
                        for (const WeightPoint& w : cfg.weights) {
                            const EnsembleWeights ew{w.alpha, 0.0, w.gamma};
                            const Cache tuned =
                                finetune_cache(cache, world.text(), ew, train, cfg.finetune);
                            emit(w.alpha, w.gamma,
                                 evaluate_head(
                                     [&](const UnitVector& z) {
                                         return ensemble_logits(ew, zoc_logits(world.text(), z),
                                                                ret_logits(tuned, z));
                                     },
                                     test));
                        }
                        break;
                }
            }
        }
    }
    return rows;
}

std::string manifest_text(const ExperimentConfig& cfg, const char* command, std::size_t rows) {
    std::ostringstream os;
    os << "RAGADAPT-MANIFEST 1\n";
    os << "command = " << command << "\n";
    os << "world.classes = " << cfg.world.classes << "\n";
    os << "world.dim = " << cfg.world.dim << "\n";
    os << "world.kappa = " << format_g17(cfg.world.kappa) << "\n";
    os << "world.rho_c = " << format_g17(cfg.world.rho_c) << "\n";
    os << "world.nu_target = " << format_g17(cfg.world.nu_target) << "\n";
    os << "world.tau_mode = "
       << (cfg.world.tau_mode == TauMode::Mirror      ? "mirror"
           : cfg.world.tau_mode == TauMode::Perturbed ? "perturbed"
                                                      : "adversarial")
       << "\n";
    os << "world.tau_scale = " << format_g17(cfg.world.tau_scale) << "\n";
    os << "world.adversarial_fraction = " << format_g17(cfg.world.adversarial_fraction) << "\n";
    os << "world.clusters_per_class = " << cfg.world.clusters_per_class << "\n";
    os << "world.db_per_cluster = " << cfg.world.db_per_cluster << "\n";
    os << "run.master_seed = " << cfg.master_seed << "\n";
    os << "run.trials = " << cfg.trials << "\n";
    os << "run.test_n = " << cfg.test_n << "\n";
    os << "run.train_n = " << cfg.train_n << "\n";
    os << "run.seeds_per_class = " << cfg.seeds_per_class << "\n";
    os << "run.omega = " << format_g17(cfg.omega) << "\n";
    os << "run.shots =";
    for (const auto k : cfg.shots) os << " " << k;
    os << "\nrun.modes =";
    for (const auto m : cfg.modes) os << " " << mode_name(m);
    os << "\nrun.heads =";
    for (const auto h : cfg.heads) os << " " << head_name(h);
    os << "\nweights =";
    for (const auto& w : cfg.weights)
        os << " " << format_g17(w.alpha) << ":" << format_g17(w.gamma);
    os << "\nfinetune.lr = " << format_g17(cfg.finetune.lr) << "\n";
    os << "finetune.epochs = " << cfg.finetune.epochs << "\n";
    os << "finetune.weight_decay = " << format_g17(cfg.finetune.weight_decay) << "\n";
    os << "finetune.renormalize = " << (cfg.finetune.renormalize ? 1 : 0) << "\n";
    os << "verify.worlds = " << cfg.verify.worlds << "\n";
    os << "verify.samples = " << cfg.verify.samples << "\n";
    os << "verify.uni_trials = " << cfg.verify.uni_trials << "\n";
    os << "verify.uni_k =";
    for (const auto k : cfg.verify.uni_k) os << " " << k;
    os << "\nverify.uni_delta = " << format_g17(cfg.verify.uni_delta) << "\n";
    os << "verify.uni_alpha = " << format_g17(cfg.verify.uni_alpha) << "\n";
    os << "verify.uni_gamma = " << format_g17(cfg.verify.uni_gamma) << "\n";
    os << "verify.ensemble_k = " << cfg.verify.ensemble_k << "\n";
    os << "verify.bernstein_trials = " << cfg.verify.bernstein_trials << "\n";
    os << "verify.bernstein_k = " << cfg.verify.bernstein_k << "\n";
    os << "verify.bernstein_delta = " << format_g17(cfg.verify.bernstein_delta) << "\n";
    os << "verify.lipschitz_trials = " << cfg.verify.lipschitz_trials << "\n";
    os << "verify.lipschitz_classes =";
    for (const auto c : cfg.verify.lipschitz_classes) os << " " << c;
    os << "\nrows = " << rows << "\n";
    return os.str();
}

}  // namespace

const char* head_name(ExperimentHead h) {
    switch (h) {
        case ExperimentHead::ZOC: return "zoc";
        case ExperimentHead::RET: return "ret";
        case ExperimentHead::EN: return "en";
        case ExperimentHead::EN_F: return "en_f";
    }
    return "?";
}

const char* mode_name(RetrievalMode m) {
    switch (m) {
        case RetrievalMode::T2I: return "t2i";
        case RetrievalMode::I2I: return "i2i";
        case RetrievalMode::OracleId: return "oracle";
    }
    return "?";
}

void ExperimentConfig::validate() const {
    world.validate();
    if (shots.empty()) throw ConfigError("run: shots list must be non-empty");
    for (const auto k : shots) {
        if (k < 1) throw ConfigError("run: every shot count must be >= 1");
        if (k > world.db_per_cluster)
            throw ConfigError("run: shot count " + std::to_string(k) +
                              " exceeds db_per_cluster " +
                              std::to_string(world.db_per_cluster));
    }
    if (trials < 1) throw ConfigError("run: trials must be >= 1");
    if (test_n < 1) throw ConfigError("run: test_n must be >= 1");
    if (seeds_per_class < 1) throw ConfigError("run: seeds_per_class must be >= 1");
    if (modes.empty()) throw ConfigError("run: modes list must be non-empty");
    if (heads.empty()) throw ConfigError("run: heads list must be non-empty");
    if (!(omega > 0.0)) throw ConfigError("run: omega must be positive");
    if (weights.empty()) throw ConfigError("weights: at least one (alpha, gamma) point");
    for (const auto& w : weights)
        if (w.alpha < 0.0 || w.alpha > 1.0 || w.gamma < 0.0 || w.gamma > 1.0)
            throw ConfigError("weights: alpha and gamma must lie in [0, 1]");
    const bool wants_finetune =
        std::find(heads.begin(), heads.end(), ExperimentHead::EN_F) != heads.end();
    if (wants_finetune && train_n < 1)
        throw ConfigError("finetune: train_n must be >= 1 when the en_f head is enabled");
    if (finetune.lr < 0.0) throw ConfigError("finetune: lr must be >= 0");
    if (verify.worlds < 1) throw ConfigError("verify: worlds must be >= 1");
    if (verify.samples < 1) throw ConfigError("verify: samples must be >= 1");
    if (verify.uni_k.empty()) throw ConfigError("verify: uni_k list must be non-empty");
    if (!(verify.uni_delta > 0.0 && verify.uni_delta < 1.0))
        throw ConfigError("verify: uni_delta must be in (0, 1)");
    if (!(verify.bernstein_delta > 0.0 && verify.bernstein_delta < 1.0))
        throw ConfigError("verify: bernstein_delta must be in (0, 1)");
    if (verify.uni_alpha < 0.0 || verify.uni_gamma < 0.0 ||
        verify.uni_alpha + verify.uni_gamma > 1.0 + 1e-12)
        throw ConfigError("verify: uni_alpha/uni_gamma must be >= 0 and sum to <= 1");
}

ExperimentConfig parse_config(std::istream& is) {
    ExperimentConfig cfg;
    std::string line, section;
    int line_no = 0;
    bool ratios_given = false, point_given = false;
    WeightPoint explicit_point;

    while (std::getline(is, line)) {
        ++line_no;
        const std::string text = trim(line);
        if (text.empty() || text[0] == '#') continue;
        if (text.front() == '[') {
            if (text.back() != ']') throw ConfigError("unterminated section header", line_no);
            section = text.substr(1, text.size() - 2);
            if (section != "world" && section != "run" && section != "weights" &&
                section != "finetune" && section != "verify")
                throw ConfigError("unknown section [" + section + "]", line_no);
            continue;
        }
        const auto eq = text.find('=');
        if (eq == std::string::npos) throw ConfigError("expected 'key = value'", line_no);
        const std::string key = trim(text.substr(0, eq));
        const std::string value = trim(text.substr(eq + 1));
        if (key.empty() || value.empty()) throw ConfigError("expected 'key = value'", line_no);
        if (section.empty()) throw ConfigError("key '" + key + "' before any section", line_no);

        if (section == "world") {
            if (key == "classes") cfg.world.classes = parse_size(value, line_no);
            else if (key == "dim") cfg.world.dim = parse_size(value, line_no);
            else if (key == "kappa") cfg.world.kappa = parse_double(value, line_no);
            else if (key == "rho_c") cfg.world.rho_c = parse_double(value, line_no);
            else if (key == "nu_target") cfg.world.nu_target = parse_double(value, line_no);
            else if (key == "tau_mode") cfg.world.tau_mode = parse_tau_mode(value, line_no);
            else if (key == "tau_scale") cfg.world.tau_scale = parse_double(value, line_no);
            else if (key == "adversarial_fraction")
                cfg.world.adversarial_fraction = parse_double(value, line_no);
            else if (key == "clusters_per_class")
                cfg.world.clusters_per_class = parse_size(value, line_no);
            else if (key == "db_per_cluster") cfg.world.db_per_cluster = parse_size(value, line_no);
            else throw ConfigError("unknown key '" + key + "' in [world]", line_no);
        } else if (section == "run") {
            if (key == "trials") cfg.trials = parse_size(value, line_no);
            else if (key == "test_n") cfg.test_n = parse_size(value, line_no);
            else if (key == "train_n") cfg.train_n = parse_size(value, line_no);
            else if (key == "shots") cfg.shots = parse_size_list(value, line_no);
            else if (key == "seeds_per_class") cfg.seeds_per_class = parse_size(value, line_no);
            else if (key == "master_seed") cfg.master_seed = parse_u64(value, line_no);
            else if (key == "omega") cfg.omega = parse_double(value, line_no);
            else if (key == "modes") {
                cfg.modes.clear();
                for (const auto& tok : split_list(value)) cfg.modes.push_back(parse_mode(tok, line_no));
            } else if (key == "heads") {
                cfg.heads.clear();
                for (const auto& tok : split_list(value)) cfg.heads.push_back(parse_head(tok, line_no));
            } else throw ConfigError("unknown key '" + key + "' in [run]", line_no);
        } else if (section == "weights") {
            if (key == "ratios") {
                // gamma : alpha ratios r mapped to (1/(1+r), r/(1+r)) so both
                // weights stay in [0,1]
                ratios_given = true;
                cfg.weights.clear();
                for (const auto& tok : split_list(value)) {
                    const double r = parse_double(tok, line_no);
                    if (!(r > 0.0)) throw ConfigError("ratios must be positive", line_no);
                    cfg.weights.push_back({1.0 / (1.0 + r), r / (1.0 + r)});
                }
            } else if (key == "alpha") {
                point_given = true;
                explicit_point.alpha = parse_double(value, line_no);
            } else if (key == "gamma") {
                point_given = true;
                explicit_point.gamma = parse_double(value, line_no);
            } else if (key == "omega") {
                cfg.omega = parse_double(value, line_no);
            } else throw ConfigError("unknown key '" + key + "' in [weights]", line_no);
            if (ratios_given && point_given)
                throw ConfigError("give either 'ratios' or an explicit alpha/gamma point, not both",
                                  line_no);
        } else if (section == "finetune") {
            if (key == "lr") cfg.finetune.lr = parse_double(value, line_no);
            else if (key == "epochs") cfg.finetune.epochs = parse_size(value, line_no);
            else if (key == "weight_decay") cfg.finetune.weight_decay = parse_double(value, line_no);
            else if (key == "renormalize") cfg.finetune.renormalize = parse_bool(value, line_no);
            else throw ConfigError("unknown key '" + key + "' in [finetune]", line_no);
        } else {  // verify
            if (key == "worlds") cfg.verify.worlds = parse_size(value, line_no);
            else if (key == "samples") cfg.verify.samples = parse_size(value, line_no);
            else if (key == "uni_trials") cfg.verify.uni_trials = parse_size(value, line_no);
            else if (key == "uni_k") cfg.verify.uni_k = parse_size_list(value, line_no);
            else if (key == "uni_delta") cfg.verify.uni_delta = parse_double(value, line_no);
            else if (key == "uni_alpha") cfg.verify.uni_alpha = parse_double(value, line_no);
            else if (key == "uni_gamma") cfg.verify.uni_gamma = parse_double(value, line_no);
            else if (key == "ensemble_k") cfg.verify.ensemble_k = parse_size(value, line_no);
            else if (key == "bernstein_trials")
                cfg.verify.bernstein_trials = parse_size(value, line_no);
            else if (key == "bernstein_k") cfg.verify.bernstein_k = parse_size(value, line_no);
            else if (key == "bernstein_delta")
                cfg.verify.bernstein_delta = parse_double(value, line_no);
            else if (key == "lipschitz_trials")
                cfg.verify.lipschitz_trials = parse_size(value, line_no);
            else if (key == "lipschitz_classes")
                cfg.verify.lipschitz_classes = parse_size_list(value, line_no);
            else throw ConfigError("unknown key '" + key + "' in [verify]", line_no);
        }
    }
    if (point_given && !ratios_given) cfg.weights = {explicit_point};
    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read config " + path.string());
    return parse_config(is);
}

std::vector<ResultRow> run_rows(const ExperimentConfig& config, std::size_t threads) {
    std::vector<std::vector<ResultRow>> per_trial(config.trials);
    parallel_for(config.trials, threads,
                 [&](std::size_t t) { per_trial[t] = run_trial(config, t); });
    std::vector<ResultRow> rows;
    for (auto& block : per_trial)
        rows.insert(rows.end(), block.begin(), block.end());
    return rows;
}

std::string results_csv_text(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    os << "trial,k,retrieval_mode,head,alpha,gamma,omega,accuracy,ce_risk\n";
    for (const auto& r : rows)
        os << r.trial << "," << r.k << "," << mode_name(r.mode) << "," << head_name(r.head) << ","
           << format_g17(r.alpha) << "," << format_g17(r.gamma) << "," << format_g17(r.omega)
           << "," << format_g17(r.accuracy) << "," << format_g17(r.ce_risk) << "\n";
    return os.str();
}

namespace {

struct GroupKey {
    std::size_t k;
    RetrievalMode mode;
    ExperimentHead head;
    double alpha, gamma, omega;

    bool operator==(const GroupKey& o) const {
        return k == o.k && mode == o.mode && head == o.head && alpha == o.alpha &&
               gamma == o.gamma && omega == o.omega;
    }
};

}  // namespace

std::string summary_csv_text(const std::vector<ResultRow>& rows) {
    // groups in first-appearance order (trial-major input keeps this equal to
    // the configured sweep order)
    std::vector<GroupKey> keys;
    std::vector<std::vector<double>> acc, ce;
    for (const auto& r : rows) {
        const GroupKey key{r.k, r.mode, r.head, r.alpha, r.gamma, r.omega};
        std::size_t g = keys.size();
        for (std::size_t i = 0; i < keys.size(); ++i)
            if (keys[i] == key) {
                g = i;
                break;
            }
        if (g == keys.size()) {
            keys.push_back(key);
            acc.emplace_back();
            ce.emplace_back();
        }
        acc[g].push_back(r.accuracy);
        ce[g].push_back(r.ce_risk);
    }

    auto mean_std = [](const std::vector<double>& xs) {
        const double mean = pairwise_mean(xs);
        if (xs.size() < 2) return std::pair<double, double>{mean, 0.0};
        std::vector<double> sq(xs.size());
        for (std::size_t i = 0; i < xs.size(); ++i) sq[i] = (xs[i] - mean) * (xs[i] - mean);
        return std::pair<double, double>{
            mean, std::sqrt(pairwise_sum(sq) / static_cast<double>(xs.size() - 1))};
    };

    std::ostringstream os;
    os << "k,retrieval_mode,head,alpha,gamma,omega,trials,mean_accuracy,std_accuracy,"
          "mean_ce_risk,std_ce_risk\n";
    for (std::size_t g = 0; g < keys.size(); ++g) {
        const auto [acc_mean, acc_std] = mean_std(acc[g]);
        const auto [ce_mean, ce_std] = mean_std(ce[g]);
        os << keys[g].k << "," << mode_name(keys[g].mode) << "," << head_name(keys[g].head) << ","
           << format_g17(keys[g].alpha) << "," << format_g17(keys[g].gamma) << ","
           << format_g17(keys[g].omega) << "," << acc[g].size() << "," << format_g17(acc_mean)
           << "," << format_g17(acc_std) << "," << format_g17(ce_mean) << ","
           << format_g17(ce_std) << "\n";
    }
    return os.str();
}

std::vector<ResultRow> read_results_csv(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read " + path.string());
    std::string line;
    if (!std::getline(is, line) ||
        line != "trial,k,retrieval_mode,head,alpha,gamma,omega,accuracy,ce_risk")
        throw ConfigError("results csv: bad or missing header", 1);
    std::vector<ResultRow> rows;
    int line_no = 1;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::istringstream ls(line);
        std::string field;
        while (std::getline(ls, field, ',')) fields.push_back(field);
        if (fields.size() != 9) throw ConfigError("results csv: expected 9 fields", line_no);
        ResultRow r;
        r.trial = parse_size(fields[0], line_no);
        r.k = parse_size(fields[1], line_no);
        r.mode = parse_mode(fields[2], line_no);
        r.head = parse_head(fields[3], line_no);
        r.alpha = parse_double(fields[4], line_no);
        r.gamma = parse_double(fields[5], line_no);
        r.omega = parse_double(fields[6], line_no);
        r.accuracy = parse_double(fields[7], line_no);
        r.ce_risk = parse_double(fields[8], line_no);
        rows.push_back(r);
    }
    return rows;
}

void run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                    std::size_t threads, std::ostream* log) {
    std::filesystem::create_directories(out_dir);
    if (log)
        *log << "run: " << config.trials << " trials, " << config.shots.size() << " shot counts, "
             << config.modes.size() << " modes, " << config.heads.size() << " heads\n";
    const auto rows = run_rows(config, threads);
    atomic_write(out_dir / "results.csv", results_csv_text(rows));
    atomic_write(out_dir / "summary.csv", summary_csv_text(rows));
    atomic_write(out_dir / "manifest.txt", manifest_text(config, "run", rows.size()));
    if (log) *log << "wrote " << rows.size() << " result rows to " << out_dir.string() << "\n";
}

void rebuild_summary(const std::filesystem::path& out_dir) {
    const auto rows = read_results_csv(out_dir / "results.csv");
    atomic_write(out_dir / "summary.csv", summary_csv_text(rows));
}

namespace {

struct WorldReport {
    TheoryReport report;
    std::uint64_t world_seed = 0;
};

WorldReport verify_world(const ExperimentConfig& cfg, std::size_t w) {
    const auto& v = cfg.verify;
    WorldConfig wc = cfg.world;
    wc.master_seed = rng::derive_seed(cfg.master_seed, "verify-world", w);
    const World world = make_world(wc);
    const auto samples =
        sample_target_set(world, v.samples, rng::derive_seed(cfg.master_seed, "verify-samples", w));

    WorldReport out;
    out.world_seed = wc.master_seed;
    TheoryReport& rep = out.report;
    rep.stats = measure_world_stats(world, samples);
    rep.kappa_used = wc.kappa;
    rep.xi_i2i = measure_retrieval_shift(world, RetrievalMode::I2I).xi_max;
    rep.xi_t2i = measure_retrieval_shift(world, RetrievalMode::T2I).xi_max;

    auto& checks = rep.checks;
    checks.push_back(check_lemma_soln_good(world, samples));
    const TopAccResult top_acc = check_lemma_top_acc(world, samples);
    checks.push_back(top_acc.gap);
    checks.push_back(top_acc.accuracy);

    const std::string shift_context =
        "kappa=" + format_g17(wc.kappa) + "; nu=" + format_g17(world.measured_nu()) +
        "; xi_i2i=" + format_g17(rep.xi_i2i) + "; xi_t2i=" + format_g17(rep.xi_t2i);
    checks.push_back(make_bound_check("lemma_uni_i2i", rep.xi_i2i,
                                      2.0 * wc.kappa * wc.kappa, true, shift_context));
    // The xi_t2i lower bound needs every class's text query to land in a
    // wrong-class cluster, which only the fully adversarial mode guarantees.
    const bool adversarial_world =
        wc.tau_mode == TauMode::AdversarialCluster && wc.adversarial_fraction >= 1.0;
    checks.push_back(make_bound_check("lemma_uni_t2i_lower",
                                      world.measured_nu() - 2.0 * wc.kappa, rep.xi_t2i,
                                      adversarial_world, shift_context));

    for (const RetrievalMode mode : {RetrievalMode::I2I, RetrievalMode::T2I})
        for (const std::size_t k : v.uni_k)
            checks.push_back(check_theorem_uni(
                world, samples, v.uni_alpha, v.uni_gamma, k, v.uni_delta, mode, v.uni_trials,
                rng::derive_seed(wc.master_seed, mode == RetrievalMode::I2I ? "uni-i2i" : "uni-t2i",
                                 k)));

    const EnsembleResult ens = check_theorem_ensemble(
        world, samples, v.ensemble_k, rng::derive_seed(wc.master_seed, "ensemble"));
    rep.events = ens.events;
    checks.push_back(ens.main);
    checks.push_back(ens.corollary);

    for (auto& check : checks)
        check.context += "; world=" + std::to_string(w) + "; world_seed=" +
                         std::to_string(wc.master_seed);
    return out;
}

}  // namespace

bool verify_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                       std::size_t threads, std::ostream* log) {
    std::filesystem::create_directories(out_dir);
    const auto& v = config.verify;
    if (log) *log << "verify: " << v.worlds << " worlds, " << v.samples << " samples each\n";

    std::vector<WorldReport> reports(v.worlds);
    parallel_for(v.worlds, threads,
                 [&](std::size_t w) { reports[w] = verify_world(config, w); });

    std::vector<BoundCheck> sweep_checks;
    sweep_checks.push_back(check_lipschitz(v.lipschitz_classes, v.lipschitz_trials,
                                           rng::derive_seed(config.master_seed, "lipschitz")));
    {
        WorldConfig wc = config.world;
        wc.master_seed = rng::derive_seed(config.master_seed, "verify-world", 0);
        const World world = make_world(wc);
        sweep_checks.push_back(check_bernstein(world, v.bernstein_k, v.bernstein_delta,
                                               v.bernstein_trials,
                                               rng::derive_seed(config.master_seed, "bernstein")));
    }

    std::ostringstream csv, txt;
    csv << "name,lhs,rhs,satisfied,applicable,context\n";
    bool all_ok = true;
    std::vector<std::string> warnings;
    auto consume = [&](const BoundCheck& check) {
        csv << check.name << "," << format_g17(check.lhs) << "," << format_g17(check.rhs) << ","
            << (check.satisfied ? 1 : 0) << "," << (check.applicable ? 1 : 0) << ","
            << check.context << "\n";
        if (!check.applicable)
            warnings.push_back("check '" + check.name + "' not applicable (" + check.context + ")");
        else if (!check.satisfied)
            all_ok = false;
    };

    for (std::size_t w = 0; w < reports.size(); ++w) {
        txt << "== world " << w << " ==\n";
        write_report_text(txt, reports[w].report);
        txt << "\n";
        for (const auto& check : reports[w].report.checks) consume(check);
    }
    txt << "== sweep-level checks ==\n";
    TheoryReport sweep;
    sweep.checks = sweep_checks;
    for (const auto& check : sweep_checks) consume(check);
    for (const auto& check : sweep_checks) {
        const char* verdict = !check.applicable ? "N/A " : check.satisfied ? "PASS" : "FAIL";
        txt << "  [" << verdict << "] " << check.name << ": lhs " << format_g17(check.lhs)
            << " vs rhs " << format_g17(check.rhs) << "\n         " << check.context << "\n";
    }

    atomic_write(out_dir / "theory_report.csv", csv.str());
    atomic_write(out_dir / "theory_report.txt", txt.str());
    atomic_write(out_dir / "manifest.txt", manifest_text(config, "verify", 0));

    if (log) {
        for (const auto& warning : warnings) *log << "warning: " << warning << "\n";
        *log << (all_ok ? "verify: all applicable checks satisfied\n"
                        : "verify: at least one applicable check FAILED\n");
    }
    return all_ok;
}

}  // namespace ragadapt
