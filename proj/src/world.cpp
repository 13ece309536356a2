#include "ragadapt/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "ragadapt/math_util.hpp"
#include "ragadapt/store_io.hpp"

namespace ragadapt {

namespace {

// Pairwise inner product of the blended frame e_i - (beta/C)*1, normalized.
// Monotone decreasing in beta on (-inf, 1]; beta = 0 gives 0, beta = 1 gives
// the regular-simplex minimum -1/(C-1).
double blend_inner(double beta, double c) {
    return beta * (beta - 2.0) / ((beta - 1.0) * (beta - 1.0) + (c - 1.0));
}

// Random rotation via modified Gram-Schmidt on a gaussian matrix,
// sign-fixed so the factorization is unique. Column-major d x d.
std::vector<double> random_rotation(std::size_t d, rng::Substream& stream) {
    std::vector<double> q(d * d);
    for (double& x : q) x = stream.normal();
    for (std::size_t j = 0; j < d; ++j) {
        double* col = q.data() + j * d;
        for (std::size_t i = 0; i < j; ++i) {
            const double* prev = q.data() + i * d;
            double proj = 0.0;
            for (std::size_t t = 0; t < d; ++t) proj += prev[t] * col[t];
            for (std::size_t t = 0; t < d; ++t) col[t] -= proj * prev[t];
        }
        double norm2 = 0.0;
        for (std::size_t t = 0; t < d; ++t) norm2 += col[t] * col[t];
        double norm = std::sqrt(norm2);
        if (norm < 1e-9) {
            // degenerate gaussian column; replace with a fresh draw and redo
            for (std::size_t t = 0; t < d; ++t) col[t] = stream.normal();
            --j;
            continue;
        }
        if (col[0] < 0.0) norm = -norm;  // sign fix
        for (std::size_t t = 0; t < d; ++t) col[t] /= norm;
    }
    return q;
}

std::vector<double> apply_rotation(const std::vector<double>& q, std::size_t d,
                                   std::span<const double> v) {
    std::vector<double> out(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) {
        const double vj = v[j];
        if (vj == 0.0) continue;
        const double* col = q.data() + j * d;
        for (std::size_t i = 0; i < d; ++i) out[i] += vj * col[i];
    }
    return out;
}

double max_pairwise_inner(const ClassAverages& m) {
    double best = -2.0;
    for (std::size_t i = 0; i < m.classes(); ++i)
        for (std::size_t j = i + 1; j < m.classes(); ++j)
            best = std::max(best, dot(m.column(i), m.column(j)));
    return best;
}

// Uniform tangent direction at `center`: gaussian projected off the axis.
std::vector<double> tangent_direction(std::span<const double> center, rng::Substream& stream) {
    const std::size_t d = center.size();
    std::vector<double> w(d);
    for (;;) {
        for (double& x : w) x = stream.normal();
        double proj = 0.0;
        for (std::size_t i = 0; i < d; ++i) proj += w[i] * center[i];
        for (std::size_t i = 0; i < d; ++i) w[i] -= proj * center[i];
        double norm2 = 0.0;
        for (double x : w) norm2 += x * x;
        if (norm2 > 1e-24) {
            const double norm = std::sqrt(norm2);
            for (double& x : w) x /= norm;
            return w;
        }
    }
}

UnitVector uniform_sphere(std::size_t d, rng::Substream& stream) {
    std::vector<double> v(d);
    for (;;) {
        for (double& x : v) x = stream.normal();
        double norm2 = 0.0;
        for (double x : v) norm2 += x * x;
        if (norm2 > 1e-24) return UnitVector::normalize(v);
    }
}

// Cosine-of-angle draw for a uniform cap sample, exact for every d >= 3.
// Density on [t_min, 1] is (1-t^2)^((d-3)/2). d >= 4 uses rejection with a
// (1-t)^m proposal (closed-form inverse CDF); when the acceptance floor is
// poor (large caps in high d) it falls back to the incomplete-beta quantile.
double sample_cap_cosine(std::size_t d, double kappa, rng::Substream& stream) {
    const double t_min = 1.0 - kappa * kappa / 2.0;
    if (d == 3) return stream.uniform(t_min, 1.0);

    const double m = (static_cast<double>(d) - 3.0) / 2.0;
    const double floor_accept = std::pow((1.0 + t_min) / 2.0, m);
    if (floor_accept >= 0.01) {
        for (int attempt = 0; attempt < 10000; ++attempt) {
            const double p = stream.uniform01();
            const double t =
                1.0 - (1.0 - t_min) * std::pow(1.0 - p, 1.0 / (m + 1.0));
            const double accept = std::pow((1.0 + t) / 2.0, m);
            if (stream.uniform01() < accept) return t;
        }
    }
    // exact quantile fallback: (1+t)/2 ~ Beta(a, a) truncated to the cap
    const double a = (static_cast<double>(d) - 1.0) / 2.0;
    const double u_min = 1.0 - kappa * kappa / 4.0;
    const double f_min = betainc(a, a, u_min);
    const double u = betainc_inv(a, a, f_min + stream.uniform01() * (1.0 - f_min));
    return 2.0 * u - 1.0;
}

const char* tau_mode_name(TauMode m) {
    switch (m) {
        case TauMode::Mirror: return "mirror";
        case TauMode::Perturbed: return "perturbed";
        case TauMode::AdversarialCluster: return "adversarial";
    }
    return "?";
}

TauMode tau_mode_from_name(const std::string& s) {
    if (s == "mirror") return TauMode::Mirror;
    if (s == "perturbed") return TauMode::Perturbed;
    if (s == "adversarial") return TauMode::AdversarialCluster;
    throw ConfigError("unknown tau_mode: " + s);
}

}  // namespace

void WorldConfig::validate() const {
    if (classes < 2) throw ConfigError("world: classes must be >= 2");
    if (dim < 2) throw ConfigError("world: dim must be >= 2");
    if (!(kappa >= 0.0) || !(4.0 * kappa < 2.0))
        throw ConfigError("world: kappa must satisfy 0 <= kappa < 0.5");
    if (!(rho_c >= 0.0) || !(rho_c < 1.0)) throw ConfigError("world: rho_c must be in [0, 1)");
    if (!(nu_target > 0.0) || !(nu_target <= 2.0))
        throw ConfigError("world: nu_target must be in (0, 2]");
    if (!(tau_scale >= 0.0)) throw ConfigError("world: tau_scale must be >= 0");
    if (!(adversarial_fraction >= 0.0) || !(adversarial_fraction <= 1.0))
        throw ConfigError("world: adversarial_fraction must be in [0, 1]");
    if (clusters_per_class < 1) throw ConfigError("world: clusters_per_class must be >= 1");
    if (db_per_cluster < 1) throw ConfigError("world: db_per_cluster must be >= 1");
}

ClassAverages make_prototypes(std::size_t classes, std::size_t dim, double nu_target,
                              std::uint64_t seed) {
    if (classes < 2 || dim < 2)
        throw ConfigError("make_prototypes: need classes >= 2 and dim >= 2");
    if (classes > dim + 1)
        throw TooManyClassesError("make_prototypes: " + std::to_string(classes) +
                                  " classes need dim >= " + std::to_string(classes - 1));
    const double c = static_cast<double>(classes);
    const double nu_max = 1.0 + 1.0 / (c - 1.0);
    if (nu_target > nu_max + 1e-12)
        throw UnreachableSeparationError("make_prototypes: nu_target " +
                                         std::to_string(nu_target) +
                                         " exceeds the simplex maximum " +
                                         std::to_string(nu_max));
    if (!(nu_target > 0.0))
        throw UnreachableSeparationError("make_prototypes: nu_target must be positive");

    const double target_inner = 1.0 - nu_target;

    // Frame vertices before rotation, as rows of length `classes`.
    std::vector<std::vector<double>> frame(classes);
    if (classes == dim + 1) {
        // The blended frame needs C dimensions; in R^d only the pure regular
        // simplex fits. Coordinates of e_i - (1/C)*1 in the Helmert basis of
        // the all-ones complement.
        if (std::fabs(nu_target - nu_max) > 1e-9)
            throw UnreachableSeparationError(
                "make_prototypes: with classes == dim + 1 only the regular simplex "
                "(nu = 1 + 1/(C-1)) is constructible");
        for (std::size_t i = 0; i < classes; ++i) {
            std::vector<double> v(dim, 0.0);
            for (std::size_t k = 1; k <= dim; ++k) {
                const double denom = std::sqrt(static_cast<double>(k) * (k + 1));
                double helmert_ik;  // entry (i, k) of the Helmert basis vector
                if (i < k) helmert_ik = 1.0 / denom;
                else if (i == k) helmert_ik = -static_cast<double>(k) / denom;
                else helmert_ik = 0.0;
                v[k - 1] = helmert_ik;
            }
            frame[i] = std::move(v);
        }
    } else {
        // Bisect the blend scalar so all pairwise inners equal 1 - nu_target.
        double beta;
        if (std::fabs(nu_target - nu_max) <= 1e-15) {
            beta = 1.0;
        } else {
            double lo = 1.0, hi = 1.0;  // blend_inner(lo) >= target >= blend_inner(hi)
            while (blend_inner(lo, c) < target_inner) lo -= std::max(1.0, -lo);
            for (int i = 0; i < 200; ++i) {
                beta = 0.5 * (lo + hi);
                const double g = blend_inner(beta, c);
                if (std::fabs(g - target_inner) <= 1e-14) break;
                if (g > target_inner) lo = beta;
                else hi = beta;
            }
            beta = 0.5 * (lo + hi);
        }
        for (std::size_t i = 0; i < classes; ++i) {
            std::vector<double> v(dim, 0.0);
            for (std::size_t j = 0; j < classes; ++j) v[j] = -beta / c;
            v[i] += 1.0;
            frame[i] = std::move(v);
        }
    }

    rng::Substream stream(seed, "prototype-rotation");
    const std::vector<double> rot = random_rotation(dim, stream);
    std::vector<UnitVector> cols;
    cols.reserve(classes);
    for (const auto& v : frame) cols.push_back(UnitVector::normalize(apply_rotation(rot, dim, v)));
    ClassAverages out = ClassAverages::from_columns(cols);

    const double achieved = max_pairwise_inner(out);
    if (std::fabs(achieved - target_inner) > 1e-9)
        throw UnreachableSeparationError("make_prototypes: separation solve failed, achieved " +
                                         std::to_string(achieved));
    return out;
}

UnitVector sample_class_point(const UnitVector& center, double kappa, double rho_c,
                              rng::Substream& stream) {
    if (!(kappa >= 0.0) || !(kappa <= 2.0))
        throw ConfigError("sample_class_point: kappa must be in [0, 2]");
    if (!(rho_c >= 0.0) || !(rho_c < 1.0))
        throw ConfigError("sample_class_point: rho_c must be in [0, 1)");
    const std::size_t d = center.dim();

    if (rho_c > 0.0 && stream.uniform01() < rho_c) return uniform_sphere(d, stream);
    if (kappa == 0.0) return UnitVector::checked(center.values(), 1e-9);
    if (kappa >= 2.0) return uniform_sphere(d, stream);

    if (d == 2) {
        const double theta_max = 2.0 * std::asin(kappa / 2.0);
        const double theta = stream.uniform(-theta_max, theta_max);
        const double ct = std::cos(theta), st = std::sin(theta);
        // the unique (up to sign) tangent on a circle
        const std::vector<double> out{ct * center[0] - st * center[1],
                                      st * center[0] + ct * center[1]};
        return UnitVector::normalize(out);
    }

    const double t = sample_cap_cosine(d, kappa, stream);
    const std::vector<double> w = tangent_direction(center.span(), stream);
    const double r = std::sqrt(std::max(0.0, 1.0 - t * t));
    std::vector<double> out(d);
    for (std::size_t i = 0; i < d; ++i) out[i] = t * center[i] + r * w[i];
    return UnitVector::normalize(out);
}

UnitVector sample_class_point(const UnitVector& center, double kappa, double rho_c,
                              std::uint64_t seed) {
    rng::Substream stream(seed, "class-point");
    return sample_class_point(center, kappa, rho_c, stream);
}

double cap_cdf_chordal(std::size_t dim, double kappa, double r) {
    if (!(kappa > 0.0)) throw ConfigError("cap_cdf_chordal: kappa must be positive");
    if (r <= 0.0) return 0.0;
    if (r >= kappa) return 1.0;
    if (dim == 2) return std::asin(r / 2.0) / std::asin(kappa / 2.0);
    const double a = (static_cast<double>(dim) - 1.0) / 2.0;
    const double u_r = 1.0 - r * r / 4.0;
    const double u_min = 1.0 - kappa * kappa / 4.0;
    const double tail = 1.0 - betainc(a, a, u_min);
    return (1.0 - betainc(a, a, u_r)) / tail;
}

std::pair<ClassAverages, double> make_text_embeddings(
    const ClassAverages& prototypes, const std::vector<RetrievalCluster>& clusters,
    const TauSpec& spec, std::uint64_t seed) {
    const std::size_t c_total = prototypes.classes();
    const std::size_t d = prototypes.dim();
    std::vector<UnitVector> cols;
    cols.reserve(c_total);
    rng::Substream stream(seed, "text");

    auto nearest_center = [&](const UnitVector& q) -> std::size_t {
        std::size_t best = 0;
        double best_sim = -2.0;
        for (std::size_t i = 0; i < clusters.size(); ++i) {
            const double sim = dot(clusters[i].center.span(), q.span());
            if (sim > best_sim) {
                best_sim = sim;
                best = i;
            }
        }
        return best;
    };

    switch (spec.mode) {
        case TauMode::Mirror:
            for (std::size_t c = 0; c < c_total; ++c) cols.push_back(prototypes.unit(c));
            break;
        case TauMode::Perturbed:
            for (std::size_t c = 0; c < c_total; ++c) {
                if (spec.scale == 0.0) {
                    cols.push_back(prototypes.unit(c));
                    continue;
                }
                const auto proto = prototypes.column(c);
                std::vector<double> v(proto.begin(), proto.end());
                std::vector<double> g(d);
                for (double& x : g) x = stream.normal();
                double proj = 0.0;
                for (std::size_t i = 0; i < d; ++i) proj += g[i] * proto[i];
                for (std::size_t i = 0; i < d; ++i) v[i] += spec.scale * (g[i] - proj * proto[i]);
                cols.push_back(UnitVector::normalize(v));
            }
            break;
        case TauMode::AdversarialCluster: {
            if (clusters.empty())
                throw ConfigError("make_text_embeddings: adversarial mode needs clusters");
            const std::size_t n_adv = std::min(
                c_total, static_cast<std::size_t>(std::llround(spec.fraction * c_total)));
            for (std::size_t c = 0; c < c_total; ++c) {
                if (c >= n_adv) {  // non-adversarial classes mirror their prototype
                    cols.push_back(prototypes.unit(c));
                    continue;
                }
                // Target the prototype cluster of another adversarial class when
                // possible (cyclic within the adversarial block), so clean
                // classes keep an unambiguous text anchor; fall back to the next
                // class when the block has a single member.
                const std::size_t target_class =
                    n_adv >= 2 ? (c + 1) % n_adv : (c + 1) % c_total;
                std::size_t target_cluster = clusters.size();
                for (std::size_t i = 0; i < clusters.size(); ++i) {
                    if (clusters[i].class_id == static_cast<ClassId>(target_class + 1)) {
                        target_cluster = i;
                        break;
                    }
                }
                if (target_cluster == clusters.size())
                    throw ConfigError("make_text_embeddings: no cluster for target class");
                const UnitVector& w = clusters[target_cluster].center;
                double jitter = 0.05;
                UnitVector t = w;
                for (int attempt = 0; attempt < 50; ++attempt) {
                    std::vector<double> v(w.values());
                    const std::vector<double> g = tangent_direction(w.span(), stream);
                    for (std::size_t i = 0; i < d; ++i) v[i] += jitter * g[i];
                    t = UnitVector::normalize(v);
                    if (nearest_center(t) == target_cluster) break;
                    jitter *= 0.5;
                    if (attempt == 49) t = w;  // exact center always wins the argmax
                }
                cols.push_back(t);
            }
            break;
        }
    }

    ClassAverages text = ClassAverages::from_columns(cols);
    double tau = -4.0;
    for (std::size_t i = 0; i < c_total; ++i)
        for (std::size_t j = 0; j < c_total; ++j) {
            if (i == j) continue;
            tau = std::max(tau, dot(text.column(j), prototypes.column(i)) -
                                    dot(text.column(i), prototypes.column(i)));
        }
    return {std::move(text), tau};
}

std::size_t World::nearest_cluster(const UnitVector& query) const {
    std::size_t best = 0;
    double best_sim = -2.0;
    for (std::size_t i = 0; i < clusters_.size(); ++i) {
        const double sim = dot(clusters_[i].center.span(), query.span());
        if (sim > best_sim) {
            best_sim = sim;
            best = i;
        }
    }
    return best;
}

World make_world(const WorldConfig& config) {
    config.validate();
    const std::uint64_t master = config.master_seed;

    ClassAverages prototypes = make_prototypes(config.classes, config.dim, config.nu_target,
                                               rng::derive_seed(master, "prototypes"));

    // Cluster table: the class prototype first, then nu-separated distractors.
    std::vector<RetrievalCluster> clusters;
    clusters.reserve(config.classes * config.clusters_per_class);
    const double max_inner = 1.0 - config.nu_target;
    for (std::size_t c = 0; c < config.classes; ++c)
        clusters.push_back({prototypes.unit(c), static_cast<ClassId>(c + 1), config.kappa});
    for (std::size_t c = 0; c < config.classes; ++c) {
        rng::Substream stream(master, "distractors", c);
        for (std::size_t extra = 1; extra < config.clusters_per_class; ++extra) {
            bool placed = false;
            for (int attempt = 0; attempt < 10000; ++attempt) {
                UnitVector cand = uniform_sphere(config.dim, stream);
                bool ok = true;
                for (const auto& cl : clusters)
                    if (dot(cl.center.span(), cand.span()) > max_inner) {
                        ok = false;
                        break;
                    }
                if (ok) {
                    clusters.push_back({std::move(cand), static_cast<ClassId>(c + 1),
                                        config.kappa});
                    placed = true;
                    break;
                }
            }
            if (!placed)
                throw UnreachableSeparationError(
                    "make_world: could not place a nu-separated distractor cluster within "
                    "10^4 rejections");
        }
    }

    EmbeddingStore database(config.dim);
    for (std::size_t i = 0; i < clusters.size(); ++i) {
        rng::Substream stream(master, "database", i);
        for (std::size_t j = 0; j < config.db_per_cluster; ++j)
            database.add(sample_class_point(clusters[i].center, clusters[i].kappa, 0.0, stream),
                         static_cast<ClassId>(i + 1));
    }

    std::vector<UnitVector> one_shot_cols;
    one_shot_cols.reserve(config.classes);
    for (std::size_t c = 0; c < config.classes; ++c) {
        rng::Substream stream(master, "oneshot", c);
        one_shot_cols.push_back(
            sample_class_point(prototypes.unit(c), config.kappa, 0.0, stream));
    }
    ClassAverages one_shot = ClassAverages::from_columns(one_shot_cols);

    TauSpec tau_spec{config.tau_mode, config.tau_scale, config.adversarial_fraction};
    auto [text, tau] = make_text_embeddings(prototypes, clusters, tau_spec,
                                            rng::derive_seed(master, "text"));

    const double nu = 1.0 - max_pairwise_inner(prototypes);
    return World(config, std::move(prototypes), std::move(text), std::move(one_shot),
                 std::move(clusters), std::move(database), nu, tau);
}

std::vector<LabeledSample> sample_target_set(const World& world, std::size_t n,
                                             std::uint64_t seed) {
    if (n < 1) throw EmptySampleSetError("sample_target_set: n must be >= 1");
    rng::Substream stream(seed, "target-set");
    const auto& cfg = world.config();
    std::vector<LabeledSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const ClassId y = static_cast<ClassId>(1 + stream.uniform_below(world.classes()));
        out.push_back(
            {sample_class_point(world.prototypes().unit(y - 1), cfg.kappa, cfg.rho_c, stream),
             y});
    }
    return out;
}

namespace {

EmbeddingStore averages_to_store(const ClassAverages& m) {
    EmbeddingStore s(m.dim());
    for (std::size_t c = 0; c < m.classes(); ++c)
        s.add(m.unit(c), static_cast<ClassId>(c + 1));
    return s;
}

ClassAverages store_to_averages(const EmbeddingStore& s) {
    std::vector<UnitVector> cols;
    cols.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) cols.push_back(s.unit(i));
    return ClassAverages(FeatureMatrix::from_columns(cols), 1e-6);
}

void put_kv(std::ostream& os, const char* key, double value) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    os << key << " = " << buf << "\n";
}

}  // namespace

void save_world(const std::filesystem::path& dir, const World& world) {
    std::filesystem::create_directories(dir);
    write_store(dir / "prototypes.raeb", averages_to_store(world.prototypes()));
    write_store(dir / "text.raeb", averages_to_store(world.text()));
    write_store(dir / "oneshot.raeb", averages_to_store(world.one_shot()));
    write_store(dir / "database.raeb", world.database());

    EmbeddingStore cluster_store(world.dim());
    for (const auto& cl : world.clusters()) cluster_store.add(cl.center, cl.class_id);
    write_store(dir / "clusters.raeb", cluster_store);

    const auto& cfg = world.config();
    std::ofstream os(dir / "manifest.txt");
    if (!os) throw IoError("cannot write manifest in " + dir.string());
    os << "RAGADAPT-WORLD 1\n";
    os << "classes = " << cfg.classes << "\n";
    os << "dim = " << cfg.dim << "\n";
    put_kv(os, "kappa", cfg.kappa);
    put_kv(os, "rho_c", cfg.rho_c);
    put_kv(os, "nu_target", cfg.nu_target);
    os << "tau_mode = " << tau_mode_name(cfg.tau_mode) << "\n";
    put_kv(os, "tau_scale", cfg.tau_scale);
    put_kv(os, "adversarial_fraction", cfg.adversarial_fraction);
    os << "clusters_per_class = " << cfg.clusters_per_class << "\n";
    os << "db_per_cluster = " << cfg.db_per_cluster << "\n";
    os << "master_seed = " << cfg.master_seed << "\n";
    put_kv(os, "measured_nu", world.measured_nu());
    put_kv(os, "measured_tau", world.measured_tau());
    os << "clusters = " << world.clusters().size() << "\n";
    for (std::size_t i = 0; i < world.clusters().size(); ++i) {
        const auto& cl = world.clusters()[i];
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", cl.kappa);
        os << "cluster " << (i + 1) << " = class " << cl.class_id << " kappa " << buf << "\n";
    }
    os.close();
    if (!os) throw IoError("manifest write failed in " + dir.string());
}

World load_world(const std::filesystem::path& dir) {
    std::ifstream is(dir / "manifest.txt");
    if (!is) throw IoError("cannot read manifest in " + dir.string());
    std::string line;
    if (!std::getline(is, line) || line != "RAGADAPT-WORLD 1")
        throw BadMagicError("world manifest: bad or missing header");

    WorldConfig cfg;
    double measured_nu = 0.0, measured_tau = 0.0;
    std::size_t n_clusters = 0;
    std::vector<std::pair<ClassId, double>> cluster_meta;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "cluster") {
            std::size_t id;
            std::string eq, cls_word, kappa_word;
            ClassId cls;
            double kp;
            ls >> id >> eq >> cls_word >> cls >> kappa_word >> kp;
            if (!ls || eq != "=" || cls_word != "class" || kappa_word != "kappa")
                throw ConfigError("world manifest: malformed cluster row: " + line);
            cluster_meta.emplace_back(cls, kp);
            continue;
        }
        std::string eq, value;
        ls >> eq;
        std::getline(ls, value);
        if (eq != "=") throw ConfigError("world manifest: malformed line: " + line);
        value.erase(0, value.find_first_not_of(' '));
        if (key == "classes") cfg.classes = std::stoull(value);
        else if (key == "dim") cfg.dim = std::stoull(value);
        else if (key == "kappa") cfg.kappa = std::stod(value);
        else if (key == "rho_c") cfg.rho_c = std::stod(value);
        else if (key == "nu_target") cfg.nu_target = std::stod(value);
        else if (key == "tau_mode") cfg.tau_mode = tau_mode_from_name(value);
        else if (key == "tau_scale") cfg.tau_scale = std::stod(value);
        else if (key == "adversarial_fraction") cfg.adversarial_fraction = std::stod(value);
        else if (key == "clusters_per_class") cfg.clusters_per_class = std::stoull(value);
        else if (key == "db_per_cluster") cfg.db_per_cluster = std::stoull(value);
        else if (key == "master_seed") cfg.master_seed = std::stoull(value);
        else if (key == "measured_nu") measured_nu = std::stod(value);
        else if (key == "measured_tau") measured_tau = std::stod(value);
        else if (key == "clusters") n_clusters = std::stoull(value);
        else throw ConfigError("world manifest: unknown key: " + key);
    }

    ClassAverages prototypes = store_to_averages(read_store(dir / "prototypes.raeb"));
    ClassAverages text = store_to_averages(read_store(dir / "text.raeb"));
    ClassAverages one_shot = store_to_averages(read_store(dir / "oneshot.raeb"));
    EmbeddingStore database = read_store(dir / "database.raeb");
    EmbeddingStore cluster_store = read_store(dir / "clusters.raeb");
    if (cluster_store.size() != n_clusters || cluster_meta.size() != n_clusters)
        throw ConfigError("world manifest: cluster count mismatch");
    std::vector<RetrievalCluster> clusters;
    clusters.reserve(n_clusters);
    for (std::size_t i = 0; i < n_clusters; ++i)
        clusters.push_back(
            {cluster_store.unit(i), cluster_meta[i].first, cluster_meta[i].second});

    return World(cfg, std::move(prototypes), std::move(text), std::move(one_shot),
                 std::move(clusters), std::move(database), measured_nu, measured_tau);
}

}  // namespace ragadapt
