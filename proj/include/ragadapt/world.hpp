#pragma once

#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "ragadapt/embedding.hpp"
#include "ragadapt/retrieval.hpp"
#include "ragadapt/rng.hpp"

// Synthetic unit-sphere worlds realizing the separation/concentration model
// exactly: class prototypes with a prescribed max pairwise inner product
// 1 - nu, classes as uniform spherical caps of chordal radius kappa around
// their prototype plus a rho_c-mass uniform outlier component, and a
// retrieval database of nu-separated, kappa-concentrated clusters.
namespace ragadapt {

enum class TauMode { Mirror, Perturbed, AdversarialCluster };

struct WorldConfig {
    std::size_t classes = 4;
    std::size_t dim = 16;
    double kappa = 0.2;     // chordal cap radius; cosine equivalent 1 - kappa^2/2
    double rho_c = 0.0;     // outlier mass in the target distribution
    double nu_target = 0.6;
    TauMode tau_mode = TauMode::Mirror;
    double tau_scale = 0.0;              // tangent noise scale for Perturbed
    double adversarial_fraction = 1.0;   // fraction of classes with misdirected text
    std::size_t clusters_per_class = 1;  // first = the class prototype; extras = distractors
    std::size_t db_per_cluster = 32;
    std::uint64_t master_seed = 1;

    void validate() const;  // throws ConfigError on out-of-range fields
};

struct RetrievalCluster {
    UnitVector center;
    ClassId class_id;  // the class whose retrieval distribution owns this cluster
    double kappa;
};

class World {
public:
    World(WorldConfig cfg, ClassAverages prototypes, ClassAverages text, ClassAverages one_shot,
          std::vector<RetrievalCluster> clusters, EmbeddingStore database, double measured_nu,
          double measured_tau)
        : config_(std::move(cfg)), prototypes_(std::move(prototypes)), text_(std::move(text)),
          one_shot_(std::move(one_shot)), clusters_(std::move(clusters)),
          database_(std::move(database)), measured_nu_(measured_nu), measured_tau_(measured_tau) {}

    const WorldConfig& config() const { return config_; }
    const ClassAverages& prototypes() const { return prototypes_; }  // S̄
    const ClassAverages& text() const { return text_; }              // T
    const ClassAverages& one_shot() const { return one_shot_; }      // S
    const std::vector<RetrievalCluster>& clusters() const { return clusters_; }
    const EmbeddingStore& database() const { return database_; }  // labels = 1-based cluster ids
    std::size_t classes() const { return prototypes_.classes(); }
    std::size_t dim() const { return prototypes_.dim(); }
    double measured_nu() const { return measured_nu_; }
    double measured_tau() const { return measured_tau_; }

    // index into clusters() of the center with max cosine (ties -> lowest id)
    std::size_t nearest_cluster(const UnitVector& query) const;

private:
    WorldConfig config_;
    ClassAverages prototypes_, text_, one_shot_;
    std::vector<RetrievalCluster> clusters_;
    EmbeddingStore database_;
    double measured_nu_, measured_tau_;
};

struct LabeledSample {
    UnitVector z;
    ClassId y;
};

// C unit prototypes in R^d whose max pairwise inner product is 1 - nu_target
// (to 1e-12 before rounding), via a randomly rotated regular simplex frame
// blended toward the frame's mean direction by a bisected scalar.
ClassAverages make_prototypes(std::size_t classes, std::size_t dim, double nu_target,
                              std::uint64_t seed);

// One draw from the class distribution: with probability rho_c uniform on the
// sphere, otherwise uniform on the chordal-radius-kappa cap around `center`.
UnitVector sample_class_point(const UnitVector& center, double kappa, double rho_c,
                              rng::Substream& stream);
UnitVector sample_class_point(const UnitVector& center, double kappa, double rho_c,
                              std::uint64_t seed);

// Analytic CDF of the chordal distance of a uniform cap draw (KS-test oracle).
double cap_cdf_chordal(std::size_t dim, double kappa, double r);

struct TauSpec {
    TauMode mode = TauMode::Mirror;
    double scale = 0.0;
    double fraction = 1.0;  // AdversarialCluster: fraction of classes misdirected
};

// Text prototypes per tau mode; returns T plus the measured tau.
std::pair<ClassAverages, double> make_text_embeddings(const ClassAverages& prototypes,
                                                      const std::vector<RetrievalCluster>& clusters,
                                                      const TauSpec& spec, std::uint64_t seed);

World make_world(const WorldConfig& config);

std::vector<LabeledSample> sample_target_set(const World& world, std::size_t n,
                                             std::uint64_t seed);

// Directory layout: prototypes/text/oneshot/clusters/database RAEB files plus
// a manifest echoing the config, the cluster table and measured nu/tau.
void save_world(const std::filesystem::path& dir, const World& world);
World load_world(const std::filesystem::path& dir);

}  // namespace ragadapt
