#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ragadapt/embedding.hpp"

namespace ragadapt {

class World;  // synthetic_world; only oracle_retrieve touches it

// The retrieved-feature matrix K (d x C*K, class-major columns) with the
// exponential sharpness ω baked in. The value matrix V is implicit: column j
// belongs to class j/K + 1; materialize_v() spells it out for verification.
// Fine-tuning relaxes the unit-norm column invariant, tracked by `normalized`.
class Cache {
public:
    Cache(std::size_t dim, std::size_t classes, std::size_t shots, double omega = 1.0,
          bool normalized = true);

    std::size_t dim() const { return m_.dim(); }
    std::size_t classes() const { return classes_; }
    std::size_t shots() const { return shots_; }
    std::size_t columns() const { return m_.cols(); }
    double omega() const { return omega_; }
    bool normalized() const { return normalized_; }
    void set_normalized(bool v) { normalized_ = v; }

    std::span<double> column(std::size_t j) { return m_.column(j); }
    std::span<const double> column(std::size_t j) const { return m_.column(j); }
    // class-indexed access: c is 1-based, shot index 0-based
    std::span<double> shot(ClassId c, std::size_t i) { return m_.column(index_of(c, i)); }
    std::span<const double> shot(ClassId c, std::size_t i) const {
        return m_.column(index_of(c, i));
    }
    ClassId class_of_column(std::size_t j) const { return static_cast<ClassId>(j / shots_ + 1); }

    const FeatureMatrix& matrix() const { return m_; }

private:
    std::size_t index_of(ClassId c, std::size_t i) const;
    FeatureMatrix m_;
    std::size_t classes_, shots_;
    double omega_;
    bool normalized_;
};

struct ScoredIndex {
    std::size_t index;  // 0-based position in the database
    double similarity;
};

// Exact top-k by cosine; ties broken by ascending index.
std::vector<ScoredIndex> top_k(const EmbeddingStore& db, const UnitVector& query, std::size_t k);

enum class RetrievalMode { T2I, I2I, OracleId };

// Per-class retrieval queries: one text embedding per class (T2I) or one or
// more seed images per class (I2I). Scores against a database item use the
// query cosine (T2I) or the max over the class's seeds (I2I).
class QuerySet {
public:
    static QuerySet t2i(const ClassAverages& text);
    static QuerySet i2i(std::vector<std::vector<UnitVector>> seeds_per_class);

    RetrievalMode mode() const { return mode_; }
    std::size_t classes() const { return queries_.size(); }
    const std::vector<UnitVector>& queries(ClassId c) const { return queries_[c - 1]; }

private:
    QuerySet(RetrievalMode m, std::vector<std::vector<UnitVector>> q);
    RetrievalMode mode_;
    std::vector<std::vector<UnitVector>> queries_;
};

// Top-K distinct database items per class, columns ordered by (score desc,
// index asc) within each class block.
Cache build_cache(const EmbeddingStore& db, const QuerySet& queries, std::size_t k, double omega);

// Per-class normalized means k̄_c of a cache.
ClassAverages class_averages(const Cache& cache);

// The one-hot value matrix V (C x C*K) the cache carries implicitly.
std::vector<std::vector<int>> materialize_v(std::size_t k, std::size_t c);

// Assumption-2 retrieval: find the cluster whose center maximizes cosine with
// the query (ties -> lowest cluster id), then draw k samples from that
// cluster's cap distribution (outlier-free).
std::vector<UnitVector> oracle_retrieve(const World& world, const UnitVector& query,
                                        std::size_t k, std::uint64_t seed);

// Cache container: a human-readable preamble (classes/shots/omega/normalized)
// followed by a RAEB payload holding the columns as rows. Layout in README.
void write_cache(const std::filesystem::path& path, const Cache& cache);
Cache read_cache(const std::filesystem::path& path);

}  // namespace ragadapt
