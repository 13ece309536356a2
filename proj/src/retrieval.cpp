#include "ragadapt/retrieval.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "ragadapt/store_io.hpp"
#include "ragadapt/world.hpp"

namespace ragadapt {

Cache::Cache(std::size_t dim, std::size_t classes, std::size_t shots, double omega,
             bool normalized)
    : m_(dim, classes * shots), classes_(classes), shots_(shots), omega_(omega),
      normalized_(normalized) {
    if (dim < 2) throw DimensionMismatchError("Cache: dim must be >= 2");
    if (classes < 1 || shots < 1) throw DimensionMismatchError("Cache: classes and shots >= 1");
    if (!(omega > 0.0)) throw DimensionMismatchError("Cache: omega must be positive");
}

std::size_t Cache::index_of(ClassId c, std::size_t i) const {
    if (c < 1 || c > classes_ || i >= shots_)
        throw DimensionMismatchError("Cache: shot index out of range");
    return (c - 1) * shots_ + i;
}

std::vector<ScoredIndex> top_k(const EmbeddingStore& db, const UnitVector& query,
                               std::size_t k) {
    if (k < 1 || k > db.size())
        throw BudgetExceedsDatabaseError("top_k: need 1 <= k <= " + std::to_string(db.size()) +
                                         ", got " + std::to_string(k));
    std::vector<ScoredIndex> scored(db.size());
    for (std::size_t i = 0; i < db.size(); ++i)
        scored[i] = {i, std::clamp(dot(db.vector(i), query.span()), -1.0, 1.0)};
    std::partial_sort(scored.begin(), scored.begin() + k, scored.end(),
                      [](const ScoredIndex& a, const ScoredIndex& b) {
                          if (a.similarity != b.similarity) return a.similarity > b.similarity;
                          return a.index < b.index;
                      });
    scored.resize(k);
    return scored;
}

QuerySet::QuerySet(RetrievalMode m, std::vector<std::vector<UnitVector>> q)
    : mode_(m), queries_(std::move(q)) {
    if (queries_.empty()) throw EmptyQueryClassError("QuerySet: no classes");
    for (std::size_t c = 0; c < queries_.size(); ++c)
        if (queries_[c].empty())
            throw EmptyQueryClassError("QuerySet: class " + std::to_string(c + 1) +
                                       " has no queries");
}

QuerySet QuerySet::t2i(const ClassAverages& text) {
    std::vector<std::vector<UnitVector>> q;
    q.reserve(text.classes());
    for (std::size_t c = 0; c < text.classes(); ++c) q.push_back({text.unit(c)});
    return QuerySet(RetrievalMode::T2I, std::move(q));
}

QuerySet QuerySet::i2i(std::vector<std::vector<UnitVector>> seeds_per_class) {
    return QuerySet(RetrievalMode::I2I, std::move(seeds_per_class));
}

Cache build_cache(const EmbeddingStore& db, const QuerySet& queries, std::size_t k,
                  double omega) {
    if (k < 1 || k > db.size())
        throw BudgetExceedsDatabaseError("build_cache: need 1 <= K <= " +
                                         std::to_string(db.size()) + ", got " +
                                         std::to_string(k));
    const std::size_t classes = queries.classes();
    Cache cache(db.dim(), classes, k, omega, /*normalized=*/true);

    std::vector<ScoredIndex> scored(db.size());
    for (ClassId c = 1; c <= classes; ++c) {
        // item score: query cosine (T2I) or max over the class's seeds (I2I)
        for (std::size_t i = 0; i < db.size(); ++i) {
            double best = -2.0;
            for (const UnitVector& q : queries.queries(c))
                best = std::max(best, std::clamp(dot(db.vector(i), q.span()), -1.0, 1.0));
            scored[i] = {i, best};
        }
        std::partial_sort(scored.begin(), scored.begin() + k, scored.end(),
                          [](const ScoredIndex& a, const ScoredIndex& b) {
                              if (a.similarity != b.similarity)
                                  return a.similarity > b.similarity;
                              return a.index < b.index;
                          });
        for (std::size_t i = 0; i < k; ++i) {
            auto col = cache.shot(c, i);
            const auto row = db.vector(scored[i].index);
            std::copy(row.begin(), row.end(), col.begin());
        }
    }
    return cache;
}

ClassAverages class_averages(const Cache& cache) {
    FeatureMatrix m(cache.dim(), cache.classes());
    std::vector<double> mean(cache.dim());
    for (ClassId c = 1; c <= cache.classes(); ++c) {
        std::fill(mean.begin(), mean.end(), 0.0);
        for (std::size_t i = 0; i < cache.shots(); ++i) {
            const auto col = cache.shot(c, i);
            for (std::size_t j = 0; j < cache.dim(); ++j) mean[j] += col[j];
        }
        for (double& x : mean) x /= static_cast<double>(cache.shots());
        UnitVector k_bar = [&] {
            try {
                return UnitVector::normalize(mean);
            } catch (const ZeroVectorError&) {
                throw ZeroVectorError("class_averages: class " + std::to_string(c) +
                                      " mean vanishes (antipodal cancellation)");
            }
        }();
        std::copy(k_bar.values().begin(), k_bar.values().end(), m.column(c - 1).begin());
    }
    return ClassAverages(std::move(m));
}

std::vector<std::vector<int>> materialize_v(std::size_t k, std::size_t c) {
    if (k < 1 || c < 1) throw DimensionMismatchError("materialize_v: K and C must be >= 1");
    std::vector<std::vector<int>> v(c, std::vector<int>(c * k, 0));
    for (std::size_t j = 0; j < c * k; ++j) v[j / k][j] = 1;
    return v;
}

std::vector<UnitVector> oracle_retrieve(const World& world, const UnitVector& query,
                                        std::size_t k, std::uint64_t seed) {
    if (k < 1) throw BudgetExceedsDatabaseError("oracle_retrieve: k must be >= 1");
    const auto& cluster = world.clusters()[world.nearest_cluster(query)];
    rng::Substream stream(seed, "oracle-retrieve");
    std::vector<UnitVector> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i)
        out.push_back(sample_class_point(cluster.center, cluster.kappa, 0.0, stream));
    return out;
}

void write_cache(const std::filesystem::path& path, const Cache& cache) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    char omega_buf[40];
    std::snprintf(omega_buf, sizeof omega_buf, "%.17g", cache.omega());
    os << "RAGADAPT-CACHE 1\n"
       << "classes = " << cache.classes() << "\n"
       << "shots = " << cache.shots() << "\n"
       << "omega = " << omega_buf << "\n"
       << "normalized = " << (cache.normalized() ? 1 : 0) << "\n"
       << "---\n";
    // columns as payload rows, class-major
    std::vector<double> rows;
    rows.reserve(cache.dim() * cache.columns());
    for (std::size_t j = 0; j < cache.columns(); ++j) {
        const auto col = cache.column(j);
        rows.insert(rows.end(), col.begin(), col.end());
    }
    raeb::write_payload(os, static_cast<std::uint32_t>(cache.dim()), rows, std::nullopt);
    os.close();
    if (!os) throw IoError("write failed: " + path.string());
}

Cache read_cache(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    std::string line;
    if (!std::getline(is, line) || line.rfind("RAGADAPT-CACHE", 0) != 0)
        throw BadMagicError("cache: missing RAGADAPT-CACHE preamble");
    if (line != "RAGADAPT-CACHE 1")
        throw UnsupportedVersionError("cache: unsupported preamble version: " + line);

    std::size_t classes = 0, shots = 0;
    double omega = 0.0;
    int normalized = -1;
    while (std::getline(is, line)) {
        if (line == "---") break;
        std::istringstream ls(line);
        std::string key, eq;
        ls >> key >> eq;
        if (eq != "=") throw TruncatedFileError("cache: malformed preamble line: " + line);
        if (key == "classes") ls >> classes;
        else if (key == "shots") ls >> shots;
        else if (key == "omega") ls >> omega;
        else if (key == "normalized") ls >> normalized;
        else throw TruncatedFileError("cache: unknown preamble key: " + key);
        if (!ls) throw TruncatedFileError("cache: malformed preamble value: " + line);
    }
    if (classes == 0 || shots == 0 || !(omega > 0.0) || normalized < 0)
        throw TruncatedFileError("cache: incomplete preamble");

    raeb::Payload p = raeb::read_payload(is, /*require_eof=*/true);
    if (p.count != classes * shots)
        throw TruncatedFileError("cache: payload count " + std::to_string(p.count) +
                                 " != classes*shots");
    if (p.labels) throw TruncatedFileError("cache: unexpected labels in payload");

    Cache cache(p.dim, classes, shots, omega, normalized != 0);
    for (std::size_t j = 0; j < cache.columns(); ++j) {
        auto col = cache.column(j);
        for (std::size_t i = 0; i < cache.dim(); ++i) col[i] = p.data[j * cache.dim() + i];
        if (normalized != 0) {
            double n2 = 0.0;
            for (double x : col) n2 += x * x;
            if (std::fabs(std::sqrt(n2) - 1.0) > 1e-6)
                throw NormViolationError("cache: column " + std::to_string(j) +
                                         " marked normalized but is not unit");
        }
    }
    return cache;
}

}  // namespace ragadapt
