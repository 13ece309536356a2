#include "ragadapt/embedding.hpp"

#include <algorithm>
#include <cmath>

namespace ragadapt {

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size())
        throw DimensionMismatchError("dot: dimension mismatch " + std::to_string(a.size()) +
                                     " vs " + std::to_string(b.size()));
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

UnitVector UnitVector::normalize(std::span<const double> v) {
    if (v.size() < 2) throw DimensionMismatchError("UnitVector: dim must be >= 2");
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    const double norm = std::sqrt(norm2);
    if (norm <= 1e-12) throw ZeroVectorError("normalize: vector norm <= 1e-12");
    std::vector<double> out(v.begin(), v.end());
    for (double& x : out) x /= norm;
    return UnitVector(std::move(out));
}

UnitVector UnitVector::checked(std::vector<double> v, double tol) {
    if (v.size() < 2) throw DimensionMismatchError("UnitVector: dim must be >= 2");
    double norm2 = 0.0;
    for (double x : v) norm2 += x * x;
    const double norm = std::sqrt(norm2);
    if (std::fabs(norm - 1.0) > tol)
        throw NormViolationError("UnitVector: norm " + std::to_string(norm) +
                                 " deviates from 1 by more than " + std::to_string(tol));
    return UnitVector(std::move(v));
}

double cosine(const UnitVector& a, const UnitVector& b) {
    return std::clamp(dot(a.span(), b.span()), -1.0, 1.0);
}

double chordal_distance(const UnitVector& a, const UnitVector& b) {
    if (a.dim() != b.dim()) throw DimensionMismatchError("chordal_distance: dimension mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < a.dim(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return std::sqrt(acc);
}

FeatureMatrix FeatureMatrix::from_columns(const std::vector<UnitVector>& cols) {
    if (cols.empty()) throw DimensionMismatchError("FeatureMatrix: no columns");
    FeatureMatrix m(cols[0].dim(), cols.size());
    for (std::size_t c = 0; c < cols.size(); ++c) {
        if (cols[c].dim() != m.dim_)
            throw DimensionMismatchError("FeatureMatrix: ragged columns");
        std::copy(cols[c].values().begin(), cols[c].values().end(), m.column(c).begin());
    }
    return m;
}

std::vector<double> FeatureMatrix::transpose_apply(std::span<const double> z) const {
    if (z.size() != dim_) throw DimensionMismatchError("transpose_apply: dimension mismatch");
    std::vector<double> out(cols_);
    for (std::size_t c = 0; c < cols_; ++c) out[c] = dot(column(c), z);
    return out;
}

ClassAverages::ClassAverages(FeatureMatrix m, double tol) : m_(std::move(m)) {
    for (std::size_t c = 0; c < m_.cols(); ++c) {
        double norm2 = 0.0;
        for (double x : m_.column(c)) norm2 += x * x;
        const double norm = std::sqrt(norm2);
        if (std::fabs(norm - 1.0) > tol)
            throw NormViolationError("ClassAverages: column " + std::to_string(c + 1) +
                                     " norm " + std::to_string(norm) + " is not unit");
    }
}

ClassAverages ClassAverages::from_columns(const std::vector<UnitVector>& cols) {
    return ClassAverages(FeatureMatrix::from_columns(cols));
}

UnitVector ClassAverages::unit(std::size_t c) const {
    return UnitVector::checked(std::vector<double>(column(c).begin(), column(c).end()), 1e-6);
}

void EmbeddingStore::add(const UnitVector& v) {
    if (v.dim() != dim_) throw DimensionMismatchError("EmbeddingStore::add: dimension mismatch");
    if (labels_ && size() > 0)
        throw DimensionMismatchError("EmbeddingStore::add: store is labeled; label required");
    data_.insert(data_.end(), v.values().begin(), v.values().end());
}

void EmbeddingStore::add(const UnitVector& v, ClassId label) {
    if (v.dim() != dim_) throw DimensionMismatchError("EmbeddingStore::add: dimension mismatch");
    if (label < 1) throw DimensionMismatchError("EmbeddingStore::add: labels are 1-based");
    if (!labels_) {
        if (size() > 0)
            throw DimensionMismatchError("EmbeddingStore::add: store is unlabeled; drop the label");
        labels_.emplace();
    }
    data_.insert(data_.end(), v.values().begin(), v.values().end());
    labels_->push_back(label);
}

EmbeddingStore EmbeddingStore::from_raw(std::size_t dim, std::vector<double> data,
                                        std::optional<std::vector<ClassId>> labels, double tol) {
    if (dim < 2) throw DimensionMismatchError("EmbeddingStore: dim must be >= 2");
    if (data.size() % dim != 0)
        throw DimensionMismatchError("EmbeddingStore: data size not a multiple of dim");
    const std::size_t n = data.size() / dim;
    if (labels && labels->size() != n)
        throw DimensionMismatchError("EmbeddingStore: label count != vector count");
    for (std::size_t i = 0; i < n; ++i) {
        double norm2 = 0.0;
        for (std::size_t j = 0; j < dim; ++j) {
            const double x = data[i * dim + j];
            norm2 += x * x;
        }
        const double norm = std::sqrt(norm2);
        if (std::fabs(norm - 1.0) > tol)
            throw NormViolationError("EmbeddingStore: row " + std::to_string(i) + " norm " +
                                     std::to_string(norm) + " deviates from 1 by more than " +
                                     std::to_string(tol));
        if (labels && (*labels)[i] < 1)
            throw DimensionMismatchError("EmbeddingStore: labels are 1-based");
    }
    EmbeddingStore s(dim);
    s.data_ = std::move(data);
    s.labels_ = std::move(labels);
    return s;
}

UnitVector EmbeddingStore::unit(std::size_t i) const {
    return UnitVector::checked(std::vector<double>(vector(i).begin(), vector(i).end()), 1e-6);
}

}  // namespace ragadapt
