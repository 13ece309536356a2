#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ragadapt/errors.hpp"

namespace ragadapt {

// 1-based class label, matching the on-disk format and the prediction API.
using ClassId = std::uint32_t;

double dot(std::span<const double> a, std::span<const double> b);

// A point on the unit sphere. `normalize` guarantees unit norm to 1e-9;
// `checked` admits externally produced data at a caller-chosen tolerance
// (file reads are float32-quantized, so they arrive at ~1e-7).
class UnitVector {
public:
    static UnitVector normalize(std::span<const double> v);
    static UnitVector checked(std::vector<double> v, double tol = 1e-9);

    const std::vector<double>& values() const { return v_; }
    std::span<const double> span() const { return v_; }
    std::size_t dim() const { return v_.size(); }
    double operator[](std::size_t i) const { return v_[i]; }

    bool operator==(const UnitVector& o) const { return v_ == o.v_; }

private:
    explicit UnitVector(std::vector<double> v) : v_(std::move(v)) {}
    std::vector<double> v_;
};

double cosine(const UnitVector& a, const UnitVector& b);            // clamped to [-1, 1]
double chordal_distance(const UnitVector& a, const UnitVector& b);  // ||a - b||_2

// Dense d x C column matrix. Columns are class-indexed feature vectors;
// not necessarily unit norm (ensemble mixes and fine-tuned caches are not).
class FeatureMatrix {
public:
    FeatureMatrix(std::size_t dim, std::size_t cols)
        : dim_(dim), cols_(cols), a_(dim * cols, 0.0) {}
    static FeatureMatrix from_columns(const std::vector<UnitVector>& cols);

    std::size_t dim() const { return dim_; }
    std::size_t cols() const { return cols_; }
    std::span<double> column(std::size_t c) { return {a_.data() + c * dim_, dim_}; }
    std::span<const double> column(std::size_t c) const { return {a_.data() + c * dim_, dim_}; }

    // Q^T z: one score per column.
    std::vector<double> transpose_apply(std::span<const double> z) const;

    bool operator==(const FeatureMatrix& o) const = default;

private:
    std::size_t dim_, cols_;
    std::vector<double> a_;  // column-major
};

// FeatureMatrix whose columns are all unit (within tol). Reused for the
// prototype matrix, the text matrix, the one-shot matrix and cache averages.
class ClassAverages {
public:
    explicit ClassAverages(FeatureMatrix m, double tol = 1e-9);
    static ClassAverages from_columns(const std::vector<UnitVector>& cols);

    const FeatureMatrix& matrix() const { return m_; }
    std::size_t dim() const { return m_.dim(); }
    std::size_t classes() const { return m_.cols(); }
    std::span<const double> column(std::size_t c) const { return m_.column(c); }
    UnitVector unit(std::size_t c) const;

private:
    FeatureMatrix m_;
};

// Flat list of unit vectors with optional 1-based labels (class ids for
// query/target stores, cluster ids for the retrieval database).
class EmbeddingStore {
public:
    explicit EmbeddingStore(std::size_t dim) : dim_(dim) {}

    void add(const UnitVector& v);
    void add(const UnitVector& v, ClassId label);
    // Bulk path used by the file reader; validates norms at `tol`.
    static EmbeddingStore from_raw(std::size_t dim, std::vector<double> data,
                                   std::optional<std::vector<ClassId>> labels,
                                   double tol = 1e-6);

    std::size_t dim() const { return dim_; }
    std::size_t size() const { return dim_ == 0 ? 0 : data_.size() / dim_; }
    std::span<const double> vector(std::size_t i) const { return {data_.data() + i * dim_, dim_}; }
    UnitVector unit(std::size_t i) const;

    bool has_labels() const { return labels_.has_value(); }
    ClassId label(std::size_t i) const { return (*labels_)[i]; }
    const std::vector<ClassId>& labels() const { return *labels_; }
    std::span<const double> raw() const { return data_; }

    bool operator==(const EmbeddingStore& o) const = default;

private:
    std::size_t dim_;
    std::vector<double> data_;  // row-major
    std::optional<std::vector<ClassId>> labels_;
};

}  // namespace ragadapt
