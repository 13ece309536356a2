#pragma once

#include "ragadapt/heads.hpp"

namespace ragadapt {

// Full-batch AdamW (decoupled weight decay, beta1 0.9 / beta2 0.999 /
// eps 1e-8) with a cosine learning-rate schedule over `epochs` steps:
// lr_t = lr * 0.5 * (1 + cos(pi * t / epochs)) for t = 0..epochs-1.
struct FinetuneOptions {
    double lr = 1e-3;
    std::size_t epochs = 20;
    double weight_decay = 0.0;
    // Columns are NOT re-normalized between steps by default; the flag exists
    // for sensitivity studies. When set, every step projects back to the sphere.
    bool renormalize = false;
};

// Minimizes the EN-head cross-entropy over `train` with respect to the cache
// columns only (text matrix, alpha/gamma and omega stay fixed). Returns a new
// cache; with lr = 0 the returned cache is bit-identical to the input.
Cache finetune_cache(const Cache& cache, const ClassAverages& text, const EnsembleWeights& w,
                     std::span<const LabeledSample> train, const FinetuneOptions& opts);

// Per-class concatenation of two caches with identical (dim, classes, shots,
// omega): id columns first, then retrieved columns; shots double.
Cache mixture_cache(const Cache& id_cache, const Cache& ret_cache);

namespace detail {
// dL/d(cache columns) for the EN-head CE objective; exposed so tests can
// check it against central finite differences.
FeatureMatrix en_cache_gradient(const Cache& cache, const ClassAverages& text,
                                const EnsembleWeights& w,
                                std::span<const LabeledSample> train);
}  // namespace detail

}  // namespace ragadapt
