#include "ragadapt/finetune.hpp"

#include <cmath>

namespace ragadapt {

namespace detail {

FeatureMatrix en_cache_gradient(const Cache& cache, const ClassAverages& text,
                                const EnsembleWeights& w,
                                std::span<const LabeledSample> train) {
    if (train.empty()) throw EmptySampleSetError("en_cache_gradient: empty train set");
    if (cache.dim() != text.dim() || cache.classes() != text.classes())
        throw DimensionMismatchError("en_cache_gradient: cache/text shape mismatch");

    const std::size_t d = cache.dim();
    const std::size_t k = cache.shots();
    const double omega = cache.omega();
    FeatureMatrix grad(d, cache.columns());
    std::vector<double> logits(cache.classes());
    std::vector<double> scaled(cache.columns());

    for (const LabeledSample& sample : train) {
        if (sample.y < 1 || sample.y > cache.classes())
            throw DimensionMismatchError("en_cache_gradient: label out of range");
        const auto z = sample.z.span();
        // forward: EN logits, remembering each shot's scaled similarity and
        // whether the clamp was active (clamped shots contribute no gradient)
        for (ClassId c = 1; c <= cache.classes(); ++c) {
            double acc = 0.0;
            for (std::size_t i = 0; i < k; ++i) {
                const std::size_t j = (c - 1) * k + i;
                const double raw = dot(cache.column(j), z);
                const double s = std::clamp(raw, -1.0, 1.0);
                const double e = exp_scale(s, omega);
                scaled[j] = (raw >= -1.0 && raw <= 1.0) ? e : 0.0;
                acc += e;
            }
            logits[c - 1] = w.alpha * dot(text.column(c - 1), z) +
                            w.gamma * acc / static_cast<double>(k);
        }
        const std::vector<double> g = cross_entropy_grad(logits, sample.y);
        const double common = w.gamma * omega / static_cast<double>(k * train.size());
        for (std::size_t j = 0; j < cache.columns(); ++j) {
            if (scaled[j] == 0.0) continue;
            const double coef = g[cache.class_of_column(j) - 1] * common * scaled[j];
            auto gj = grad.column(j);
            for (std::size_t t = 0; t < d; ++t) gj[t] += coef * z[t];
        }
    }
    for (std::size_t j = 0; j < grad.cols(); ++j)
        for (double x : grad.column(j))
            if (!std::isfinite(x))
                throw NonFiniteGradientError("en_cache_gradient: non-finite entry");
    return grad;
}

}  // namespace detail

Cache finetune_cache(const Cache& cache, const ClassAverages& text, const EnsembleWeights& w,
                     std::span<const LabeledSample> train, const FinetuneOptions& opts) {
    if (train.empty()) throw EmptySampleSetError("finetune_cache: empty train set");
    if (cache.dim() != text.dim() || cache.classes() != text.classes())
        throw DimensionMismatchError("finetune_cache: cache/text shape mismatch");
    if (!(opts.lr >= 0.0) || !(opts.weight_decay >= 0.0))
        throw NonFiniteGradientError("finetune_cache: lr and weight_decay must be >= 0");

    Cache out = cache;
    if (opts.lr == 0.0 || opts.epochs == 0) return out;  // bit-identical by contract

    constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
    const std::size_t total = out.dim() * out.columns();
    std::vector<double> m(total, 0.0), v(total, 0.0);

    for (std::size_t step = 0; step < opts.epochs; ++step) {
        const FeatureMatrix grad = detail::en_cache_gradient(out, text, w, train);
        constexpr double kPi = 3.14159265358979323846;
        const double lr_t =
            opts.lr * 0.5 *
            (1.0 + std::cos(kPi * static_cast<double>(step) / static_cast<double>(opts.epochs)));
        const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(step + 1));
        const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(step + 1));
        std::size_t idx = 0;
        for (std::size_t j = 0; j < out.columns(); ++j) {
            auto col = out.column(j);
            const auto gj = grad.column(j);
            for (std::size_t t = 0; t < out.dim(); ++t, ++idx) {
                const double g = gj[t];
                m[idx] = kBeta1 * m[idx] + (1.0 - kBeta1) * g;
                v[idx] = kBeta2 * v[idx] + (1.0 - kBeta2) * g * g;
                const double update = (m[idx] / bc1) / (std::sqrt(v[idx] / bc2) + kEps) +
                                      opts.weight_decay * col[t];
                col[t] -= lr_t * update;
                if (!std::isfinite(col[t]))
                    throw NonFiniteGradientError("finetune_cache: parameter became non-finite");
            }
        }
        if (opts.renormalize) {
            for (std::size_t j = 0; j < out.columns(); ++j) {
                auto col = out.column(j);
                const UnitVector u = UnitVector::normalize(col);
                std::copy(u.values().begin(), u.values().end(), col.begin());
            }
        }
    }
    out.set_normalized(opts.renormalize);
    return out;
}

Cache mixture_cache(const Cache& id_cache, const Cache& ret_cache) {
    if (id_cache.dim() != ret_cache.dim() || id_cache.classes() != ret_cache.classes() ||
        id_cache.shots() != ret_cache.shots())
        throw ShapeMismatchError("mixture_cache: caches must share dim, classes and shots");
    if (id_cache.omega() != ret_cache.omega())
        throw ShapeMismatchError("mixture_cache: caches must share omega");

    const std::size_t k = id_cache.shots();
    Cache out(id_cache.dim(), id_cache.classes(), 2 * k, id_cache.omega(),
              id_cache.normalized() && ret_cache.normalized());
    for (ClassId c = 1; c <= out.classes(); ++c) {
        for (std::size_t i = 0; i < k; ++i) {
            const auto a = id_cache.shot(c, i);
            const auto b = ret_cache.shot(c, i);
            std::copy(a.begin(), a.end(), out.shot(c, i).begin());
            std::copy(b.begin(), b.end(), out.shot(c, k + i).begin());
        }
    }
    return out;
}

}  // namespace ragadapt
