#include "ragadapt/heads.hpp"

#include <algorithm>
#include <cmath>

#include "ragadapt/math_util.hpp"

namespace ragadapt {

LogitVector zoc_logits(const ClassAverages& text, const UnitVector& z) {
    if (text.dim() != z.dim()) throw DimensionMismatchError("zoc_logits: dimension mismatch");
    std::vector<double> scores = text.matrix().transpose_apply(z.span());
    for (double& s : scores) s = std::clamp(s, -1.0, 1.0);
    return {std::move(scores), Head::ZOC};
}

double exp_scale(double s, double omega) { return std::exp(-omega + omega * s); }

LogitVector ret_logits(const Cache& cache, const UnitVector& z) {
    if (cache.dim() != z.dim()) throw DimensionMismatchError("ret_logits: dimension mismatch");
    const double omega = cache.omega();
    std::vector<double> scores(cache.classes());
    std::vector<double> terms(cache.shots());
    for (ClassId c = 1; c <= cache.classes(); ++c) {
        for (std::size_t i = 0; i < cache.shots(); ++i) {
            // similarities clamped before scaling so fine-tuned (non-unit)
            // columns cannot push a logit outside [exp(-2w), 1]
            const double s = std::clamp(dot(cache.shot(c, i), z.span()), -1.0, 1.0);
            terms[i] = exp_scale(s, omega);
        }
        scores[c - 1] = pairwise_mean(terms);
    }
    return {std::move(scores), Head::RET};
}

LogitVector ensemble_logits(const EnsembleWeights& w, const LogitVector& zoc,
                            const LogitVector& ret) {
    if (zoc.head != Head::ZOC || ret.head != Head::RET)
        throw HeadMismatchError("ensemble_logits: expected (ZOC, RET) inputs");
    if (zoc.scores.size() != ret.scores.size())
        throw DimensionMismatchError("ensemble_logits: class count mismatch");
    std::vector<double> scores(zoc.scores.size());
    for (std::size_t c = 0; c < scores.size(); ++c)
        scores[c] = w.alpha * zoc.scores[c] + w.gamma * ret.scores[c];
    return {std::move(scores), Head::EN};
}

LogitVector theory_logits(const EnsembleWeights& w, const ClassAverages& text,
                          const ClassAverages& one_shot, const ClassAverages& k_bar,
                          const UnitVector& z) {
    if (std::fabs(w.alpha + w.beta + w.gamma - 1.0) > 1e-12)
        throw WeightSumViolationError("theory_logits: alpha+beta+gamma must equal 1");
    if (text.classes() != one_shot.classes() || text.classes() != k_bar.classes())
        throw DimensionMismatchError("theory_logits: class count mismatch");
    const auto zt = zoc_logits(text, z);
    const auto zs = zoc_logits(one_shot, z);
    const auto zk = zoc_logits(k_bar, z);
    std::vector<double> scores(zt.scores.size());
    for (std::size_t c = 0; c < scores.size(); ++c) {
        // convex combination of unit-column logits stays within [-1, 1]
        scores[c] = std::clamp(
            w.alpha * zt.scores[c] + w.beta * zs.scores[c] + w.gamma * zk.scores[c], -1.0, 1.0);
    }
    return {std::move(scores), Head::THEORY};
}

ClassId argmax_class(std::span<const double> scores) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < scores.size(); ++c)
        if (scores[c] > scores[best]) best = c;
    return static_cast<ClassId>(best + 1);
}

ClassId predict(const LogitVector& logits) { return argmax_class(logits.scores); }

double cross_entropy(std::span<const double> v, ClassId y) {
    if (y < 1 || y > v.size()) throw DimensionMismatchError("cross_entropy: label out of range");
    const std::size_t yi = y - 1;
    const double m = *std::max_element(v.begin(), v.end());
    if (v[yi] >= m - 30.0) {
        // log(1 + sum_{i!=y} exp(v_i - v_y)); every term <= e^30, no overflow
        double sum = 0.0;
        for (std::size_t i = 0; i < v.size(); ++i)
            if (i != yi) sum += std::exp(v[i] - v[yi]);
        return std::log1p(sum);
    }
    // v_y far below the max: shift by the max instead
    double sum = 0.0;
    for (double x : v) sum += std::exp(x - m);
    return std::log(sum) + (m - v[yi]);
}

std::vector<double> cross_entropy_grad(std::span<const double> v, ClassId y) {
    if (y < 1 || y > v.size())
        throw DimensionMismatchError("cross_entropy_grad: label out of range");
    const double m = *std::max_element(v.begin(), v.end());
    std::vector<double> p(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        p[i] = std::exp(v[i] - m);
        sum += p[i];
    }
    for (double& x : p) x /= sum;
    p[y - 1] -= 1.0;
    return p;
}

double empirical_risk(const FeatureMatrix& q, std::span<const LabeledSample> samples) {
    if (samples.empty()) throw EmptySampleSetError("empirical_risk: empty sample set");
    std::vector<double> losses(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i)
        losses[i] = cross_entropy(q.transpose_apply(samples[i].z.span()), samples[i].y);
    return pairwise_mean(losses);
}

double zero_one_risk(const Predictor& head, std::span<const LabeledSample> samples) {
    if (samples.empty()) throw EmptySampleSetError("zero_one_risk: empty sample set");
    std::size_t wrong = 0;
    for (const auto& s : samples)
        if (predict(head(s.z)) != s.y) ++wrong;
    return static_cast<double>(wrong) / static_cast<double>(samples.size());
}

}  // namespace ragadapt
