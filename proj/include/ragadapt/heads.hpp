#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ragadapt/retrieval.hpp"
#include "ragadapt/world.hpp"

// Classification heads and risks.
//
//   ZOC     f_c = cos(t_c, z)                          zero-shot
//   RET     f_c = (1/K) sum_i exp(omega*(s_ci - 1))    cache head, s_ci = <z, k_ci>
//   EN      f   = alpha*ZOC + gamma*RET                keeps the exponential scaling
//   THEORY  f   = (alpha*T + beta*S + gamma*K̄)^T z     linear; alpha+beta+gamma = 1
namespace ragadapt {

enum class Head { ZOC, RET, EN, THEORY };

struct LogitVector {
    std::vector<double> scores;
    Head head;
};

// EN uses (alpha, gamma) in [0,1]^2; THEORY additionally requires
// alpha + beta + gamma = 1 (checked where it matters).
struct EnsembleWeights {
    double alpha = 1.0;
    double beta = 0.0;
    double gamma = 0.0;
};

LogitVector zoc_logits(const ClassAverages& text, const UnitVector& z);

// exp(-omega + omega*s): 1 at s = 1, exp(-2*omega) at s = -1
double exp_scale(double s, double omega);

LogitVector ret_logits(const Cache& cache, const UnitVector& z);

LogitVector ensemble_logits(const EnsembleWeights& w, const LogitVector& zoc,
                            const LogitVector& ret);

LogitVector theory_logits(const EnsembleWeights& w, const ClassAverages& text,
                          const ClassAverages& one_shot, const ClassAverages& k_bar,
                          const UnitVector& z);

// argmax, ties to the lowest index; returns a 1-based ClassId
ClassId predict(const LogitVector& logits);
ClassId argmax_class(std::span<const double> scores);

// -log softmax_y(v), computed in overflow-safe subtracted form
double cross_entropy(std::span<const double> v, ClassId y);
// d/dv of the above: p - onehot(y) with p = softmax(v)
std::vector<double> cross_entropy_grad(std::span<const double> v, ClassId y);

// mean cross-entropy of Q^T z over samples (fixed pairwise reduction)
double empirical_risk(const FeatureMatrix& q, std::span<const LabeledSample> samples);

using Predictor = std::function<LogitVector(const UnitVector&)>;
double zero_one_risk(const Predictor& head, std::span<const LabeledSample> samples);

}  // namespace ragadapt
