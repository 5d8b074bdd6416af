#pragma once

#include "dfa/graph.hpp"
#include "dfa/samples.hpp"

#include <vector>

namespace dfa {

// w_j proportional to 1 / d_j. When some distance is exactly 0 the first such
// neighbor gets weight 1 and the rest 0.
Vec interpolation_weights(const std::vector<double>& distances);

struct Prediction {
  Mat phi;                          // draws x queries
  std::vector<Mat> lambda;          // per query, draws x C
  Mat prob_mean, prob_lo, prob_hi;  // queries x C, logistic(Lambda) summaries
  std::vector<std::vector<Neighbor>> neighbors;
};

// Mean and equal-tailed interval of logistic(Lambda) per column of a draws x C
// matrix.
struct ProbabilitySummary {
  Vec mean, lo, hi;
};
ProbabilitySummary summarize_probabilities(const Mat& lambda, double level = 0.95);

// Per draw s: phi*_s = sum_j w_j phi_j^(s) over the k nearest training items
// and Lambda*_sc = phi*_s + delta_c^(s). Intervals are equal-tailed at `level`.
// `samples` must hold static draws with columns phi[0..I-1] and delta[...].
Prediction predict_new_items(const PosteriorSamples& samples, const Mat& train_covariates,
                             const Mat& new_covariates, int k,
                             const Metric& metric = Metric::euclidean(), double level = 0.95);

}  // namespace dfa
