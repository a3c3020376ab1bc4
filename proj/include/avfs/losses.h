// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef AVFS_LOSSES_H_
#define AVFS_LOSSES_H_

#include <string>
#include <vector>

#include "avfs/tensor.h"

namespace avfs {

inline constexpr double kDbClamp = 60.0;
inline constexpr double kRatioEps = 1e-8;

// Scale-invariant SNR in dB, clamped to [-60, 60]. Differentiable w.r.t. the
// estimate; the reference is treated as constant. Throws on an all-zero
// reference (callers apply the zero-penalty rule instead).
Tensor si_snr(const Tensor& est, const Tensor& ref);
// Negated SI-SNR, the stage-1 minimization objective.
Tensor si_snr_loss(const Tensor& est, const Tensor& ref);

// Binary cross-entropy on a scalar probability, clamped to [1e-7, 1-1e-7].
Tensor bce(const Tensor& p, double label);

// Homoscedastic-uncertainty weighting of the two task losses:
//   L = L1/(2*s1^2) + L2/(2*s2^2) + log s1 + log s2,  s_k = exp(log_sigma_k).
Tensor joint_loss(const Tensor& l_sisnr, const Tensor& l_ce,
                  const Tensor& log_sigma1, const Tensor& log_sigma2);

// ---- plain (non-differentiable) metric helpers on raw sample buffers ----
double si_sdr_db(const std::vector<double>& est, const std::vector<double>& ref);
double sdr_db(const std::vector<double>& est, const std::vector<double>& ref);
// improvement = metric(est, ref) - metric(mix, ref)
double si_sdr_improvement_db(const std::vector<double>& est,
                             const std::vector<double>& mix,
                             const std::vector<double>& ref);
double sdr_improvement_db(const std::vector<double>& est,
                          const std::vector<double>& mix,
                          const std::vector<double>& ref);

// ---- evaluation records with the zero-penalty rule ----

struct SpeakerEval {
  std::string sample_id;
  int speaker = 0;      // branch / cue index
  bool active = false;  // ground truth
  bool selected = false;
  // All four are exactly 0 for a missed active speaker or a false alarm.
  double si_sdr = 0.0, sdr = 0.0, si_sdri = 0.0, sdri = 0.0;
};

struct SampleEval {
  std::string sample_id;
  int true_count = 0;
  int estimated_count = 0;
  std::vector<SpeakerEval> speakers;  // one row per branch
};

struct EvalAggregate {
  double mean_si_sdri = 0.0;
  double mean_sdri = 0.0;
  double sca = 0.0;  // fraction with estimated_count == true_count
  int n_samples = 0;
  int n_metric_rows = 0;  // rows entering the metric means
};

// Mean over active-or-selected rows (missed/false-alarm rows contribute
// their zero penalties); SCA over all samples.
EvalAggregate aggregate_eval(const std::vector<SampleEval>& samples);

std::string eval_csv(const std::vector<SampleEval>& samples);

}  // namespace avfs

#endif  // AVFS_LOSSES_H_
