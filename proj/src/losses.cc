// Copyright 2026 AVFSNet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "avfs/losses.h"

#include <cmath>
#include <sstream>

#include "avfs/ops.h"

namespace avfs {

namespace {
constexpr double kLog10Scale = 8.685889638065035;  // 20 / ln(10)

double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}
}  // namespace

Tensor si_snr(const Tensor& est, const Tensor& ref) {
  AVFS_CHECK(same_shape(est.shape(), ref.shape()), "si_snr: length mismatch ",
             shape_str(est.shape()), " vs ", shape_str(ref.shape()));
  Tensor ref_energy = dot(ref, ref);
  if (ref_energy.item() == 0.0)
    throw ContractError("si_snr: all-zero reference is undefined");
  Tensor alpha = div(dot(est, ref), ref_energy);
  Tensor target = mul_scalar(ref, alpha);
  Tensor residual = sub(est, target);
  Tensor num = add_const(sqrt_(dot(target, target)), kRatioEps);
  Tensor den = add_const(sqrt_(dot(residual, residual)), kRatioEps);
  Tensor db = scale(sub(log_(num), log_(den)), kLog10Scale);
  return clamp(db, -kDbClamp, kDbClamp);
}

Tensor si_snr_loss(const Tensor& est, const Tensor& ref) {
  return neg(si_snr(est, ref));
}

Tensor bce(const Tensor& p, double label) {
  AVFS_CHECK(p.numel() == 1, "bce: probability must be scalar");
  AVFS_CHECK(label == 0.0 || label == 1.0, "bce: label must be 0 or 1");
  Tensor pc = clamp(p, 1e-7, 1.0 - 1e-7);
  Tensor one_minus = sub(Tensor::scalar(1.0), pc);
  return neg(add(scale(log_(pc), label), scale(log_(one_minus), 1.0 - label)));
}

Tensor joint_loss(const Tensor& l_sisnr, const Tensor& l_ce,
                  const Tensor& log_sigma1, const Tensor& log_sigma2) {
  // 1/(2 sigma^2) = 0.5 * exp(-2 log_sigma)
  Tensor w1 = scale(exp_(scale(log_sigma1, -2.0)), 0.5);
  Tensor w2 = scale(exp_(scale(log_sigma2, -2.0)), 0.5);
  Tensor weighted = add(mul(l_sisnr, w1), mul(l_ce, w2));
  return add(weighted, add(log_sigma1, log_sigma2));
}

double si_sdr_db(const std::vector<double>& est, const std::vector<double>& ref) {
  AVFS_CHECK(est.size() == ref.size(), "si_sdr: length mismatch");
  double re = energy(ref);
  if (re == 0.0) throw ContractError("si_sdr: all-zero reference is undefined");
  double cross = 0.0;
  for (size_t i = 0; i < est.size(); ++i) cross += est[i] * ref[i];
  double alpha = cross / re;
  double tnorm = 0.0, rnorm = 0.0;
  for (size_t i = 0; i < est.size(); ++i) {
    double t = alpha * ref[i];
    tnorm += t * t;
    double r = est[i] - t;
    rnorm += r * r;
  }
  double db = kLog10Scale * (std::log(std::sqrt(tnorm) + kRatioEps) -
                             std::log(std::sqrt(rnorm) + kRatioEps));
  return std::min(std::max(db, -kDbClamp), kDbClamp);
}

double sdr_db(const std::vector<double>& est, const std::vector<double>& ref) {
  AVFS_CHECK(est.size() == ref.size(), "sdr: length mismatch");
  double re = energy(ref);
  if (re == 0.0) throw ContractError("sdr: all-zero reference is undefined");
  double err = 0.0;
  for (size_t i = 0; i < est.size(); ++i) {
    double d = est[i] - ref[i];
    err += d * d;
  }
  double db = 10.0 / std::log(10.0) * std::log(re / (err + kRatioEps));
  return std::min(std::max(db, -kDbClamp), kDbClamp);
}

double si_sdr_improvement_db(const std::vector<double>& est,
                             const std::vector<double>& mix,
                             const std::vector<double>& ref) {
  return si_sdr_db(est, ref) - si_sdr_db(mix, ref);
}

double sdr_improvement_db(const std::vector<double>& est,
                          const std::vector<double>& mix,
                          const std::vector<double>& ref) {
  return sdr_db(est, ref) - sdr_db(mix, ref);
}

EvalAggregate aggregate_eval(const std::vector<SampleEval>& samples) {
  EvalAggregate agg;
  agg.n_samples = static_cast<int>(samples.size());
  double sum_si = 0.0, sum_sdr = 0.0;
  int rows = 0, correct = 0;
  for (const auto& s : samples) {
    if (s.estimated_count == s.true_count) ++correct;
    for (const auto& spk : s.speakers) {
      if (!spk.active && !spk.selected) continue;  // no metric row
      sum_si += spk.si_sdri;
      sum_sdr += spk.sdri;
      ++rows;
    }
  }
  agg.n_metric_rows = rows;
  agg.mean_si_sdri = rows ? sum_si / rows : 0.0;
  agg.mean_sdri = rows ? sum_sdr / rows : 0.0;
  agg.sca = samples.empty() ? 0.0 : static_cast<double>(correct) / agg.n_samples;
  return agg;
}

std::string eval_csv(const std::vector<SampleEval>& samples) {
  std::ostringstream os;
  os.precision(12);
  os << "sample_id,speaker_id,active,selected,si_sdr,sdr,si_sdri,sdri\n";
  for (const auto& s : samples)
    for (const auto& spk : s.speakers)
      os << s.sample_id << "," << spk.speaker << "," << (spk.active ? 1 : 0)
         << "," << (spk.selected ? 1 : 0) << "," << spk.si_sdr << ","
         << spk.sdr << "," << spk.si_sdri << "," << spk.sdri << "\n";
  return os.str();
}

}  // namespace avfs
