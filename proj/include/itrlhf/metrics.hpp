// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "itrlhf/checkpoint.hpp"
#include "itrlhf/errors.hpp"

namespace itrlhf {

/// Rewards r_i = R(x_i, y_i) observed on the holdout set.
struct ScoreSample {
  Eigen::VectorXd values;
  std::string source_tag;

  ScoreSample() = default;
  ScoreSample(Eigen::VectorXd v, std::string tag = {});
  Eigen::Index size() const { return values.size(); }
};

/// Zero mean, unit population variance. Throws DegenerateSampleError on a
/// constant sample.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> standardized(
    const Eigen::MatrixBase<Derived>& r) {
  using Scalar = typename Derived::Scalar;
  const auto n = static_cast<Scalar>(r.size());
  if (r.size() < 2) throw DegenerateSampleError("standardize: need at least two values");
  const Scalar mean = r.sum() / n;
  const Scalar var = (r.array() - mean).square().sum() / n;
  const Scalar sd = std::sqrt(var);
  const Scalar scale = std::max(Scalar(1), r.cwiseAbs().maxCoeff());
  if (!(sd > Scalar(1e-12) * scale)) throw DegenerateSampleError("standardize: constant sample");
  return ((r.array() - mean) / sd).matrix();
}

ScoreSample standardize(const ScoreSample& s);

/// Squared-exponential kernel exp(-(a - b)^2 / (2 h^2)).
inline double se_kernel(double a, double b, double bandwidth) {
  const double d = a - b;
  return std::exp(-d * d / (2.0 * bandwidth * bandwidth));
}

/// Unbiased MMD^2 between two equal-length samples: the two within-sample
/// terms average over j != i with 1/(n(n-1)), the cross term over all pairs
/// with 2/n^2. Can be negative.
template <typename DerivedA, typename DerivedB>
double mmd_u2(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b,
              double bandwidth) {
  const Eigen::Index n = a.size();
  if (b.size() != n) throw std::invalid_argument("mmd_u2: samples must have equal length");
  if (n < 2) throw std::invalid_argument("mmd_u2: need n >= 2");
  if (!(bandwidth > 0.0)) throw std::invalid_argument("mmd_u2: bandwidth must be > 0");
  const Eigen::ArrayXd xa = a.template cast<double>().array();
  const Eigen::ArrayXd xb = b.template cast<double>().array();
  const double c = -1.0 / (2.0 * bandwidth * bandwidth);
  double within_a = 0.0;
  double within_b = 0.0;
  double cross = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    // exp(0) == 1 exactly, so dropping the diagonal is a subtraction of 1.
    within_a += ((xa - xa(i)).square() * c).exp().sum() - 1.0;
    within_b += ((xb - xb(i)).square() * c).exp().sum() - 1.0;
    cross += ((xb - xa(i)).square() * c).exp().sum();
  }
  const double nn = static_cast<double>(n);
  return (within_a + within_b) / (nn * (nn - 1.0)) - 2.0 * cross / (nn * nn);
}

double mmd_u2(const ScoreSample& s1, const ScoreSample& s2, double bandwidth);

/// Median of the non-zero pairwise absolute differences of the pooled
/// sample (for an even count, the mean of the two middle values). Exact,
/// without materializing all pairs.
double median_bandwidth(const ScoreSample& s1, const ScoreSample& s2);

/// Standardize both samples, then MMD^2 with the median bandwidth of the
/// standardized pool unless `bandwidth` is given.
double rm_discrepancy(const ScoreSample& rm_scores, const ScoreSample& gold_scores,
                      std::optional<double> bandwidth = std::nullopt);

enum class KlAxis { ToSft, ToInit };

struct KlBucket {
  long index = 0;
  double lo = 0.0;
  double hi = 0.0;
  double mean_gold = 0.0;
  double std_gold = 0.0;
  double mean_proxy = 0.0;
  /// Mean over rows with a finite MMD; NaN if there are none.
  double mmd = 0.0;
  int count = 0;
};

/// Rows go to bucket floor(kl / width); population std of mean_gold;
/// empty buckets are omitted; buckets ascend by index.
std::vector<KlBucket> bucket_by_kl(const std::vector<CheckpointRow>& rows, double bucket_width,
                                   KlAxis axis = KlAxis::ToSft);

struct AggregateRow {
  int iteration = 0;
  KlBucket bucket;
};

/// bucket_by_kl per iteration, iterations ascending.
std::vector<AggregateRow> aggregate_by_iteration(const std::vector<CheckpointRow>& rows,
                                                 double bucket_width, KlAxis axis = KlAxis::ToSft);

/// CSV with header iteration,kl_bucket_lo,kl_bucket_hi,mean_gold,std_gold,mean_proxy,mmd,count.
std::string aggregate_csv(const std::vector<AggregateRow>& rows);

/// Fixed-format rendering used by every CSV writer ("nan" for NaN).
std::string format_double(double v);

}  // namespace itrlhf
