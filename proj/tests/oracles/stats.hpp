#pragma once

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

namespace pmsmc::testing {

struct Summary {
  double mean = 0.0;
  double sd = 0.0;
  double se = 0.0;
  std::size_t n = 0;
};

// Welford accumulator.
class RunningStats {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  Summary summary() const {
    Summary s;
    s.n = n_;
    s.mean = mean_;
    s.sd = n_ > 1 ? std::sqrt(m2_ / static_cast<double>(n_ - 1)) : 0.0;
    s.se = n_ > 0 ? s.sd / std::sqrt(static_cast<double>(n_)) : 0.0;
    return s;
  }

 private:
  std::size_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

inline Summary summarize(const std::vector<double>& xs) {
  RunningStats rs;
  for (double x : xs) rs.add(x);
  return rs.summary();
}

inline bool within_se(const Summary& s, double target, double k = 3.0) {
  return std::abs(s.mean - target) <= k * s.se;
}

struct PairedTest {
  double mean_diff = 0.0;
  double se = 0.0;
  double t = 0.0;
  double p_one_sided = 1.0;  // H1: mean(a - b) < 0
};

// Paired t-test of a against b with the one-sided alternative mean(a) < mean(b).
inline PairedTest paired_t_less(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const Summary s = summarize(d);
  PairedTest out;
  out.mean_diff = s.mean;
  out.se = s.se;
  if (s.se <= 0.0) {
    out.p_one_sided = s.mean < 0.0 ? 0.0 : 1.0;
    return out;
  }
  out.t = s.mean / s.se;
  const boost::math::students_t dist(static_cast<double>(d.size() - 1));
  out.p_one_sided = boost::math::cdf(dist, out.t);
  return out;
}

// Pearson chi-square goodness-of-fit p-value.
inline double chi_square_p(const std::vector<double>& observed, const std::vector<double>& expected) {
  double stat = 0.0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    const double r = observed[i] - expected[i];
    stat += r * r / expected[i];
  }
  const boost::math::chi_squared dist(static_cast<double>(observed.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

// Mean of a over mean of b with a delta-method standard error for paired samples.
inline Summary ratio_of_means(const std::vector<double>& a, const std::vector<double>& b) {
  const Summary sa = summarize(a);
  const Summary sb = summarize(b);
  const double r = sa.mean / sb.mean;
  RunningStats lin;
  for (std::size_t i = 0; i < a.size(); ++i) lin.add((a[i] - r * b[i]) / sb.mean);
  Summary out = lin.summary();
  out.mean = r;
  return out;
}

}  // namespace pmsmc::testing
