#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

namespace plam::stats {

double normal_cdf(double z);
double normal_pdf(double z);
double chi2_sf(double x, double df);          // upper tail P(X > x)
double f_sf(double x, double df1, double df2);
double t_sf(double x, double df);             // upper tail
double t_two_sided_p(double t, double df);
double t_critical(double alpha_two_sided, double df);

// Type-7 sample quantile (linear interpolation) on a sorted vector.
double quantile_sorted(const std::vector<double>& sorted, double p);
double quantile(Eigen::Ref<const Eigen::VectorXd> x, double p);

inline double mean(Eigen::Ref<const Eigen::VectorXd> x) { return x.mean(); }

inline double variance(Eigen::Ref<const Eigen::VectorXd> x) {
    if (x.size() < 2) return 0.0;
    const double m = x.mean();
    return (x.array() - m).square().sum() / double(x.size() - 1);
}

inline double sd(Eigen::Ref<const Eigen::VectorXd> x) { return std::sqrt(variance(x)); }

}  // namespace plam::stats
