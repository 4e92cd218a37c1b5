#include "plam/stats.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include <stdexcept>

namespace plam::stats {

double normal_cdf(double z) { return boost::math::cdf(boost::math::normal_distribution<>(), z); }

double normal_pdf(double z) { return boost::math::pdf(boost::math::normal_distribution<>(), z); }

double chi2_sf(double x, double df) {
    if (x <= 0.0) return 1.0;
    boost::math::chi_squared_distribution<> d(df);
    return boost::math::cdf(boost::math::complement(d, x));
}

double f_sf(double x, double df1, double df2) {
    if (x <= 0.0) return 1.0;
    boost::math::fisher_f_distribution<> d(df1, df2);
    return boost::math::cdf(boost::math::complement(d, x));
}

double t_sf(double x, double df) {
    boost::math::students_t_distribution<> d(df);
    return boost::math::cdf(boost::math::complement(d, x));
}

double t_two_sided_p(double t, double df) {
    return 2.0 * t_sf(std::abs(t), df);
}

double t_critical(double alpha_two_sided, double df) {
    boost::math::students_t_distribution<> d(df);
    return boost::math::quantile(d, 1.0 - alpha_two_sided / 2.0);
}

double quantile_sorted(const std::vector<double>& sorted, double p) {
    if (sorted.empty()) throw std::invalid_argument("quantile of empty vector");
    if (p <= 0.0) return sorted.front();
    if (p >= 1.0) return sorted.back();
    const double h = p * double(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(h);
    const double frac = h - double(lo);
    if (lo + 1 >= sorted.size()) return sorted.back();
    return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

double quantile(Eigen::Ref<const Eigen::VectorXd> x, double p) {
    std::vector<double> v(x.data(), x.data() + x.size());
    std::sort(v.begin(), v.end());
    return quantile_sorted(v, p);
}

}  // namespace plam::stats
