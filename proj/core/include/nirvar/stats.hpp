#pragma once

#include <functional>
#include <span>
#include <vector>

namespace nirvar::stats {

/// sup_x |F(x) - F_n(x)| with F_n(x) = k/n, the number of points <= x over n.
double ks_statistic(std::span<const double> sample, const std::function<double(double)>& cdf);

double normal_cdf(double x, double mean = 0.0, double sd = 1.0);

double mean(std::span<const double> x);
/// Sample standard deviation (denominator n - 1).
double sample_stdev(std::span<const double> x);
double median(std::vector<double> x);

/// Average ranks (1-based), ties share their mean rank.
std::vector<double> ranks(std::span<const double> x);
double spearman(std::span<const double> x, std::span<const double> y);

}  // namespace nirvar::stats
