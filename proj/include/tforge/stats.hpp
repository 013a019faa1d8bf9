#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tforge {

double mean(std::span<const double> xs);

// population variance (divide by n)
double variance(std::span<const double> xs);

// k-th central moment, divide by n
double central_moment(std::span<const double> xs, int k);

double median(std::vector<double> xs);

// median absolute deviation from the median (no scale factor)
double mad(const std::vector<double>& xs);

// linear-interpolation quantile at index p*(n-1), p in [0,1]
double quantile(std::vector<double> xs, double p);

double iqr(const std::vector<double>& xs);

// ranks with ties averaged, 1-based
std::vector<double> average_ranks(std::span<const double> xs);

double pearson(std::span<const double> xs, std::span<const double> ys);

// Spearman rank correlation (average ranks + Pearson)
double spearman(std::span<const double> xs, std::span<const double> ys);

// Kendall tau-b; reduces to tau-a when there are no ties
double kendall_tau(std::span<const double> xs, std::span<const double> ys);

}  // namespace tforge
