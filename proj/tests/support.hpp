#pragma once

#include "mobnp/core_model.hpp"
#include "mobnp/partition_priors.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <vector>

namespace mobnp::testing {

/// Total variation between two distributions over the same keys.
template <typename Key>
double total_variation(const std::map<Key, double>& p, const std::map<Key, double>& q) {
    std::map<Key, double> diff;
    for (const auto& [k, v] : p)
        diff[k] += v;
    for (const auto& [k, v] : q)
        diff[k] -= v;
    double tv = 0.0;
    for (const auto& [k, v] : diff)
        tv += std::abs(v);
    return 0.5 * tv;
}

template <typename Key>
std::map<Key, double> normalize_counts(const std::map<Key, long>& counts) {
    double total = 0.0;
    for (const auto& [k, c] : counts)
        total += static_cast<double>(c);
    std::map<Key, double> out;
    for (const auto& [k, c] : counts)
        out[k] = static_cast<double>(c) / total;
    return out;
}

/// Written out from the formula, independent of the library's density code.
inline double normal_log_density(double z, double mean, double sd) {
    const double r = (z - mean) / sd;
    return -0.5 * r * r - std::log(sd) - 0.5 * std::log(2.0 * std::numbers::pi);
}

/// Single-platform dataset from a matrix.
inline TransformedDataset dataset_of(const std::vector<MatrixXd>& platforms) {
    TransformedDataset data;
    for (std::size_t t = 0; t < platforms.size(); ++t) {
        PlatformMatrix pm;
        pm.platform_id = static_cast<int>(t);
        pm.values = platforms[t];
        for (Eigen::Index i = 0; i < pm.values.rows(); ++i)
            pm.patient_ids.push_back("s" + std::to_string(i));
        for (Eigen::Index j = 0; j < pm.values.cols(); ++j)
            pm.probe_names.push_back("p" + std::to_string(t) + "_" + std::to_string(j));
        data.platforms.push_back(std::move(pm));
    }
    return data;
}

/// Kolmogorov-Smirnov statistic of a sample against U(0,1).
inline double ks_uniform(std::vector<double> x) {
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        d = std::max({d, (i + 1) / n - x[i], x[i] - i / n});
    return d;
}

} // namespace mobnp::testing
