#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/normal.hpp>

namespace betaclt {

/// Neumaier-compensated running sum.
class CompensatedSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        comp_ += std::abs(sum_) >= std::abs(x) ? (sum_ - t) + x : (x - t) + sum_;
        sum_ = t;
    }
    [[nodiscard]] double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

[[nodiscard]] inline double mean_of(const std::vector<double>& x) {
    if (x.empty()) throw std::invalid_argument("mean_of: empty sample");
    CompensatedSum s;
    for (double v : x) s.add(v);
    return s.value() / static_cast<double>(x.size());
}

/// Unbiased sample variance (two-pass).
[[nodiscard]] inline double variance_of(const std::vector<double>& x) {
    if (x.size() < 2) throw std::invalid_argument("variance_of: need at least two samples");
    const double m = mean_of(x);
    CompensatedSum s;
    for (double v : x) s.add((v - m) * (v - m));
    return s.value() / static_cast<double>(x.size() - 1);
}

struct Moments {
    double mean = 0.0;
    double variance = 0.0;
    double skewness = 0.0;
    double excess_kurtosis = 0.0;
};

[[nodiscard]] inline Moments moments_of(const std::vector<double>& x) {
    Moments m;
    m.mean = mean_of(x);
    CompensatedSum s2, s3, s4;
    for (double v : x) {
        const double d = v - m.mean;
        s2.add(d * d);
        s3.add(d * d * d);
        s4.add(d * d * d * d);
    }
    const double n = static_cast<double>(x.size());
    const double c2 = s2.value() / n;
    m.variance = s2.value() / (n - 1.0);
    m.skewness = c2 > 0 ? (s3.value() / n) / std::pow(c2, 1.5) : 0.0;
    m.excess_kurtosis = c2 > 0 ? (s4.value() / n) / (c2 * c2) - 3.0 : 0.0;
    return m;
}

/// Standard error of the mean by non-overlapping batch means.
[[nodiscard]] inline double batch_means_se(const std::vector<double>& x, int batches = 32) {
    const std::size_t n = x.size();
    if (batches < 2 || n < static_cast<std::size_t>(batches)) throw std::invalid_argument("batch_means_se: too few samples for the batch count");
    const std::size_t len = n / batches;
    std::vector<double> b(batches);
    for (int k = 0; k < batches; ++k) {
        CompensatedSum s;
        for (std::size_t i = k * len; i < (k + 1) * len; ++i) s.add(x[i]);
        b[k] = s.value() / static_cast<double>(len);
    }
    return std::sqrt(variance_of(b) / batches);
}

/// Standard error of the sample variance by batch means of the squared deviations.
[[nodiscard]] inline double variance_se(const std::vector<double>& x, int batches = 32) {
    const double m = mean_of(x);
    std::vector<double> d(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) d[i] = (x[i] - m) * (x[i] - m);
    return batch_means_se(d, batches);
}

/// Integrated autocorrelation time 1 + 2Σρ_t with Sokal's self-consistent window (c = 5).
[[nodiscard]] inline double integrated_autocorr_time(const std::vector<double>& x) {
    const std::size_t n = x.size();
    if (n < 16) return 1.0;
    const double m = mean_of(x);
    double c0 = 0.0;
    for (double v : x) c0 += (v - m) * (v - m);
    c0 /= static_cast<double>(n);
    if (c0 == 0.0) return 1.0;
    double tau = 1.0;
    for (std::size_t t = 1; t < n / 2; ++t) {
        double c = 0.0;
        for (std::size_t i = 0; i + t < n; ++i) c += (x[i] - m) * (x[i + t] - m);
        tau += 2.0 * c / (static_cast<double>(n) * c0);
        if (static_cast<double>(t) >= 5.0 * tau) break;
    }
    return std::max(tau, 1.0);
}

[[nodiscard]] inline double normal_quantile(double p) {
    return boost::math::quantile(boost::math::normal_distribution<double>{}, p);
}

[[nodiscard]] inline double normal_cdf(double x) { return boost::math::cdf(boost::math::normal_distribution<double>{}, x); }

}  // namespace betaclt
