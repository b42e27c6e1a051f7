#pragma once

#include <cmath>
#include <cstddef>

namespace innoprot {

/// Welford accumulator with Chan's pairwise merge.
struct RunningStats {
    std::size_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;

    void push(double v) {
        ++count;
        const double d = v - mean;
        mean += d / static_cast<double>(count);
        m2 += d * (v - mean);
    }

    void merge(const RunningStats& o) {
        if (o.count == 0) return;
        if (count == 0) {
            *this = o;
            return;
        }
        const double n1 = static_cast<double>(count), n2 = static_cast<double>(o.count);
        const double d = o.mean - mean;
        const double n = n1 + n2;
        mean += d * n2 / n;
        m2 += o.m2 + d * d * n1 * n2 / n;
        count += o.count;
    }

    double variance() const { return count > 1 ? m2 / static_cast<double>(count - 1) : 0.0; }
    double std_err() const { return count > 0 ? std::sqrt(variance() / static_cast<double>(count)) : 0.0; }
};

}  // namespace innoprot
