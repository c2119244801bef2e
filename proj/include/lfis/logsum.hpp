#pragma once

#include <cmath>
#include <limits>
#include <span>

namespace lfis {

// Neumaier compensated summation. Long accumulations (enumeration sweeps,
// weight sums over >1e3 terms) go through this instead of a bare double.
struct NeumaierSum {
    double sum = 0.0;
    double comp = 0.0;

    void add(double v) {
        const double t = sum + v;
        if (std::abs(sum) >= std::abs(v)) {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }

    double value() const { return sum + comp; }
};

// Streaming log-sum-exp with a running max shift. add() order is fixed by
// the caller, so results are reproducible; merge() combines per-chunk
// partials in a fixed chunk order.
class StreamingLogSumExp {
public:
    void add(double log_term) {
        if (std::isinf(log_term) && log_term < 0) return;
        if (empty()) {
            shift_ = log_term;
            acc_.add(1.0);
            return;
        }
        if (log_term <= shift_) {
            acc_.add(std::exp(log_term - shift_));
            return;
        }
        // New max: rescale the accumulated mass.
        const double scale = std::exp(shift_ - log_term);
        acc_.sum *= scale;
        acc_.comp *= scale;
        shift_ = log_term;
        acc_.add(1.0);
    }

    void merge(const StreamingLogSumExp& other) {
        if (other.empty()) return;
        if (empty()) {
            shift_ = other.shift_;
            acc_ = other.acc_;
            return;
        }
        if (other.shift_ <= shift_) {
            acc_.add(other.acc_.value() * std::exp(other.shift_ - shift_));
        } else {
            const double scale = std::exp(shift_ - other.shift_);
            acc_.sum *= scale;
            acc_.comp *= scale;
            shift_ = other.shift_;
            acc_.add(other.acc_.value());
        }
    }

    bool empty() const { return std::isinf(shift_) && shift_ < 0; }

    double value() const {
        if (empty()) return -std::numeric_limits<double>::infinity();
        return shift_ + std::log(acc_.value());
    }

    double shift() const { return shift_; }

private:
    double shift_ = -std::numeric_limits<double>::infinity();
    NeumaierSum acc_;
};

// Two-pass log-sum-exp over a span, deterministic left-to-right.
inline double log_sum_exp(std::span<const double> xs) {
    double m = -std::numeric_limits<double>::infinity();
    for (double x : xs)
        if (x > m) m = x;
    if (std::isinf(m) && m < 0) return m;
    NeumaierSum s;
    for (double x : xs) s.add(std::exp(x - m));
    return m + std::log(s.value());
}

} // namespace lfis
