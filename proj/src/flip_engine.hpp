#pragma once

// Per-flip candidate machinery shared by the NFW, EDA and LFQGS drivers.
// Each step recomputes the change mass of every (variable, value) candidate
// from the cached local fields, masks whatever the caller forbids, and
// samples proportionally with a linear scan -- the O(M(q-1)) step cost the
// event-driven formulation calls for on densely coupled models.

#include <cmath>
#include <cstdint>
#include <vector>

#include "lfis/logsum.hpp"
#include "lfis/model.hpp"
#include "lfis/rng.hpp"

namespace lfis::detail {

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

class FlipEngine {
public:
    FlipEngine(const PairwiseModel& model, SpinState x0)
        : cache_(model, std::move(x0)), m_(model.num_variables()),
          q_(model.domain_size()) {
        w_.assign(q_ == 2 ? m_ : static_cast<std::size_t>(m_) * q_, 0.0);
        if (q_ > 2) logits_.assign(q_, 0.0);
    }

    const FieldCache& cache() const { return cache_; }
    const SpinState& state() const { return cache_.state(); }
    double energy() const { return cache_.energy(); }

    // Recomputes candidate change masses; masked(i, a) suppresses candidates.
    // Returns the total mass W; the marginal change probability is W / M.
    template <class MaskFn>
    double recompute_masses(double beta, MaskFn&& masked) {
        double total = 0.0;
        if (q_ == 2) {
            for (int i = 0; i < m_; ++i) {
                const std::uint8_t cur = cache_.state().idx[i];
                const std::uint8_t other = cur ^ 1u;
                double wi = 0.0;
                if (!masked(i, other)) {
                    const double z =
                        beta * (cache_.local_term(i, other) - cache_.local_term(i, cur));
                    wi = sigmoid(z);
                }
                w_[i] = wi;
                total += wi;
            }
            return total;
        }
        for (int i = 0; i < m_; ++i) {
            const std::uint8_t cur = cache_.state().idx[i];
            double zmax = -std::numeric_limits<double>::infinity();
            for (int a = 0; a < q_; ++a) {
                logits_[a] = beta * cache_.local_term(i, a);
                if (logits_[a] > zmax) zmax = logits_[a];
            }
            double norm = 0.0;
            for (int a = 0; a < q_; ++a) norm += std::exp(logits_[a] - zmax);
            double* row = w_.data() + static_cast<std::size_t>(i) * q_;
            for (int a = 0; a < q_; ++a) {
                double wa = 0.0;
                if (a != cur && !masked(i, static_cast<std::uint8_t>(a)))
                    wa = std::exp(logits_[a] - zmax) / norm;
                row[a] = wa;
                total += wa;
            }
        }
        return total;
    }

    double recompute_masses(double beta) {
        return recompute_masses(beta, [](int, std::uint8_t) { return false; });
    }

    // Samples a candidate proportionally to the current masses. `total` is
    // the value returned by recompute_masses.
    std::pair<int, std::uint8_t> sample(double total, RngStream& rng) const {
        const double threshold = rng.uniform01() * total;
        double acc = 0.0;
        if (q_ == 2) {
            int last = -1;
            for (int i = 0; i < m_; ++i) {
                if (w_[i] <= 0.0) continue;
                acc += w_[i];
                last = i;
                if (acc > threshold) break;
            }
            return {last, static_cast<std::uint8_t>(cache_.state().idx[last] ^ 1u)};
        }
        int li = -1, la = -1;
        for (int i = 0; i < m_ && acc <= threshold; ++i) {
            const double* row = w_.data() + static_cast<std::size_t>(i) * q_;
            for (int a = 0; a < q_; ++a) {
                if (row[a] <= 0.0) continue;
                acc += row[a];
                li = i;
                la = a;
                if (acc > threshold) break;
            }
        }
        return {li, static_cast<std::uint8_t>(la)};
    }

    void apply(int i, std::uint8_t value_idx) { cache_.apply_flip(i, value_idx); }

private:
    FieldCache cache_;
    int m_;
    int q_;
    std::vector<double> w_;
    std::vector<double> logits_;
};

} // namespace lfis::detail
