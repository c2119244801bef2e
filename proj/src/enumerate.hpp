#pragma once

// State-space enumeration engine shared by the oracle operations. Binary
// models sweep in Gray-code order with incremental energy deltas; q > 2
// models use a mixed-radix odometer whose carry chain is also a sequence of
// single-digit changes. Enumeration is partitioned into chunks by fixing
// the high-order variables; the chunk layout depends only on the model, so
// merged results are identical at any worker count.

#include <bit>
#include <cmath>
#include <cstdint>
#include <vector>

#include "lfis/model.hpp"
#include "lfis/oracle.hpp"

namespace lfis::detail {

inline std::uint64_t ipow(std::uint64_t base, int exp) {
    std::uint64_t r = 1;
    while (exp-- > 0) r *= base;
    return r;
}

inline void check_budget(const PairwiseModel& model, double budget_log2) {
    const double total =
        model.num_variables() * std::log2(static_cast<double>(model.domain_size()));
    if (total > budget_log2 + 1e-9)
        throw BudgetExceeded("enumeration budget exceeded: state space is 2^" +
                             std::to_string(total) + ", budget 2^" +
                             std::to_string(budget_log2));
}

// Smallest digit count giving >= 64 chunks, or 0 when the space is small
// enough to sweep in one piece. Depends only on the model.
inline int chunk_digits_for(const PairwiseModel& model) {
    const int m = model.num_variables();
    const int q = model.domain_size();
    const double total = m * std::log2(static_cast<double>(q));
    if (total <= 20.0) return 0;
    int d = 0;
    std::uint64_t c = 1;
    while (c < 64 && d < m - 1) {
        c *= static_cast<std::uint64_t>(q);
        ++d;
    }
    return d;
}

inline std::uint64_t chunk_count(const PairwiseModel& model, int digits) {
    return ipow(model.domain_size(), digits);
}

// Visits every state of one chunk as f(state, energy). The high `digits`
// variables are fixed to the mixed-radix expansion of `chunk`.
template <class F>
void sweep_chunk(const PairwiseModel& model, int digits, std::uint64_t chunk, F&& f) {
    const int m = model.num_variables();
    const int q = model.domain_size();
    const int low = m - digits;

    SpinState x;
    x.idx.assign(m, 0);
    std::uint64_t c = chunk;
    for (int i = low; i < m; ++i) {
        x.idx[i] = static_cast<std::uint8_t>(c % q);
        c /= q;
    }

    double e = model.energy(x);
    std::vector<double> terms(q);
    f(static_cast<const SpinState&>(x), e);

    if (low == 0) return;

    if (q == 2) {
        const std::uint64_t n_states = 1ull << low;
        for (std::uint64_t n = 1; n < n_states; ++n) {
            const int b = std::countr_zero(n);
            model.local_terms(x, b, terms.data());
            const std::uint8_t nv = x.idx[b] ^ 1u;
            e -= terms[nv] - terms[x.idx[b]];
            x.idx[b] = nv;
            f(static_cast<const SpinState&>(x), e);
        }
        return;
    }

    std::uint64_t remaining = ipow(q, low) - 1;
    while (remaining--) {
        int d = 0;
        for (;;) {
            model.local_terms(x, d, terms.data());
            const std::uint8_t cur = x.idx[d];
            const std::uint8_t nv = (cur + 1 == q) ? 0 : static_cast<std::uint8_t>(cur + 1);
            e -= terms[nv] - terms[cur];
            x.idx[d] = nv;
            if (nv != 0) break;
            ++d;
        }
        f(static_cast<const SpinState&>(x), e);
    }
}

} // namespace lfis::detail
