#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "lfis/model.hpp"

namespace lfis {

class BudgetExceeded : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr double kDefaultBudgetLog2 = 26.0;

// Exact probability distribution of the energy under pi. The level mode
// lists distinct energies (grouped at 1e-9 resolution) with exact masses;
// it is dropped when the level count exceeds `level_cap` (dense Gaussian
// instances at M ~ 25 have ~2^24 distinct levels). The binned view always
// exists: equal-width bins spanning [min E, max E].
struct EnergyHistogram {
    std::vector<std::pair<double, double>> levels; // (energy, mass), sorted
    bool levels_complete = true;
    double bin_lo = 0.0;
    double bin_hi = 0.0;
    std::vector<double> bin_mass;
};

// Energies are matched across computation paths at this resolution.
inline std::int64_t quantize_energy(double e) {
    return static_cast<std::int64_t>(std::llround(e * 1e9));
}

// log Z(beta) by full enumeration, chunked over the high-order variables
// and reduced in fixed chunk order (identical result at any worker count).
double exact_log_partition(const PairwiseModel& model, Temperature beta,
                           double budget_log2 = kDefaultBudgetLog2);

// Single-sweep serial reference for the above; kept for testing the chunked
// kernel. Results agree to roundoff (summation order differs).
double exact_log_partition_serial(const PairwiseModel& model, Temperature beta,
                                  double budget_log2 = kDefaultBudgetLog2);

double exact_expectation(const PairwiseModel& model, Temperature beta,
                         const std::function<double(const SpinState&)>& h,
                         double budget_log2 = kDefaultBudgetLog2);

// Single-site marginals, marginals[i][a] = P(x_i = D_a).
std::vector<std::vector<double>> exact_marginals(const PairwiseModel& model, Temperature beta,
                                                 double budget_log2 = kDefaultBudgetLog2);

EnergyHistogram exact_energy_distribution(const PairwiseModel& model, Temperature beta,
                                          int num_bins = 100,
                                          double budget_log2 = kDefaultBudgetLog2,
                                          std::size_t level_cap = std::size_t(1) << 21);

// Exact masses of the energy levels identified by `keys` (quantized
// energies), plus log Z. Streams over the state space without materializing
// the full level set, so it works at M = 25 where the level list does not.
// Levels not in `keys` contribute only to the normalizer.
std::unordered_map<std::int64_t, double> exact_level_masses(
    const PairwiseModel& model, Temperature beta, std::span<const std::int64_t> keys,
    double* log_z_out = nullptr, double budget_log2 = kDefaultBudgetLog2);

nlohmann::ordered_json oracle_record_json(const PairwiseModel& model, Temperature beta,
                                          double log_z, const EnergyHistogram* hist = nullptr);

} // namespace lfis
