#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lfis/importance.hpp"
#include "lfis/model.hpp"
#include "lfis/smc.hpp"

namespace lfis {

// Replicated experiment output: one JSON record per replication plus a
// summary record, and the per-rep headline values for in-process use.
// Replication r always draws from RngStream(master_seed).child(r), so any
// single replication can be replayed in isolation; records are written in
// replication order and summaries contain no timing fields, which makes the
// whole output bit-identical at any worker count.
struct ExperimentResult {
    nlohmann::ordered_json records = nlohmann::ordered_json::array();
    nlohmann::ordered_json summary;
    std::vector<double> values; // log Z-hat (estimators) or energy (samplers)
    std::vector<std::pair<std::int64_t, double>> pooled_level_masses;
    std::vector<double> pooled_selected_energies;
};

ExperimentResult run_lfis_experiment(const PairwiseModel& model, double beta,
                                     const LfisConfig& config, int reps,
                                     std::uint64_t master_seed,
                                     std::optional<double> oracle_log_z,
                                     int threads = 0);

ExperimentResult run_smc_experiment(const PairwiseModel& model, double beta,
                                    const SmcConfig& config, int reps,
                                    std::uint64_t master_seed,
                                    std::optional<double> oracle_log_z,
                                    int threads = 0);

ExperimentResult run_eda_experiment(const PairwiseModel& model, double beta_start,
                                    double beta_end, std::uint64_t steps, int reps,
                                    std::uint64_t master_seed, int threads = 0);

struct LfqgsSelectConfig {
    std::uint64_t num_samples = 1000; // T
    std::uint32_t gamma_min = 0;      // 0 -> paper-default bounds
    std::uint32_t gamma_max = 0;
    TabuSemantics semantics = TabuSemantics::masked_assumed;
};

// LFQGS at the target temperature followed by one Boltzmann selection per
// run (the sampling half of the method, no importance correction). Each
// record carries a tabu-soundness scan of the run's complete LF moves.
ExperimentResult run_lfqgs_select_experiment(const PairwiseModel& model, double beta,
                                             const LfqgsSelectConfig& config, int reps,
                                             std::uint64_t master_seed, int threads = 0);

ExperimentResult run_nfw_experiment(const PairwiseModel& model, double beta,
                                    std::uint64_t num_flips, int reps,
                                    std::uint64_t master_seed, int threads = 0);

// Descriptive statistics used across summaries.
double mean_of(const std::vector<double>& xs);
double sample_variance(const std::vector<double>& xs);
double median_of(std::vector<double> xs);

} // namespace lfis
