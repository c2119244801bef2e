#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lfis/model.hpp"
#include "lfis/rng.hpp"

namespace lfis {

// The zeta / alpha / p_flip / nu bundle governing one event-driven step.
// zeta and nu are stored on the full M x q candidate grid; nu carries exact
// zeros on "stay" entries (and on masked entries for the tabu variant).
// alpha and p_flip are always the unmasked kernel quantities; a tabu mask
// affects only which candidates survive into nu.
struct FlipDistribution {
    int m = 0;
    int q = 0;
    std::vector<double> zeta;
    std::vector<double> alpha;
    double p_flip = 0.0;
    std::vector<double> nu;

    double zeta_at(int i, int a) const { return zeta[static_cast<std::size_t>(i) * q + a]; }
    double nu_at(int i, int a) const { return nu[static_cast<std::size_t>(i) * q + a]; }
};

FlipDistribution flip_distribution(const PairwiseModel& model, Temperature beta,
                                   const SpinState& state);

// One conventional random-site Gibbs update: pick i uniformly, resample x_i
// from its full conditional.
SpinState gibbs_random_site_step(const PairwiseModel& model, Temperature beta,
                                 const SpinState& state, RngStream& rng);

// Geometric waiting time, tau >= 1, P(tau = k) = (1-p)^(k-1) p, by inversion.
std::uint64_t sample_geometric(double p, RngStream& rng);

// Flip-indexed trajectory: states are x0 plus one (variable, value) record
// per flip; theta[i] is the Monte Carlo time of the i-th flip (theta[0] = 0).
// State i occupies MC times [theta[i], theta[i+1]).
struct NfwTrajectory {
    enum class Status { ok, absorbing, time_overflow };

    SpinState x0;
    std::vector<std::pair<std::int32_t, std::uint8_t>> flips;
    std::vector<std::uint64_t> theta{0};
    Status status = Status::ok;

    std::uint64_t effective_length() const { return theta.back(); }
};

// N-Fold Way: per flip, sample tau ~ Geometric(p_flip), then the flip from
// nu. Waiting times come from rng.child(1) and flips from rng.child(0), so
// the flip sequence matches eda_run's under a constant schedule.
NfwTrajectory nfw_run(const PairwiseModel& model, Temperature beta, SpinState x0,
                      std::uint64_t num_flips, RngStream& rng);

// Streams the Monte-Carlo-time view of a trajectory as f(state, run_length)
// without materializing it; covers MC times [0, max_steps).
void for_each_expanded(const NfwTrajectory& traj, std::uint64_t max_steps,
                       const std::function<void(const SpinState&, std::uint64_t)>& f);

// Energies after each flip (replay helper for diagnostics and dumps).
std::vector<double> trajectory_energies(const PairwiseModel& model,
                                        const NfwTrajectory& traj);

// Debug dump: one JSON record per flip, {n, i, new_value, tau, energy}.
std::string nfw_trajectory_jsonl(const PairwiseModel& model, const NfwTrajectory& traj);

// Annealing schedule: flip index n -> inverse temperature gamma_n.
using AnnealSchedule = std::function<double(std::uint64_t)>;

AnnealSchedule linear_schedule(double beta_start, double beta_end, std::uint64_t num_steps);
AnnealSchedule constant_schedule(double beta);

// Event-driven annealing: num_flips flips, the n-th drawn from nu at
// inverse temperature gamma_n; no waiting times. Returns the final state.
SpinState eda_run(const PairwiseModel& model, const AnnealSchedule& schedule, SpinState x0,
                  std::uint64_t num_flips, RngStream& rng,
                  std::vector<double>* energy_trace = nullptr);

} // namespace lfis
