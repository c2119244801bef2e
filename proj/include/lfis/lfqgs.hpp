#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "lfis/model.hpp"
#include "lfis/nfw.hpp"
#include "lfis/rng.hpp"

namespace lfis {

// Which pair a flip adds to the tabu set. The displayed masking rule
// forbids re-assuming values already taken during the move (the default);
// the prose variant forbids the flipped variable's previous value instead.
// They differ transiently for q = 2 and substantially for q > 2.
enum class TabuSemantics { masked_assumed, masked_previous };

// Forbidden (variable, value) pairs of the current partial LF move.
// O(1) membership, cleared at each move onset.
class TabuSet {
public:
    TabuSet(int num_variables, int domain_size)
        : q_(domain_size),
          mask_(static_cast<std::size_t>(num_variables) * domain_size, 0) {}

    bool contains(int i, std::uint8_t a) const {
        return mask_[static_cast<std::size_t>(i) * q_ + a] != 0;
    }
    void insert(int i, std::uint8_t a) {
        auto& slot = mask_[static_cast<std::size_t>(i) * q_ + a];
        if (!slot) {
            slot = 1;
            entries_.emplace_back(i, a);
        }
    }
    void clear() {
        for (const auto& [i, a] : entries_)
            mask_[static_cast<std::size_t>(i) * q_ + a] = 0;
        entries_.clear();
    }
    std::size_t size() const { return entries_.size(); }

private:
    int q_;
    std::vector<std::uint8_t> mask_;
    std::vector<std::pair<std::int32_t, std::uint8_t>> entries_;
};

// One LF move: declared size gamma and the ordered (variable, value) flips
// actually taken (the final move of a run may be shorter than gamma).
struct LfMoveRecord {
    std::uint32_t gamma = 0;
    std::vector<std::pair<std::int32_t, std::uint8_t>> flips;
};

// Initial state plus the ordered LF moves; replaying the flips from x0
// reconstructs every visited state.
struct LfqgsTrajectory {
    enum class Status { complete, exhausted };

    SpinState x0;
    std::vector<LfMoveRecord> moves;
    Status status = Status::complete;

    std::uint64_t total_flips() const {
        std::uint64_t n = 0;
        for (const auto& m : moves) n += m.flips.size();
        return n;
    }
};

// Uniform integer in [gamma_min, gamma_max].
std::uint32_t sample_lf_size(std::uint32_t gamma_min, std::uint32_t gamma_max,
                             RngStream& rng);

// The paper-default move-size interval [M/8, M/6], clamped below at 1.
std::pair<std::uint32_t, std::uint32_t> default_lf_bounds(int num_variables);

// Flip distribution with tabu-masked candidates removed before the change
// normalization. Throws if every candidate is masked.
FlipDistribution tabu_flip_distribution(const PairwiseModel& model, Temperature beta,
                                        const SpinState& state, const TabuSet& tabu);

// Large-Flip Quasi-Gibbs sampler: num_samples - 1 flips grouped into LF
// moves of size sampled per move from [gamma_min, gamma_max]; within a move
// the tabu set suppresses repeat candidates. Flip selection draws from
// rng.child(0), move sizes from rng.child(1). An exhausted neighborhood is
// surfaced via the status with the trajectory so far.
LfqgsTrajectory lfqgs_run(const PairwiseModel& model, Temperature beta, SpinState x0,
                          std::uint64_t num_samples, std::uint32_t gamma_min,
                          std::uint32_t gamma_max, RngStream& rng,
                          TabuSemantics semantics = TabuSemantics::masked_assumed);

// Visits the T visited states in order as f(state, energy).
void replay_trajectory(const PairwiseModel& model, const LfqgsTrajectory& traj,
                       const std::function<void(const SpinState&, double)>& f);

// Distinct visited states, content-addressed by a collision-checked 128-bit
// digest of the value vector, with each state's energy.
class DistinctStateSet {
public:
    // Returns true when the state was not present yet.
    bool insert(const SpinState& state, double energy);

    std::size_t size() const { return states_.size(); }
    const std::vector<SpinState>& states() const { return states_; }
    const std::vector<double>& energies() const { return energies_; }

private:
    struct Digest {
        std::uint64_t a = 0;
        std::uint64_t b = 0;
        bool operator==(const Digest&) const = default;
    };
    static Digest digest_of(const SpinState& state);

    std::unordered_map<std::uint64_t, std::vector<std::uint32_t>> buckets_;
    std::vector<Digest> digests_;
    std::vector<SpinState> states_;
    std::vector<double> energies_;
};

DistinctStateSet distinct_states(const PairwiseModel& model, const LfqgsTrajectory& traj);

// Persistence: {"x0": [...], "moves": [{"gamma": g, "flips": [[i, value]...]}]}.
nlohmann::ordered_json lfqgs_trajectory_to_json(const PairwiseModel& model,
                                                const LfqgsTrajectory& traj);
LfqgsTrajectory lfqgs_trajectory_from_json(const PairwiseModel& model,
                                           const nlohmann::json& j);

} // namespace lfis
