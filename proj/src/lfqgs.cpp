#include "lfis/lfqgs.hpp"

#include <cmath>
#include <stdexcept>

#include "lfis/logsum.hpp"
#include "flip_engine.hpp"

namespace lfis {

std::uint32_t sample_lf_size(std::uint32_t gamma_min, std::uint32_t gamma_max,
                             RngStream& rng) {
    if (gamma_min < 1 || gamma_min > gamma_max)
        throw std::invalid_argument("sample_lf_size: need 1 <= gamma_min <= gamma_max");
    return gamma_min +
           static_cast<std::uint32_t>(rng.uniform_below(gamma_max - gamma_min + 1ull));
}

std::pair<std::uint32_t, std::uint32_t> default_lf_bounds(int num_variables) {
    const auto lo = static_cast<std::uint32_t>(std::max(1, num_variables / 8));
    const auto hi = static_cast<std::uint32_t>(std::max(1, num_variables / 6));
    return {lo, hi};
}

FlipDistribution tabu_flip_distribution(const PairwiseModel& model, Temperature beta,
                                        const SpinState& state, const TabuSet& tabu) {
    FlipDistribution fd = flip_distribution(model, beta, state);
    NeumaierSum surviving;
    for (int i = 0; i < fd.m; ++i)
        for (int a = 0; a < fd.q; ++a) {
            auto& mass = fd.nu[static_cast<std::size_t>(i) * fd.q + a];
            if (a == state.idx[i] || tabu.contains(i, static_cast<std::uint8_t>(a))) {
                mass = 0.0;
                continue;
            }
            mass = fd.zeta_at(i, a);
            surviving.add(mass);
        }
    const double norm = surviving.value();
    if (!(norm > 0.0))
        throw std::runtime_error("tabu_flip_distribution: exhausted neighborhood");
    for (auto& mass : fd.nu) mass /= norm;
    return fd;
}

LfqgsTrajectory lfqgs_run(const PairwiseModel& model, Temperature beta, SpinState x0,
                          std::uint64_t num_samples, std::uint32_t gamma_min,
                          std::uint32_t gamma_max, RngStream& rng,
                          TabuSemantics semantics) {
    if (beta.beta < 0) throw std::invalid_argument("beta must be nonnegative");
    if (num_samples < 1) throw std::invalid_argument("lfqgs_run: need num_samples >= 1");
    if (gamma_min < 1 || gamma_min > gamma_max)
        throw std::invalid_argument("lfqgs_run: invalid LF size interval");
    const auto max_candidates =
        static_cast<std::uint64_t>(model.num_variables()) * (model.domain_size() - 1);
    if (gamma_max > max_candidates)
        throw std::invalid_argument("lfqgs_run: gamma_max exceeds (q-1)*M");
    model.validate_state(x0);

    RngStream flip_rng = rng.child(0);
    RngStream size_rng = rng.child(1);

    LfqgsTrajectory traj;
    traj.x0 = x0;
    detail::FlipEngine engine(model, std::move(x0));
    TabuSet tabu(model.num_variables(), model.domain_size());

    std::uint64_t remaining = num_samples - 1;
    while (remaining > 0) {
        const std::uint32_t gamma = sample_lf_size(gamma_min, gamma_max, size_rng);
        tabu.clear();
        LfMoveRecord move;
        move.gamma = gamma;
        for (std::uint32_t step = 0; step < gamma && remaining > 0; ++step) {
            const double total = engine.recompute_masses(
                beta.beta, [&](int i, std::uint8_t a) { return tabu.contains(i, a); });
            if (!(total > 0.0)) {
                traj.moves.push_back(std::move(move));
                traj.status = LfqgsTrajectory::Status::exhausted;
                return traj;
            }
            const auto [i, v] = engine.sample(total, flip_rng);
            const std::uint8_t previous = engine.state().idx[i];
            engine.apply(i, v);
            move.flips.emplace_back(i, v);
            tabu.insert(i, semantics == TabuSemantics::masked_assumed ? v : previous);
            --remaining;
        }
        traj.moves.push_back(std::move(move));
    }
    return traj;
}

void replay_trajectory(const PairwiseModel& model, const LfqgsTrajectory& traj,
                       const std::function<void(const SpinState&, double)>& f) {
    FieldCache cache(model, traj.x0);
    f(cache.state(), cache.energy());
    for (const auto& move : traj.moves)
        for (const auto& [i, v] : move.flips) {
            cache.apply_flip(i, v);
            f(cache.state(), cache.energy());
        }
}

DistinctStateSet::Digest DistinctStateSet::digest_of(const SpinState& state) {
    std::uint64_t a = 0x9e3779b97f4a7c15ULL;
    std::uint64_t b = 0xd1b54a32d192ed03ULL;
    for (std::uint8_t v : state.idx) {
        a = (a ^ v) * 0x100000001b3ULL;
        b = (b + v + 1) * 0xff51afd7ed558ccdULL;
    }
    return {splitmix64_mix(a), splitmix64_mix(b)};
}

bool DistinctStateSet::insert(const SpinState& state, double energy) {
    const Digest d = digest_of(state);
    auto& bucket = buckets_[d.a];
    for (std::uint32_t idx : bucket)
        if (digests_[idx] == d && states_[idx] == state) return false;
    bucket.push_back(static_cast<std::uint32_t>(states_.size()));
    digests_.push_back(d);
    states_.push_back(state);
    energies_.push_back(energy);
    return true;
}

DistinctStateSet distinct_states(const PairwiseModel& model, const LfqgsTrajectory& traj) {
    DistinctStateSet set;
    replay_trajectory(model, traj,
                      [&](const SpinState& s, double e) { set.insert(s, e); });
    return set;
}

nlohmann::ordered_json lfqgs_trajectory_to_json(const PairwiseModel& model,
                                                const LfqgsTrajectory& traj) {
    nlohmann::ordered_json j;
    auto x0 = nlohmann::ordered_json::array();
    for (auto v : traj.x0.idx) x0.push_back(model.domain()[v]);
    j["x0"] = std::move(x0);
    auto moves = nlohmann::ordered_json::array();
    for (const auto& move : traj.moves) {
        nlohmann::ordered_json mj;
        mj["gamma"] = move.gamma;
        auto flips = nlohmann::ordered_json::array();
        for (const auto& [i, v] : move.flips)
            flips.push_back({i, model.domain()[v]});
        mj["flips"] = std::move(flips);
        moves.push_back(std::move(mj));
    }
    j["moves"] = std::move(moves);
    j["complete"] = traj.status == LfqgsTrajectory::Status::complete;
    return j;
}

namespace {
std::uint8_t domain_index_of(const PairwiseModel& model, double value) {
    for (int a = 0; a < model.domain_size(); ++a)
        if (model.domain()[a] == value) return static_cast<std::uint8_t>(a);
    throw std::invalid_argument("trajectory value not in model domain");
}
} // namespace

LfqgsTrajectory lfqgs_trajectory_from_json(const PairwiseModel& model,
                                           const nlohmann::json& j) {
    LfqgsTrajectory traj;
    for (const auto& v : j.at("x0"))
        traj.x0.idx.push_back(domain_index_of(model, v.get<double>()));
    model.validate_state(traj.x0);
    for (const auto& mj : j.at("moves")) {
        LfMoveRecord move;
        move.gamma = mj.at("gamma").get<std::uint32_t>();
        for (const auto& f : mj.at("flips"))
            move.flips.emplace_back(f.at(0).get<std::int32_t>(),
                                    domain_index_of(model, f.at(1).get<double>()));
        traj.moves.push_back(std::move(move));
    }
    if (j.contains("complete") && !j["complete"].get<bool>())
        traj.status = LfqgsTrajectory::Status::exhausted;
    return traj;
}

} // namespace lfis
