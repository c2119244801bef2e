#include "lfis/nfw.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "lfis/logsum.hpp"
#include "flip_engine.hpp"

namespace lfis {

namespace {
constexpr double kFrozenChainFloor = 1e-300;
} // namespace

FlipDistribution flip_distribution(const PairwiseModel& model, Temperature beta,
                                   const SpinState& state) {
    if (beta.beta < 0) throw std::invalid_argument("beta must be nonnegative");
    model.validate_state(state);
    const int m = model.num_variables();
    const int q = model.domain_size();
    FlipDistribution fd;
    fd.m = m;
    fd.q = q;
    fd.zeta.assign(static_cast<std::size_t>(m) * q, 0.0);
    fd.alpha.assign(m, 0.0);
    fd.nu.assign(static_cast<std::size_t>(m) * q, 0.0);

    const double inv_m = 1.0 / m;
    for (int i = 0; i < m; ++i) {
        const auto probs = model.conditional(beta, state, i);
        double ai = 0.0;
        for (int a = 0; a < q; ++a) {
            const double z = inv_m * probs[a];
            fd.zeta[static_cast<std::size_t>(i) * q + a] = z;
            if (a != state.idx[i]) ai += z;
        }
        fd.alpha[i] = ai;
    }
    NeumaierSum pf;
    for (double a : fd.alpha) pf.add(a);
    fd.p_flip = pf.value();
    if (fd.p_flip > 0) {
        for (int i = 0; i < m; ++i)
            for (int a = 0; a < q; ++a)
                if (a != state.idx[i])
                    fd.nu[static_cast<std::size_t>(i) * q + a] =
                        fd.zeta[static_cast<std::size_t>(i) * q + a] / fd.p_flip;
    }
    return fd;
}

SpinState gibbs_random_site_step(const PairwiseModel& model, Temperature beta,
                                 const SpinState& state, RngStream& rng) {
    model.validate_state(state);
    const int i = static_cast<int>(rng.uniform_below(model.num_variables()));
    const auto probs = model.conditional(beta, state, i);
    const double u = rng.uniform01();
    double acc = 0.0;
    int chosen = model.domain_size() - 1;
    for (int a = 0; a < model.domain_size(); ++a) {
        acc += probs[a];
        if (u < acc) {
            chosen = a;
            break;
        }
    }
    SpinState next = state;
    next.idx[i] = static_cast<std::uint8_t>(chosen);
    return next;
}

std::uint64_t sample_geometric(double p, RngStream& rng) {
    if (!(p > 0.0) || p > 1.0)
        throw std::invalid_argument("sample_geometric: p must be in (0, 1]");
    if (p == 1.0) {
        rng.uniform_open(); // keep the draw count schedule-independent
        return 1;
    }
    const double u = rng.uniform_open();
    const double g = std::ceil(std::log(u) / std::log1p(-p));
    if (!(g < 9.2e18)) return std::numeric_limits<std::uint64_t>::max();
    return g < 1.0 ? 1 : static_cast<std::uint64_t>(g);
}

NfwTrajectory nfw_run(const PairwiseModel& model, Temperature beta, SpinState x0,
                      std::uint64_t num_flips, RngStream& rng) {
    if (beta.beta < 0) throw std::invalid_argument("beta must be nonnegative");
    model.validate_state(x0);
    RngStream flip_rng = rng.child(0);
    RngStream time_rng = rng.child(1);

    NfwTrajectory traj;
    traj.x0 = x0;
    detail::FlipEngine engine(model, std::move(x0));
    const double inv_m = 1.0 / model.num_variables();

    for (std::uint64_t n = 0; n < num_flips; ++n) {
        const double total = engine.recompute_masses(beta.beta);
        const double p_flip = std::min(1.0, total * inv_m);
        if (p_flip < kFrozenChainFloor) {
            traj.status = NfwTrajectory::Status::absorbing;
            break;
        }
        const std::uint64_t tau = sample_geometric(p_flip, time_rng);
        const std::uint64_t prev = traj.theta.back();
        if (tau == std::numeric_limits<std::uint64_t>::max() ||
            prev > std::numeric_limits<std::uint64_t>::max() - tau) {
            traj.status = NfwTrajectory::Status::time_overflow;
            break;
        }
        const auto [i, v] = engine.sample(total, flip_rng);
        engine.apply(i, v);
        traj.flips.emplace_back(i, v);
        traj.theta.push_back(prev + tau);
    }
    return traj;
}

void for_each_expanded(const NfwTrajectory& traj, std::uint64_t max_steps,
                       const std::function<void(const SpinState&, std::uint64_t)>& f) {
    SpinState x = traj.x0;
    for (std::size_t i = 0; i <= traj.flips.size(); ++i) {
        const std::uint64_t start = traj.theta[i];
        if (start >= max_steps) break;
        const std::uint64_t end =
            i < traj.flips.size() ? std::min<std::uint64_t>(traj.theta[i + 1], max_steps)
                                  : max_steps;
        if (end > start) f(x, end - start);
        if (i < traj.flips.size()) x.idx[traj.flips[i].first] = traj.flips[i].second;
    }
}

std::vector<double> trajectory_energies(const PairwiseModel& model,
                                        const NfwTrajectory& traj) {
    std::vector<double> energies;
    energies.reserve(traj.flips.size() + 1);
    FieldCache cache(model, traj.x0);
    energies.push_back(cache.energy());
    for (const auto& [i, v] : traj.flips) {
        cache.apply_flip(i, v);
        energies.push_back(cache.energy());
    }
    return energies;
}

std::string nfw_trajectory_jsonl(const PairwiseModel& model, const NfwTrajectory& traj) {
    const auto energies = trajectory_energies(model, traj);
    std::ostringstream out;
    for (std::size_t n = 0; n < traj.flips.size(); ++n) {
        nlohmann::ordered_json rec;
        rec["n"] = n;
        rec["i"] = traj.flips[n].first;
        rec["new_value"] = model.domain()[traj.flips[n].second];
        rec["tau"] = traj.theta[n + 1] - traj.theta[n];
        rec["energy"] = energies[n + 1];
        out << rec.dump() << "\n";
    }
    return out.str();
}

AnnealSchedule linear_schedule(double beta_start, double beta_end, std::uint64_t num_steps) {
    if (beta_start < 0 || beta_end < 0)
        throw std::invalid_argument("schedule temperatures must be nonnegative");
    if (num_steps < 1) throw std::invalid_argument("schedule needs at least one step");
    const double denom = num_steps > 1 ? static_cast<double>(num_steps - 1) : 1.0;
    return [=](std::uint64_t n) {
        return beta_start + (beta_end - beta_start) * (static_cast<double>(n) / denom);
    };
}

AnnealSchedule constant_schedule(double beta) {
    return [=](std::uint64_t) { return beta; };
}

SpinState eda_run(const PairwiseModel& model, const AnnealSchedule& schedule, SpinState x0,
                  std::uint64_t num_flips, RngStream& rng,
                  std::vector<double>* energy_trace) {
    model.validate_state(x0);
    RngStream flip_rng = rng.child(0);
    detail::FlipEngine engine(model, std::move(x0));
    if (energy_trace) {
        energy_trace->clear();
        energy_trace->push_back(engine.energy());
    }
    for (std::uint64_t n = 0; n < num_flips; ++n) {
        const double gamma = schedule(n);
        if (gamma < 0) throw std::invalid_argument("schedule produced negative beta");
        const double total = engine.recompute_masses(gamma);
        if (!(total > 0.0))
            throw std::runtime_error("eda_run: no feasible flip candidate");
        const auto [i, v] = engine.sample(total, flip_rng);
        engine.apply(i, v);
        if (energy_trace) energy_trace->push_back(engine.energy());
    }
    return engine.state();
}

} // namespace lfis
