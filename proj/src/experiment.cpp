#include "lfis/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "lfis/logsum.hpp"
#include "lfis/nfw.hpp"
#include "lfis/oracle.hpp"
#include "omp_compat.hpp"

namespace lfis {

double mean_of(const std::vector<double>& xs) {
    NeumaierSum s;
    for (double x : xs) s.add(x);
    return s.value() / static_cast<double>(xs.size());
}

double sample_variance(const std::vector<double>& xs) {
    if (xs.size() < 2) return 0.0;
    const double mu = mean_of(xs);
    NeumaierSum s;
    for (double x : xs) s.add((x - mu) * (x - mu));
    return s.value() / static_cast<double>(xs.size() - 1);
}

double median_of(std::vector<double> xs) {
    std::sort(xs.begin(), xs.end());
    const std::size_t n = xs.size();
    if (n == 0) return 0.0;
    return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

namespace {

void attach_error_stats(nlohmann::ordered_json& summary, const std::vector<double>& values,
                        double oracle_log_z) {
    std::vector<double> errors;
    errors.reserve(values.size());
    for (double v : values) errors.push_back(std::abs(v - oracle_log_z));
    summary["oracle_log_Z"] = oracle_log_z;
    summary["mean_abs_error"] = mean_of(errors);
    summary["median_abs_error"] = median_of(errors);
    summary["max_abs_error"] = *std::max_element(errors.begin(), errors.end());
}

template <class RepFn>
void run_reps(int reps, int threads, RepFn&& rep_fn) {
    const auto n = static_cast<std::int64_t>(reps);
#ifdef _OPENMP
    const int nthreads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
#endif
    for (std::int64_t r = 0; r < n; ++r) rep_fn(static_cast<int>(r));
#ifndef _OPENMP
    (void)threads;
#endif
}

} // namespace

ExperimentResult run_lfis_experiment(const PairwiseModel& model, double beta,
                                     const LfisConfig& config, int reps,
                                     std::uint64_t master_seed,
                                     std::optional<double> oracle_log_z, int threads) {
    const RngStream root(master_seed);
    auto [gmin, gmax] = default_lf_bounds(model.num_variables());
    if (config.gamma_min > 0) gmin = config.gamma_min;
    if (config.gamma_max > 0) gmax = config.gamma_max;

    const StateFunctional energy_fn{"energy",
                                    [&](const SpinState& s) { return model.energy(s); }};

    std::vector<nlohmann::ordered_json> recs(reps);
    std::vector<double> values(reps), esses(reps);
    std::vector<std::vector<std::pair<std::int64_t, double>>> masses(reps);
    std::vector<std::vector<double>> sel_energies(reps);

    run_reps(reps, threads, [&](int r) {
        RngStream rep_rng = root.child(r);
        const auto res =
            lfis_pipeline(model, Temperature{beta}, config, rep_rng, {&energy_fn, 1});
        values[r] = res.estimate.log_z_hat;
        esses[r] = res.estimate.ess;
        if (config.collect_level_masses) masses[r] = res.level_masses;

        auto& rec = recs[r];
        rec["record_type"] = "replication";
        rec["method"] = "lfis";
        rec["rep"] = r;
        rec["seed"] = rep_rng.seed_key();
        rec["beta"] = beta;
        rec["N"] = config.num_sequences;
        rec["T"] = config.samples_per_sequence;
        rec["log_Z_hat"] = res.estimate.log_z_hat;
        rec["log_W"] = res.estimate.log_w;
        rec["ess"] = res.estimate.ess;
        rec["expectations"] = res.estimate.expectations;
        rec["sweep_order_digest"] = res.order.digest_hex();
        rec["model_digest"] = model.digest_hex();
        if (oracle_log_z) rec["abs_error"] = std::abs(values[r] - *oracle_log_z);
        nlohmann::ordered_json cfg;
        cfg["N"] = config.num_sequences;
        cfg["T"] = config.samples_per_sequence;
        cfg["gamma_min"] = gmin;
        cfg["gamma_max"] = gmax;
        cfg["tabu_semantics"] =
            config.semantics == TabuSemantics::masked_assumed ? "masked-assumed"
                                                              : "masked-previous";
        cfg["kernel_betas"] =
            config.kernel_betas.empty() ? std::vector<double>{beta} : config.kernel_betas;
        cfg["polish_flips"] = config.polish_flips;
        rec["config"] = std::move(cfg);
        auto se = nlohmann::ordered_json::array();
        auto me = nlohmann::ordered_json::array();
        std::vector<double> sel(res.selected.size());
        for (std::size_t i = 0; i < res.selected.size(); ++i) {
            sel[i] = res.selected[i].energy;
            se.push_back(res.selected[i].energy);
            me.push_back(res.moved[i].energy);
        }
        sel_energies[r] = std::move(sel);
        rec["selected_energies"] = std::move(se);
        rec["moved_energies"] = std::move(me);
    });

    ExperimentResult out;
    out.values = values;
    for (auto& rec : recs) out.records.push_back(std::move(rec));
    for (auto& se : sel_energies)
        out.pooled_selected_energies.insert(out.pooled_selected_energies.end(), se.begin(),
                                            se.end());
    if (config.collect_level_masses) {
        std::unordered_map<std::int64_t, NeumaierSum> pooled;
        for (const auto& per_rep : masses)
            for (const auto& [key, mass] : per_rep) pooled[key].add(mass);
        out.pooled_level_masses.reserve(pooled.size());
        for (const auto& [key, mass] : pooled)
            out.pooled_level_masses.emplace_back(key, mass.value() / reps);
        std::sort(out.pooled_level_masses.begin(), out.pooled_level_masses.end());
    }

    auto& s = out.summary;
    s["record_type"] = "summary";
    s["method"] = "lfis";
    s["beta"] = beta;
    s["reps"] = reps;
    s["N"] = config.num_sequences;
    s["T"] = config.samples_per_sequence;
    s["gamma_min"] = gmin;
    s["gamma_max"] = gmax;
    s["master_seed"] = master_seed;
    s["model_digest"] = model.digest_hex();
    s["mean_log_Z_hat"] = mean_of(values);
    s["variance_log_Z_hat"] = sample_variance(values);
    s["mean_ess"] = mean_of(esses);
    if (oracle_log_z) attach_error_stats(s, values, *oracle_log_z);
    return out;
}

ExperimentResult run_smc_experiment(const PairwiseModel& model, double beta,
                                    const SmcConfig& config, int reps,
                                    std::uint64_t master_seed,
                                    std::optional<double> oracle_log_z, int threads) {
    const RngStream root(master_seed);
    std::vector<nlohmann::ordered_json> recs(reps);
    std::vector<double> values(reps);

    run_reps(reps, threads, [&](int r) {
        RngStream rep_rng = root.child(r);
        const auto res = smc_run(model, Temperature{beta}, config, rep_rng);
        values[r] = res.log_z_hat;
        auto& rec = recs[r];
        rec["record_type"] = "replication";
        rec["method"] = "smc";
        rec["rep"] = r;
        rec["seed"] = rep_rng.seed_key();
        rec["beta"] = beta;
        rec["log_Z_hat"] = res.log_z_hat;
        rec["resamples"] = res.resample_count;
        rec["final_ess"] = res.final_ess;
        rec["model_digest"] = model.digest_hex();
        if (oracle_log_z) rec["abs_error"] = std::abs(values[r] - *oracle_log_z);
        nlohmann::ordered_json cfg;
        cfg["num_particles"] = config.num_particles;
        cfg["num_levels"] = config.num_levels;
        cfg["resample_threshold"] = config.resample_threshold;
        cfg["gibbs_moves_per_level"] = config.gibbs_moves_per_level;
        rec["config"] = std::move(cfg);
    });

    ExperimentResult out;
    out.values = values;
    for (auto& rec : recs) out.records.push_back(std::move(rec));
    auto& s = out.summary;
    s["record_type"] = "summary";
    s["method"] = "smc";
    s["beta"] = beta;
    s["reps"] = reps;
    s["num_particles"] = config.num_particles;
    s["num_levels"] = config.num_levels;
    s["master_seed"] = master_seed;
    s["model_digest"] = model.digest_hex();
    s["mean_log_Z_hat"] = mean_of(values);
    s["variance_log_Z_hat"] = sample_variance(values);
    if (oracle_log_z) attach_error_stats(s, values, *oracle_log_z);
    return out;
}

ExperimentResult run_eda_experiment(const PairwiseModel& model, double beta_start,
                                    double beta_end, std::uint64_t steps, int reps,
                                    std::uint64_t master_seed, int threads) {
    const RngStream root(master_seed);
    std::vector<nlohmann::ordered_json> recs(reps);
    std::vector<double> values(reps);

    run_reps(reps, threads, [&](int r) {
        RngStream rep_rng = root.child(r);
        SpinState x0 = uniform_random_state(model, rep_rng);
        RngStream run_rng = rep_rng.child(1);
        const auto schedule = linear_schedule(beta_start, beta_end, steps);
        const SpinState final_state =
            eda_run(model, schedule, std::move(x0), steps, run_rng);
        values[r] = model.energy(final_state);
        auto& rec = recs[r];
        rec["record_type"] = "replication";
        rec["method"] = "eda";
        rec["rep"] = r;
        rec["seed"] = rep_rng.seed_key();
        rec["beta_start"] = beta_start;
        rec["beta_end"] = beta_end;
        rec["steps"] = steps;
        rec["energy"] = values[r];
        rec["model_digest"] = model.digest_hex();
    });

    ExperimentResult out;
    out.values = values;
    for (auto& rec : recs) out.records.push_back(std::move(rec));
    auto& s = out.summary;
    s["record_type"] = "summary";
    s["method"] = "eda";
    s["beta_start"] = beta_start;
    s["beta_end"] = beta_end;
    s["beta"] = beta_end;
    s["steps"] = steps;
    s["reps"] = reps;
    s["master_seed"] = master_seed;
    s["model_digest"] = model.digest_hex();
    s["mean_energy"] = mean_of(values);
    s["energy_variance"] = sample_variance(values);
    s["min_energy"] = *std::min_element(values.begin(), values.end());
    s["max_energy"] = *std::max_element(values.begin(), values.end());
    return out;
}

ExperimentResult run_lfqgs_select_experiment(const PairwiseModel& model, double beta,
                                             const LfqgsSelectConfig& config, int reps,
                                             std::uint64_t master_seed, int threads) {
    const RngStream root(master_seed);
    auto [gmin, gmax] = default_lf_bounds(model.num_variables());
    if (config.gamma_min > 0) gmin = config.gamma_min;
    if (config.gamma_max > 0) gmax = config.gamma_max;

    std::vector<nlohmann::ordered_json> recs(reps);
    std::vector<double> values(reps);
    std::vector<std::uint64_t> duplicates(reps, 0);

    run_reps(reps, threads, [&](int r) {
        RngStream rep_rng = root.child(r);
        SpinState x0 = uniform_random_state(model, rep_rng);
        RngStream run_rng = rep_rng.child(1);
        const auto traj = lfqgs_run(model, Temperature{beta}, std::move(x0),
                                    config.num_samples, gmin, gmax, run_rng,
                                    config.semantics);
        const auto states = distinct_states(model, traj);
        const auto sel = select_state(states, Temperature{beta}, rep_rng);
        values[r] = sel.energy;

        // Tabu soundness: no (variable, value) pair may repeat in a move.
        std::uint64_t dups = 0;
        for (const auto& move : traj.moves) {
            TabuSet seen(model.num_variables(), model.domain_size());
            for (const auto& [i, v] : move.flips) {
                if (seen.contains(i, v)) ++dups;
                seen.insert(i, v);
            }
        }
        duplicates[r] = dups;

        auto& rec = recs[r];
        rec["record_type"] = "replication";
        rec["method"] = "lfqgs";
        rec["rep"] = r;
        rec["seed"] = rep_rng.seed_key();
        rec["beta"] = beta;
        rec["T"] = config.num_samples;
        rec["gamma_min"] = gmin;
        rec["gamma_max"] = gmax;
        rec["energy"] = sel.energy;
        rec["distinct_states"] = states.size();
        rec["total_flips"] = traj.total_flips();
        rec["tabu_duplicates"] = dups;
        rec["complete"] = traj.status == LfqgsTrajectory::Status::complete;
        rec["model_digest"] = model.digest_hex();
    });

    ExperimentResult out;
    out.values = values;
    for (auto& rec : recs) out.records.push_back(std::move(rec));
    std::uint64_t total_dups = 0;
    for (auto d : duplicates) total_dups += d;
    auto& s = out.summary;
    s["record_type"] = "summary";
    s["method"] = "lfqgs";
    s["beta"] = beta;
    s["T"] = config.num_samples;
    s["gamma_min"] = gmin;
    s["gamma_max"] = gmax;
    s["reps"] = reps;
    s["master_seed"] = master_seed;
    s["model_digest"] = model.digest_hex();
    s["mean_energy"] = mean_of(values);
    s["energy_variance"] = sample_variance(values);
    s["min_energy"] = *std::min_element(values.begin(), values.end());
    s["max_energy"] = *std::max_element(values.begin(), values.end());
    s["tabu_duplicates"] = total_dups;
    return out;
}

ExperimentResult run_nfw_experiment(const PairwiseModel& model, double beta,
                                    std::uint64_t num_flips, int reps,
                                    std::uint64_t master_seed, int threads) {
    const RngStream root(master_seed);
    std::vector<nlohmann::ordered_json> recs(reps);
    std::vector<double> values(reps);

    run_reps(reps, threads, [&](int r) {
        RngStream rep_rng = root.child(r);
        SpinState x0 = uniform_random_state(model, rep_rng);
        RngStream run_rng = rep_rng.child(1);
        const auto traj = nfw_run(model, Temperature{beta}, std::move(x0), num_flips, run_rng);
        SpinState final_state = traj.x0;
        for (const auto& [i, v] : traj.flips) final_state.idx[i] = v;
        values[r] = model.energy(final_state);
        auto& rec = recs[r];
        rec["record_type"] = "replication";
        rec["method"] = "nfw";
        rec["rep"] = r;
        rec["seed"] = rep_rng.seed_key();
        rec["beta"] = beta;
        rec["flips"] = num_flips;
        rec["energy"] = values[r];
        rec["effective_length"] = traj.effective_length();
        rec["status"] = traj.status == NfwTrajectory::Status::ok ? "ok"
                        : traj.status == NfwTrajectory::Status::absorbing
                            ? "absorbing"
                            : "time_overflow";
        rec["model_digest"] = model.digest_hex();
    });

    ExperimentResult out;
    out.values = values;
    for (auto& rec : recs) out.records.push_back(std::move(rec));
    auto& s = out.summary;
    s["record_type"] = "summary";
    s["method"] = "nfw";
    s["beta"] = beta;
    s["flips"] = num_flips;
    s["reps"] = reps;
    s["master_seed"] = master_seed;
    s["model_digest"] = model.digest_hex();
    s["mean_energy"] = mean_of(values);
    s["energy_variance"] = sample_variance(values);
    return out;
}

} // namespace lfis
