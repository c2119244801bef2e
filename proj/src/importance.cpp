#include "lfis/importance.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "lfis/logsum.hpp"
#include "lfis/nfw.hpp"
#include "lfis/oracle.hpp"
#include "omp_compat.hpp"

namespace lfis {

namespace {

// log pi_i(value | rest) from the local terms, stable at large |beta * h|.
double log_conditional_term(const double* terms, int q, double beta, int value) {
    if (q == 2) {
        const double z = beta * (terms[value] - terms[value ^ 1]);
        if (z >= 0.0) return -std::log1p(std::exp(-z));
        return z - std::log1p(std::exp(z));
    }
    double zmax = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < q; ++a) zmax = std::max(zmax, beta * terms[a]);
    double sum = 0.0;
    for (int a = 0; a < q; ++a) sum += std::exp(beta * terms[a] - zmax);
    return beta * terms[value] - (zmax + std::log(sum));
}

int sample_from_terms(const double* terms, int q, double beta, RngStream& rng,
                      double* scratch) {
    double zmax = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < q; ++a) {
        scratch[a] = beta * terms[a];
        if (scratch[a] > zmax) zmax = scratch[a];
    }
    double total = 0.0;
    for (int a = 0; a < q; ++a) {
        scratch[a] = std::exp(scratch[a] - zmax);
        total += scratch[a];
    }
    const double threshold = rng.uniform01() * total;
    double acc = 0.0;
    int chosen = q - 1;
    for (int a = 0; a < q; ++a) {
        acc += scratch[a];
        if (acc > threshold) {
            chosen = a;
            break;
        }
    }
    return chosen;
}

} // namespace

SweepOrder SweepOrder::identity(int num_variables) {
    SweepOrder o;
    o.order.resize(num_variables);
    std::iota(o.order.begin(), o.order.end(), 0);
    return o;
}

void SweepOrder::validate(int num_variables) const {
    if (static_cast<int>(order.size()) != num_variables)
        throw std::invalid_argument("sweep order length mismatch");
    std::vector<std::uint8_t> seen(num_variables, 0);
    for (auto i : order) {
        if (i < 0 || i >= num_variables || seen[i])
            throw std::invalid_argument("sweep order is not a permutation");
        seen[i] = 1;
    }
}

std::string SweepOrder::digest_hex() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (auto i : order) {
        h ^= static_cast<std::uint64_t>(i) + 1;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<double> selection_log_weights(const DistinctStateSet& states,
                                          Temperature beta) {
    if (states.size() == 0)
        throw std::invalid_argument("select_state: empty state set");
    std::vector<double> logw(states.size());
    for (std::size_t k = 0; k < states.size(); ++k)
        logw[k] = -beta.beta * states.energies()[k];
    const double lse = log_sum_exp(logw);
    for (auto& w : logw) w -= lse;
    return logw;
}

SelectedSample select_state(const DistinctStateSet& states, Temperature beta,
                            RngStream& rng) {
    const auto logw = selection_log_weights(states, beta);
    const double u = rng.uniform01();
    double acc = 0.0;
    std::size_t chosen = states.size() - 1;
    for (std::size_t k = 0; k < logw.size(); ++k) {
        acc += std::exp(logw[k]);
        if (u < acc) {
            chosen = k;
            break;
        }
    }
    SelectedSample sel;
    sel.state = states.states()[chosen];
    sel.energy = states.energies()[chosen];
    sel.log_unnorm = -beta.beta * sel.energy;
    return sel;
}

std::pair<SpinState, double> sweep_kernel_apply(const PairwiseModel& model,
                                                Temperature beta, const SpinState& y,
                                                const SweepOrder& order, RngStream& rng) {
    order.validate(model.num_variables());
    const int q = model.domain_size();
    FieldCache cache(model, y);
    std::vector<double> terms(q), scratch(q);
    NeumaierSum logp;
    for (int i : order.order) {
        for (int a = 0; a < q; ++a) terms[a] = cache.local_term(i, a);
        const int chosen = sample_from_terms(terms.data(), q, beta.beta, rng, scratch.data());
        logp.add(log_conditional_term(terms.data(), q, beta.beta, chosen));
        cache.apply_flip(i, static_cast<std::uint8_t>(chosen));
    }
    return {cache.state(), logp.value()};
}

double sweep_kernel_density(const PairwiseModel& model, Temperature beta,
                            const SpinState& y_new, const SpinState& y_old,
                            const SweepOrder& order) {
    order.validate(model.num_variables());
    model.validate_state(y_new);
    const int q = model.domain_size();
    FieldCache cache(model, y_old);
    std::vector<double> terms(q);
    NeumaierSum logp;
    for (int i : order.order) {
        for (int a = 0; a < q; ++a) terms[a] = cache.local_term(i, a);
        logp.add(log_conditional_term(terms.data(), q, beta.beta, y_new.idx[i]));
        cache.apply_flip(i, y_new.idx[i]);
    }
    return logp.value();
}

namespace {

// Density walk against a prebuilt anchor cache, evaluated at several kernel
// temperatures in one pass. Appends one log density per beta to `out`.
void sweep_density_multi(const PairwiseModel& model, std::span<const double> betas,
                         const SpinState& target, const FieldCache& anchor,
                         FieldCache& work, const SweepOrder& order,
                         std::vector<double>& terms, std::vector<NeumaierSum>& acc,
                         double* out) {
    const int q = model.domain_size();
    work.assign_from(anchor);
    for (auto& a : acc) a = NeumaierSum{};
    for (int i : order.order) {
        for (int a = 0; a < q; ++a) terms[a] = work.local_term(i, a);
        for (std::size_t b = 0; b < betas.size(); ++b)
            acc[b].add(log_conditional_term(terms.data(), q, betas[b], target.idx[i]));
        work.apply_flip(i, target.idx[i]);
    }
    for (std::size_t b = 0; b < betas.size(); ++b) out[b] = acc[b].value();
}

std::vector<double> mixture_rows_impl(const PairwiseModel& model,
                                      std::span<const double> kernel_betas,
                                      std::span<const SpinState> targets,
                                      std::span<const SpinState> anchors,
                                      const SweepOrder& order, int threads,
                                      bool parallel) {
    if (anchors.empty()) throw std::invalid_argument("mixture: need at least one anchor");
    if (kernel_betas.empty()) throw std::invalid_argument("mixture: need kernel betas");
    order.validate(model.num_variables());

    std::vector<FieldCache> anchor_caches;
    anchor_caches.reserve(anchors.size());
    for (const auto& a : anchors) anchor_caches.emplace_back(model, a);

    const auto n_rows = static_cast<std::int64_t>(targets.size());
    const std::size_t k = kernel_betas.size();
    const double log_components = std::log(static_cast<double>(anchors.size()) * k);
    std::vector<double> rows(targets.size());

    auto row_job = [&](std::int64_t r, FieldCache& work, std::vector<double>& terms,
                       std::vector<NeumaierSum>& acc, std::vector<double>& comps) {
        for (std::size_t j = 0; j < anchor_caches.size(); ++j)
            sweep_density_multi(model, kernel_betas, targets[r], anchor_caches[j], work,
                                order, terms, acc, comps.data() + j * k);
        rows[r] = log_sum_exp(comps) - log_components;
    };

    if (!parallel) {
        FieldCache work = anchor_caches.front();
        std::vector<double> terms(model.domain_size());
        std::vector<NeumaierSum> acc(k);
        std::vector<double> comps(anchors.size() * k);
        for (std::int64_t r = 0; r < n_rows; ++r) row_job(r, work, terms, acc, comps);
        return rows;
    }

#ifdef _OPENMP
    const int nthreads = threads > 0 ? threads : omp_get_max_threads();
#pragma omp parallel num_threads(nthreads)
    {
        FieldCache work = anchor_caches.front();
        std::vector<double> terms(model.domain_size());
        std::vector<NeumaierSum> acc(k);
        std::vector<double> comps(anchors.size() * k);
#pragma omp for schedule(dynamic, 4)
        for (std::int64_t r = 0; r < n_rows; ++r) row_job(r, work, terms, acc, comps);
    }
#else
    (void)threads;
    FieldCache work = anchor_caches.front();
    std::vector<double> terms(model.domain_size());
    std::vector<NeumaierSum> acc(k);
    std::vector<double> comps(anchors.size() * k);
    for (std::int64_t r = 0; r < n_rows; ++r) row_job(r, work, terms, acc, comps);
#endif
    return rows;
}

} // namespace

std::vector<double> mixture_log_density_rows(const PairwiseModel& model,
                                             std::span<const double> kernel_betas,
                                             std::span<const SpinState> targets,
                                             std::span<const SpinState> anchors,
                                             const SweepOrder& order, int threads) {
    return mixture_rows_impl(model, kernel_betas, targets, anchors, order, threads, true);
}

std::vector<double> mixture_log_density_rows_serial(const PairwiseModel& model,
                                                    std::span<const double> kernel_betas,
                                                    std::span<const SpinState> targets,
                                                    std::span<const SpinState> anchors,
                                                    const SweepOrder& order) {
    return mixture_rows_impl(model, kernel_betas, targets, anchors, order, 1, false);
}

double mixture_log_density(const SpinState& target,
                           std::span<const SelectedSample> sources,
                           const PairwiseModel& model, Temperature beta,
                           const SweepOrder& order) {
    std::vector<SpinState> anchors;
    anchors.reserve(sources.size());
    for (const auto& s : sources) anchors.push_back(s.state);
    const double betas[1] = {beta.beta};
    return mixture_log_density_rows_serial(model, betas, {&target, 1}, anchors, order)[0];
}

WeightedEstimate importance_estimate(std::span<const MovedSample> samples,
                                     std::span<const StateFunctional> functionals,
                                     int n) {
    if (samples.empty())
        throw std::invalid_argument("importance_estimate: empty sample list");
    if (n < 1) throw std::invalid_argument("importance_estimate: n must be positive");

    WeightedEstimate est;
    est.n = n;
    est.log_weights.reserve(samples.size());
    for (const auto& s : samples) est.log_weights.push_back(s.log_unnorm - s.log_mixture);

    // Value-ordered reductions: permuting the sample list cannot change any
    // of the returned numbers.
    std::vector<double> sorted_lw = est.log_weights;
    std::sort(sorted_lw.begin(), sorted_lw.end());
    est.log_w = log_sum_exp(sorted_lw);
    est.log_z_hat = est.log_w - std::log(static_cast<double>(n));

    NeumaierSum norm_sum, sq_sum;
    for (double lw : sorted_lw) {
        const double w = std::exp(lw - est.log_w);
        norm_sum.add(w);
        sq_sum.add(w * w);
    }
    est.ess = norm_sum.value() * norm_sum.value() / sq_sum.value();

    for (const auto& f : functionals) {
        std::vector<std::pair<double, double>> terms;
        terms.reserve(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i)
            terms.emplace_back(est.log_weights[i], f.fn(samples[i].state));
        std::sort(terms.begin(), terms.end());
        NeumaierSum num;
        for (const auto& [lw, h] : terms) num.add(std::exp(lw - est.log_w) * h);
        est.expectations[f.name] = num.value() / norm_sum.value();
    }
    return est;
}

LfisResult lfis_pipeline(const PairwiseModel& model, Temperature beta,
                         const LfisConfig& config, RngStream& rng,
                         std::span<const StateFunctional> functionals) {
    if (beta.beta < 0) throw std::invalid_argument("beta must be nonnegative");
    if (config.num_sequences < 1)
        throw std::invalid_argument("lfis_pipeline: need at least one sequence");
    if (config.samples_per_sequence < 1)
        throw std::invalid_argument("lfis_pipeline: need at least one sample per sequence");

    const int n = config.num_sequences;
    auto [gmin, gmax] = default_lf_bounds(model.num_variables());
    if (config.gamma_min > 0) gmin = config.gamma_min;
    if (config.gamma_max > 0) gmax = config.gamma_max;

    SweepOrder order = config.order.order.empty()
                           ? SweepOrder::identity(model.num_variables())
                           : config.order;
    order.validate(model.num_variables());

    std::vector<double> kernel_betas = config.kernel_betas;
    if (kernel_betas.empty()) kernel_betas.push_back(beta.beta);
    const auto n_kernels = static_cast<std::uint64_t>(kernel_betas.size());

    LfisResult result;
    result.order = order;
    result.selected.resize(n);
    result.moved.resize(n);
    std::vector<std::vector<std::pair<std::int64_t, double>>> seq_masses;
    if (config.collect_level_masses) seq_masses.resize(n);

    const auto n_i64 = static_cast<std::int64_t>(n);
#ifdef _OPENMP
    const int nthreads = config.threads > 0 ? config.threads : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(nthreads)
#endif
    for (std::int64_t l = 0; l < n_i64; ++l) {
        RngStream seq_rng = rng.child(static_cast<std::uint64_t>(l));
        SpinState x0 = uniform_random_state(model, seq_rng);
        RngStream lf_rng = seq_rng.child(1);
        const auto traj = lfqgs_run(model, beta, std::move(x0), config.samples_per_sequence,
                                    gmin, gmax, lf_rng, config.semantics);
        const auto states = distinct_states(model, traj);

        if (config.collect_level_masses) {
            const auto logw = selection_log_weights(states, beta);
            auto& masses = seq_masses[l];
            for (std::size_t k = 0; k < states.size(); ++k) {
                const double mass = std::exp(logw[k]);
                if (mass < config.level_mass_floor) continue;
                masses.emplace_back(quantize_energy(model.energy(states.states()[k])),
                                    mass);
            }
        }

        SelectedSample sel = select_state(states, beta, seq_rng);
        sel.source_sequence = static_cast<int>(l);
        if (config.polish_flips > 0) {
            RngStream polish_rng = seq_rng.child(2);
            auto polish =
                nfw_run(model, beta, sel.state, config.polish_flips, polish_rng);
            SpinState polished = polish.x0;
            for (const auto& [i, v] : polish.flips) polished.idx[i] = v;
            sel.state = std::move(polished);
            sel.energy = model.energy(sel.state);
            sel.log_unnorm = -beta.beta * sel.energy;
        }

        const std::size_t kernel_index =
            n_kernels > 1 ? seq_rng.uniform_below(n_kernels) : 0;
        auto [swept, log_own] = sweep_kernel_apply(
            model, Temperature{kernel_betas[kernel_index]}, sel.state, order, seq_rng);

        MovedSample moved;
        moved.origin = sel.state;
        moved.state = std::move(swept);
        moved.source_sequence = static_cast<int>(l);
        moved.energy = model.energy(moved.state);
        moved.log_unnorm = -beta.beta * moved.energy;
        moved.log_sweep_own = log_own;
        result.selected[l] = std::move(sel);
        result.moved[l] = std::move(moved);
    }

    std::vector<SpinState> targets, anchors;
    targets.reserve(n);
    anchors.reserve(n);
    for (const auto& s : result.moved) targets.push_back(s.state);
    for (const auto& s : result.selected) anchors.push_back(s.state);
    const auto rows =
        mixture_log_density_rows(model, kernel_betas, targets, anchors, order,
                                 config.threads);
    for (int i = 0; i < n; ++i) {
        result.moved[i].log_mixture = rows[i];
    }

    result.estimate = importance_estimate(result.moved, functionals, n);

    if (config.collect_level_masses) {
        std::unordered_map<std::int64_t, NeumaierSum> pooled;
        for (const auto& masses : seq_masses)
            for (const auto& [key, mass] : masses) pooled[key].add(mass);
        result.level_masses.reserve(pooled.size());
        for (const auto& [key, mass] : pooled)
            result.level_masses.emplace_back(key, mass.value() / n);
        std::sort(result.level_masses.begin(), result.level_masses.end());
    }
    return result;
}

} // namespace lfis
