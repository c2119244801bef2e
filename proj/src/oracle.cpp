#include "lfis/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <unordered_set>

#include "lfis/logsum.hpp"
#include "enumerate.hpp"

namespace lfis {

namespace {

struct SweepSummary {
    StreamingLogSumExp lse;
    double min_e = std::numeric_limits<double>::infinity();
    double max_e = -std::numeric_limits<double>::infinity();
};

SweepSummary enumerate_summary(const PairwiseModel& model, Temperature beta, int digits) {
    const auto nchunks = static_cast<std::int64_t>(detail::chunk_count(model, digits));
    std::vector<SweepSummary> parts(nchunks);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t c = 0; c < nchunks; ++c) {
        auto& part = parts[c];
        detail::sweep_chunk(model, digits, static_cast<std::uint64_t>(c),
                            [&](const SpinState&, double e) {
                                part.lse.add(-beta.beta * e);
                                if (e < part.min_e) part.min_e = e;
                                if (e > part.max_e) part.max_e = e;
                            });
    }
    SweepSummary total;
    for (const auto& part : parts) {
        total.lse.merge(part.lse);
        total.min_e = std::min(total.min_e, part.min_e);
        total.max_e = std::max(total.max_e, part.max_e);
    }
    return total;
}

} // namespace

double exact_log_partition(const PairwiseModel& model, Temperature beta, double budget_log2) {
    if (beta.beta < 0) throw std::invalid_argument("beta must be nonnegative");
    detail::check_budget(model, budget_log2);
    return enumerate_summary(model, beta, detail::chunk_digits_for(model)).lse.value();
}

double exact_log_partition_serial(const PairwiseModel& model, Temperature beta,
                                  double budget_log2) {
    if (beta.beta < 0) throw std::invalid_argument("beta must be nonnegative");
    detail::check_budget(model, budget_log2);
    StreamingLogSumExp lse;
    detail::sweep_chunk(model, 0, 0,
                        [&](const SpinState&, double e) { lse.add(-beta.beta * e); });
    return lse.value();
}

double exact_expectation(const PairwiseModel& model, Temperature beta,
                         const std::function<double(const SpinState&)>& h,
                         double budget_log2) {
    if (beta.beta < 0) throw std::invalid_argument("beta must be nonnegative");
    detail::check_budget(model, budget_log2);
    const int digits = detail::chunk_digits_for(model);
    const SweepSummary summary = enumerate_summary(model, beta, digits);
    const double shift = -beta.beta * summary.min_e; // max of log pi-tilde

    const auto nchunks = static_cast<std::int64_t>(detail::chunk_count(model, digits));
    std::vector<NeumaierSum> nums(nchunks), dens(nchunks);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t c = 0; c < nchunks; ++c) {
        detail::sweep_chunk(model, digits, static_cast<std::uint64_t>(c),
                            [&](const SpinState& x, double e) {
                                const double w = std::exp(-beta.beta * e - shift);
                                nums[c].add(h(x) * w);
                                dens[c].add(w);
                            });
    }
    NeumaierSum num, den;
    for (std::int64_t c = 0; c < nchunks; ++c) {
        num.add(nums[c].value());
        den.add(dens[c].value());
    }
    return num.value() / den.value();
}

std::vector<std::vector<double>> exact_marginals(const PairwiseModel& model, Temperature beta,
                                                 double budget_log2) {
    if (beta.beta < 0) throw std::invalid_argument("beta must be nonnegative");
    detail::check_budget(model, budget_log2);
    const int m = model.num_variables();
    const int q = model.domain_size();
    const int digits = detail::chunk_digits_for(model);
    const SweepSummary summary = enumerate_summary(model, beta, digits);
    const double shift = -beta.beta * summary.min_e;

    const auto nchunks = static_cast<std::int64_t>(detail::chunk_count(model, digits));
    std::vector<std::vector<NeumaierSum>> accs(nchunks);
    std::vector<NeumaierSum> dens(nchunks);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t c = 0; c < nchunks; ++c) {
        accs[c].assign(static_cast<std::size_t>(m) * q, NeumaierSum{});
        detail::sweep_chunk(model, digits, static_cast<std::uint64_t>(c),
                            [&](const SpinState& x, double e) {
                                const double w = std::exp(-beta.beta * e - shift);
                                for (int i = 0; i < m; ++i)
                                    accs[c][static_cast<std::size_t>(i) * q + x.idx[i]].add(w);
                                dens[c].add(w);
                            });
    }
    NeumaierSum den;
    std::vector<NeumaierSum> total(static_cast<std::size_t>(m) * q);
    for (std::int64_t c = 0; c < nchunks; ++c) {
        den.add(dens[c].value());
        for (std::size_t k = 0; k < total.size(); ++k) total[k].add(accs[c][k].value());
    }
    std::vector<std::vector<double>> marginals(m, std::vector<double>(q));
    for (int i = 0; i < m; ++i)
        for (int a = 0; a < q; ++a)
            marginals[i][a] = total[static_cast<std::size_t>(i) * q + a].value() / den.value();
    return marginals;
}

EnergyHistogram exact_energy_distribution(const PairwiseModel& model, Temperature beta,
                                          int num_bins, double budget_log2,
                                          std::size_t level_cap) {
    if (beta.beta < 0) throw std::invalid_argument("beta must be nonnegative");
    if (num_bins < 1) throw std::invalid_argument("need at least one bin");
    detail::check_budget(model, budget_log2);
    const int digits = detail::chunk_digits_for(model);
    const SweepSummary summary = enumerate_summary(model, beta, digits);
    const double shift = -beta.beta * summary.min_e;
    const double lo = summary.min_e;
    const double hi = summary.max_e;
    const double width = hi > lo ? (hi - lo) / num_bins : 1.0;

    const auto nchunks = static_cast<std::int64_t>(detail::chunk_count(model, digits));
    struct Level {
        double energy;
        NeumaierSum mass;
    };
    std::vector<std::map<std::int64_t, Level>> level_parts(nchunks);
    std::vector<std::vector<NeumaierSum>> bin_parts(nchunks);
    std::vector<NeumaierSum> dens(nchunks);
    std::vector<std::uint8_t> overflow(nchunks, 0);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t c = 0; c < nchunks; ++c) {
        bin_parts[c].assign(num_bins, NeumaierSum{});
        auto& levels = level_parts[c];
        detail::sweep_chunk(
            model, digits, static_cast<std::uint64_t>(c), [&](const SpinState&, double e) {
                const double w = std::exp(-beta.beta * e - shift);
                int bin = static_cast<int>((e - lo) / width);
                bin = std::clamp(bin, 0, num_bins - 1);
                bin_parts[c][bin].add(w);
                dens[c].add(w);
                if (!overflow[c]) {
                    auto [it, inserted] = levels.try_emplace(quantize_energy(e), Level{e, {}});
                    it->second.mass.add(w);
                    if (inserted && levels.size() > level_cap) overflow[c] = 1;
                }
            });
    }

    NeumaierSum den;
    for (const auto& d : dens) den.add(d.value());
    const double total = den.value();

    EnergyHistogram hist;
    hist.bin_lo = lo;
    hist.bin_hi = hi;
    hist.bin_mass.assign(num_bins, 0.0);
    for (int b = 0; b < num_bins; ++b) {
        NeumaierSum s;
        for (const auto& part : bin_parts) s.add(part[b].value());
        hist.bin_mass[b] = s.value() / total;
    }

    bool complete = true;
    for (auto f : overflow) complete = complete && !f;
    std::map<std::int64_t, Level> merged;
    if (complete) {
        for (auto& part : level_parts)
            for (auto& [key, lvl] : part) {
                auto [it, inserted] = merged.try_emplace(key, Level{lvl.energy, {}});
                it->second.mass.add(lvl.mass.value());
                if (inserted && merged.size() > level_cap) {
                    complete = false;
                    break;
                }
            }
    }
    hist.levels_complete = complete;
    if (complete) {
        hist.levels.reserve(merged.size());
        for (const auto& [key, lvl] : merged)
            hist.levels.emplace_back(lvl.energy, lvl.mass.value() / total);
    }
    return hist;
}

std::unordered_map<std::int64_t, double> exact_level_masses(
    const PairwiseModel& model, Temperature beta, std::span<const std::int64_t> keys,
    double* log_z_out, double budget_log2) {
    if (beta.beta < 0) throw std::invalid_argument("beta must be nonnegative");
    detail::check_budget(model, budget_log2);
    const std::unordered_set<std::int64_t> wanted(keys.begin(), keys.end());
    const int digits = detail::chunk_digits_for(model);
    const SweepSummary summary = enumerate_summary(model, beta, digits);
    const double shift = -beta.beta * summary.min_e;
    if (log_z_out) *log_z_out = summary.lse.value();

    const auto nchunks = static_cast<std::int64_t>(detail::chunk_count(model, digits));
    std::vector<std::unordered_map<std::int64_t, NeumaierSum>> parts(nchunks);
    std::vector<NeumaierSum> dens(nchunks);
#pragma omp parallel for schedule(dynamic)
    for (std::int64_t c = 0; c < nchunks; ++c) {
        detail::sweep_chunk(model, digits, static_cast<std::uint64_t>(c),
                            [&](const SpinState&, double e) {
                                const double w = std::exp(-beta.beta * e - shift);
                                dens[c].add(w);
                                const auto key = quantize_energy(e);
                                if (wanted.contains(key)) parts[c][key].add(w);
                            });
    }
    NeumaierSum den;
    for (const auto& d : dens) den.add(d.value());
    std::unordered_map<std::int64_t, NeumaierSum> merged;
    for (auto& part : parts)
        for (auto& [key, mass] : part) merged[key].add(mass.value());
    std::unordered_map<std::int64_t, double> out;
    out.reserve(merged.size());
    for (auto& [key, mass] : merged) out[key] = mass.value() / den.value();
    return out;
}

nlohmann::ordered_json oracle_record_json(const PairwiseModel& model, Temperature beta,
                                          double log_z, const EnergyHistogram* hist) {
    nlohmann::ordered_json j;
    j["method"] = "exact";
    j["beta"] = beta.beta;
    j["log_Z"] = log_z;
    j["model_digest"] = model.digest_hex();
    if (hist) {
        j["bins"] = {{"lo", hist->bin_lo}, {"hi", hist->bin_hi}, {"mass", hist->bin_mass}};
        if (hist->levels_complete) {
            auto levels = nlohmann::ordered_json::array();
            for (const auto& [e, mass] : hist->levels) levels.push_back({e, mass});
            j["levels"] = std::move(levels);
        }
    }
    return j;
}

} // namespace lfis
