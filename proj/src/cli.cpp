#include "lfis/cli.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "lfis/experiment.hpp"
#include "lfis/importance.hpp"
#include "lfis/model_io.hpp"
#include "lfis/nfw.hpp"
#include "lfis/oracle.hpp"
#include "lfis/smc.hpp"

namespace lfis {

namespace {

using nlohmann::json;
using nlohmann::ordered_json;

void write_lines(const std::string& path, const ordered_json& records,
                 const ordered_json& summary) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    for (const auto& rec : records) out << rec.dump() << "\n";
    out << summary.dump() << "\n";
}

void write_json(const std::string& path, const ordered_json& j) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << j.dump(2) << "\n";
}

std::vector<json> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open results file " + path);
    std::vector<json> records;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        records.push_back(json::parse(line));
    }
    return records;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file " + path);
    json j;
    in >> j;
    return j;
}

// A JSON config file provides defaults; command-line flags win on conflict.
// Keys are the long flag names without the leading dashes.
void apply_config_defaults(CLI::App* cmd, const std::string& config_path) {
    if (config_path.empty()) return;
    const json cfg = read_json(config_path);
    for (const auto& [key, value] : cfg.items()) {
        CLI::Option* opt = cmd->get_option_no_throw("--" + key);
        if (!opt || opt->count() > 0) continue;
        std::vector<std::string> words;
        if (value.is_array()) {
            for (const auto& v : value)
                words.push_back(v.is_string() ? v.get<std::string>() : v.dump());
        } else {
            words.push_back(value.is_string() ? value.get<std::string>() : value.dump());
        }
        for (const auto& w : words) opt->add_result(w);
        opt->run_callback();
    }
}

struct EnergySample {
    std::vector<double> energies;
    std::string method;
    double beta = 0.0;
};

// Pull per-replication energies out of a results file: samplers carry one
// "energy" per record, estimators a "selected_energies" array.
EnergySample collect_energies(const std::vector<json>& records) {
    EnergySample out;
    for (const auto& rec : records) {
        if (rec.value("record_type", "") == "summary") {
            out.method = rec.value("method", "");
            out.beta = rec.value("beta", 0.0);
            continue;
        }
        if (rec.contains("energy")) {
            out.energies.push_back(rec["energy"].get<double>());
        } else if (rec.contains("selected_energies")) {
            for (const auto& e : rec["selected_energies"])
                out.energies.push_back(e.get<double>());
        }
    }
    return out;
}

std::vector<double> collect_log_z(const std::vector<json>& records) {
    std::vector<double> out;
    for (const auto& rec : records)
        if (rec.value("record_type", "") == "replication" && rec.contains("log_Z_hat"))
            out.push_back(rec["log_Z_hat"].get<double>());
    return out;
}

std::optional<json> find_summary(const std::vector<json>& records) {
    for (const auto& rec : records)
        if (rec.value("record_type", "") == "summary") return rec;
    return std::nullopt;
}

std::vector<double> bin_energies(const std::vector<double>& energies, double lo,
                                 double hi, int nbins) {
    std::vector<double> mass(nbins, 0.0);
    if (energies.empty()) return mass;
    const double width = hi > lo ? (hi - lo) / nbins : 1.0;
    for (double e : energies) {
        int b = static_cast<int>((e - lo) / width);
        b = std::clamp(b, 0, nbins - 1);
        mass[b] += 1.0;
    }
    for (auto& v : mass) v /= static_cast<double>(energies.size());
    return mass;
}

double tv_distance(const std::vector<double>& a, const std::vector<double>& b) {
    double tv = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) tv += std::abs(a[k] - b[k]);
    return 0.5 * tv;
}

std::string scientific_from_log10(double log10_value) {
    const double exponent = std::floor(log10_value);
    const double mantissa = std::pow(10.0, log10_value - exponent);
    std::ostringstream out;
    out.precision(3);
    out << mantissa << "e" << (exponent >= 0 ? "+" : "")
        << static_cast<long long>(exponent);
    return out.str();
}

int cmd_build(const std::string& family, int m, std::vector<int> dims,
              std::uint64_t seed, double scale_override, const std::string& out_path) {
    PairwiseModel model = [&] {
        if (family == "ising-dense") return build_ising_dense(m, seed);
        if (family == "cube") {
            if (dims.size() != 3)
                throw CLI::ValidationError("--dims", "cube needs exactly three dimensions");
            return build_cube_lattice(dims[0], dims[1], dims[2], seed, scale_override);
        }
        if (family == "free-spins") return build_free_spins(m);
        throw CLI::ValidationError("--family", "unknown family " + family);
    }();
    save_model(model, out_path);
    std::cout << "wrote " << out_path << ": M=" << model.num_variables()
              << " edges=" << model.edges().size() << " digest=" << model.digest_hex()
              << "\n";
    return 0;
}

} // namespace

int cli_main(int argc, const char* const* argv) {
    CLI::App app{"Low-temperature sampling and partition-function estimation "
                 "for discrete pairwise MRFs"};
    app.require_subcommand(1);

    // ---- build ----------------------------------------------------------
    auto* build = app.add_subcommand("build", "Build a model file");
    std::string family = "ising-dense", build_out = "model.json", build_config;
    int build_m = 25;
    std::vector<int> build_dims;
    std::uint64_t build_seed = 0;
    double build_scale = -1.0;
    build->add_option("--config", build_config, "JSON config file (flags win)");
    build->add_option("--family", family, "ising-dense | cube | free-spins");
    build->add_option("--m", build_m, "variable count (ising-dense, free-spins)");
    build->add_option("--dims", build_dims, "lattice dimensions nx ny nz (cube)")
        ->expected(3);
    build->add_option("--seed", build_seed, "coupling seed");
    build->add_option("--coupling-scale", build_scale,
                      "override the 1/sqrt(M) prefactor (cube)");
    build->add_option("--out", build_out, "output model file");

    // ---- run ------------------------------------------------------------
    auto* run = app.add_subcommand("run", "Run a method on a model");
    run->require_subcommand(1);
    std::string model_path, run_out = "results.jsonl", oracle_path, run_config;
    std::vector<double> betas;
    int reps = 1, threads = 0;
    std::uint64_t master_seed = 0;

    auto add_common = [&](CLI::App* sub, bool with_reps = true) {
        sub->add_option("--config", run_config, "JSON config file (flags win)");
        sub->add_option("--model", model_path, "model file")->required();
        sub->add_option("--beta", betas, "inverse temperature(s)");
        sub->add_option("--out", run_out, "output results file (JSON lines)");
        sub->add_option("--threads", threads, "worker pool bound (0 = all cores)");
        if (with_reps) {
            sub->add_option("--reps", reps, "replication count");
            sub->add_option("--master-seed", master_seed, "master seed");
            sub->add_option("--oracle", oracle_path,
                            "exact results file supplying oracle log Z");
        }
    };

    auto* run_exact = run->add_subcommand("exact", "Brute-force oracle");
    double budget_log2 = kDefaultBudgetLog2;
    bool with_levels = false;
    int exact_bins = 100;
    add_common(run_exact, false);
    run_exact->add_option("--budget-log2", budget_log2, "enumeration budget");
    run_exact->add_flag("--levels", with_levels, "emit the energy distribution");
    run_exact->add_option("--bins", exact_bins, "histogram bins");

    auto* run_nfw = run->add_subcommand("nfw", "N-Fold Way sampler");
    std::uint64_t steps = 1000;
    add_common(run_nfw);
    run_nfw->add_option("--steps", steps, "flip count");

    auto* run_eda = run->add_subcommand("eda", "Event-driven annealing");
    double beta_min = 0.001, beta_max = 20.0;
    add_common(run_eda);
    run_eda->add_option("--steps", steps, "flip count");
    run_eda->add_option("--beta-min", beta_min, "schedule start");
    run_eda->add_option("--beta-max", beta_max, "schedule end");

    auto* run_lfqgs = run->add_subcommand("lfqgs", "LFQGS + Boltzmann selection");
    std::uint32_t gamma_min = 0, gamma_max = 0;
    std::string semantics = "masked-assumed";
    add_common(run_lfqgs);
    run_lfqgs->add_option("--steps", steps, "sample count T");
    run_lfqgs->add_option("--gamma-min", gamma_min, "LF move size lower bound");
    run_lfqgs->add_option("--gamma-max", gamma_max, "LF move size upper bound");
    run_lfqgs->add_option("--tabu-semantics", semantics,
                          "masked-assumed | masked-previous");

    auto* run_lfis = run->add_subcommand("lfis", "Large-Flip Importance Sampling");
    int n_sequences = 1000;
    std::uint64_t t_samples = 1000, polish_flips = 0;
    std::vector<double> kernel_betas;
    bool collect_masses = false;
    add_common(run_lfis);
    run_lfis->add_option("--n", n_sequences, "number of LFQGS sequences");
    run_lfis->add_option("--t", t_samples, "samples per sequence");
    run_lfis->add_option("--gamma-min", gamma_min, "LF move size lower bound");
    run_lfis->add_option("--gamma-max", gamma_max, "LF move size upper bound");
    run_lfis->add_option("--tabu-semantics", semantics,
                         "masked-assumed | masked-previous");
    run_lfis->add_option("--kernel-betas", kernel_betas,
                         "sweep-kernel temperature set (default: target beta)");
    run_lfis->add_option("--polish-flips", polish_flips,
                         "extra NFW flips applied to selections (default off)");
    run_lfis->add_flag("--collect-masses", collect_masses,
                       "pool selection-weighted energy masses");

    auto* run_smc = run->add_subcommand("smc", "Annealed SMC baseline");
    int particles = 1000, levels = 5000, moves_per_level = 1;
    double resample_threshold = 0.5;
    add_common(run_smc);
    run_smc->add_option("--n", particles, "particle count");
    run_smc->add_option("--steps", levels, "annealing levels");
    run_smc->add_option("--resample-threshold", resample_threshold,
                        "resample when ESS/N drops below this");
    run_smc->add_option("--moves-per-level", moves_per_level,
                        "Gibbs moves per particle per level");

    // ---- compare --------------------------------------------------------
    auto* compare = app.add_subcommand("compare", "Join results with oracle values");
    std::string a_path, b_path, exact_path, report_out = "report.json", cmp_config;
    int cmp_bins = 100;
    compare->add_option("--config", cmp_config, "JSON config file (flags win)");
    compare->add_option("--a", a_path, "first results file")->required();
    compare->add_option("--b", b_path, "second results file");
    compare->add_option("--exact", exact_path, "exact results file (oracle record)");
    compare->add_option("--bins", cmp_bins, "histogram bins");
    compare->add_option("--out", report_out, "report path");

    try {
        app.parse(argc, argv);

        if (build->parsed()) {
            apply_config_defaults(build, build_config);
            return cmd_build(family, build_m, build_dims, build_seed, build_scale,
                             build_out);
        }

        if (run->parsed()) {
            CLI::App* sub = run->get_subcommands().front();
            apply_config_defaults(sub, run_config);
            const PairwiseModel model = load_model(model_path);
            if (betas.empty()) betas.push_back(1.0);

            std::optional<double> oracle_log_z;
            if (!oracle_path.empty()) {
                const json oracle = read_json(oracle_path);
                if (oracle.contains("log_Z")) oracle_log_z = oracle["log_Z"].get<double>();
            }

            ordered_json records = ordered_json::array();
            ordered_json summaries = ordered_json::array();
            auto absorb = [&](ExperimentResult&& res) {
                for (auto& rec : res.records) records.push_back(std::move(rec));
                summaries.push_back(std::move(res.summary));
            };

            if (sub == run_exact) {
                for (double beta : betas) {
                    const double log_z =
                        exact_log_partition(model, Temperature{beta}, budget_log2);
                    if (with_levels) {
                        const auto hist = exact_energy_distribution(
                            model, Temperature{beta}, exact_bins, budget_log2);
                        summaries.push_back(
                            oracle_record_json(model, Temperature{beta}, log_z, &hist));
                    } else {
                        summaries.push_back(
                            oracle_record_json(model, Temperature{beta}, log_z));
                    }
                    std::cout << "beta=" << beta << " log_Z=" << std::setprecision(12)
                              << log_z << "\n";
                }
            } else if (sub == run_nfw) {
                for (double beta : betas)
                    absorb(run_nfw_experiment(model, beta, steps, reps, master_seed,
                                              threads));
            } else if (sub == run_eda) {
                absorb(run_eda_experiment(model, beta_min, beta_max, steps, reps,
                                          master_seed, threads));
            } else if (sub == run_lfqgs) {
                LfqgsSelectConfig cfg;
                cfg.num_samples = steps;
                cfg.gamma_min = gamma_min;
                cfg.gamma_max = gamma_max;
                cfg.semantics = semantics == "masked-previous"
                                    ? TabuSemantics::masked_previous
                                    : TabuSemantics::masked_assumed;
                for (double beta : betas)
                    absorb(run_lfqgs_select_experiment(model, beta, cfg, reps,
                                                       master_seed, threads));
            } else if (sub == run_lfis) {
                LfisConfig cfg;
                cfg.num_sequences = n_sequences;
                cfg.samples_per_sequence = t_samples;
                cfg.gamma_min = gamma_min;
                cfg.gamma_max = gamma_max;
                cfg.semantics = semantics == "masked-previous"
                                    ? TabuSemantics::masked_previous
                                    : TabuSemantics::masked_assumed;
                cfg.kernel_betas = kernel_betas;
                cfg.polish_flips = polish_flips;
                cfg.collect_level_masses = collect_masses;
                cfg.threads = threads;
                for (double beta : betas)
                    absorb(run_lfis_experiment(model, beta, cfg, reps, master_seed,
                                               oracle_log_z, threads));
            } else if (sub == run_smc) {
                SmcConfig cfg;
                cfg.num_particles = particles;
                cfg.num_levels = levels;
                cfg.resample_threshold = resample_threshold;
                cfg.gibbs_moves_per_level = moves_per_level;
                cfg.threads = threads;
                for (double beta : betas)
                    absorb(run_smc_experiment(model, beta, cfg, reps, master_seed,
                                              oracle_log_z, threads));
            }

            std::ofstream out(run_out);
            if (!out) throw std::runtime_error("cannot open " + run_out);
            for (const auto& rec : records) out << rec.dump() << "\n";
            for (const auto& s : summaries) out << s.dump() << "\n";
            std::cout << "wrote " << run_out << " (" << records.size() << " records, "
                      << summaries.size() << " summaries)\n";
            return 0;
        }

        if (compare->parsed()) {
            apply_config_defaults(compare, cmp_config);
            ordered_json report;
            const auto a_records = read_lines(a_path);
            const auto a_summary = find_summary(a_records);
            report["a"] = a_summary ? ordered_json(*a_summary) : ordered_json();

            std::optional<json> exact;
            if (!exact_path.empty()) exact = read_json(exact_path);
            if (exact && exact->contains("log_Z")) {
                const double log_z = (*exact)["log_Z"].get<double>();
                auto errors_of = [&](const std::vector<json>& records) {
                    std::vector<double> errs;
                    for (double v : collect_log_z(records))
                        errs.push_back(std::abs(v - log_z));
                    return errs;
                };
                auto a_errs = errors_of(a_records);
                if (!a_errs.empty())
                    report["a_error"] = {{"mean", mean_of(a_errs)},
                                         {"median", median_of(a_errs)},
                                         {"variance", sample_variance(a_errs)}};
            }

            const EnergySample ea = collect_energies(a_records);
            if (!b_path.empty()) {
                const auto b_records = read_lines(b_path);
                const auto b_summary = find_summary(b_records);
                report["b"] = b_summary ? ordered_json(*b_summary) : ordered_json();
                if (exact && exact->contains("log_Z")) {
                    const double log_z = (*exact)["log_Z"].get<double>();
                    std::vector<double> errs;
                    for (double v : collect_log_z(b_records))
                        errs.push_back(std::abs(v - log_z));
                    if (!errs.empty())
                        report["b_error"] = {{"mean", mean_of(errs)},
                                             {"median", median_of(errs)},
                                             {"variance", sample_variance(errs)}};
                }
                const EnergySample eb = collect_energies(b_records);
                if (!ea.energies.empty() && !eb.energies.empty()) {
                    if (ea.beta != eb.beta && ea.beta > 0 && eb.beta > 0)
                        throw std::runtime_error(
                            "compare: results were produced at different beta");
                    const double beta = ea.beta > 0 ? ea.beta : eb.beta;
                    const double mean_a = mean_of(ea.energies);
                    const double mean_b = mean_of(eb.energies);
                    // How much more likely method a's average state is at beta.
                    const double log_lr = -beta * (mean_a - mean_b);
                    const double log10_lr = log_lr / std::log(10.0);
                    report["energy_comparison"] = {
                        {"beta", beta},
                        {"mean_energy_a", mean_a},
                        {"mean_energy_b", mean_b},
                        {"energy_variance_a", sample_variance(ea.energies)},
                        {"energy_variance_b", sample_variance(eb.energies)},
                        {"log_likelihood_ratio", log_lr},
                        {"likelihood_ratio_log10", log10_lr},
                        {"likelihood_ratio", scientific_from_log10(log10_lr)}};

                    double lo, hi;
                    std::vector<double> exact_mass;
                    if (exact && exact->contains("bins")) {
                        lo = (*exact)["bins"]["lo"].get<double>();
                        hi = (*exact)["bins"]["hi"].get<double>();
                        exact_mass = (*exact)["bins"]["mass"].get<std::vector<double>>();
                        cmp_bins = static_cast<int>(exact_mass.size());
                    } else {
                        lo = std::min(*std::min_element(ea.energies.begin(), ea.energies.end()),
                                      *std::min_element(eb.energies.begin(), eb.energies.end()));
                        hi = std::max(*std::max_element(ea.energies.begin(), ea.energies.end()),
                                      *std::max_element(eb.energies.begin(), eb.energies.end()));
                    }
                    const auto ha = bin_energies(ea.energies, lo, hi, cmp_bins);
                    const auto hb = bin_energies(eb.energies, lo, hi, cmp_bins);
                    report["tv_distance_ab"] = tv_distance(ha, hb);
                    report["histograms"] = {{"lo", lo},
                                            {"hi", hi},
                                            {"a", ha},
                                            {"b", hb}};
                    if (!exact_mass.empty()) {
                        report["tv_distance_a_exact"] = tv_distance(ha, exact_mass);
                        report["tv_distance_b_exact"] = tv_distance(hb, exact_mass);
                        report["histograms"]["exact"] = exact_mass;
                    }
                }
            } else if (exact && exact->contains("bins") && !ea.energies.empty()) {
                const double lo = (*exact)["bins"]["lo"].get<double>();
                const double hi = (*exact)["bins"]["hi"].get<double>();
                const auto exact_mass =
                    (*exact)["bins"]["mass"].get<std::vector<double>>();
                const auto ha =
                    bin_energies(ea.energies, lo, hi, static_cast<int>(exact_mass.size()));
                report["tv_distance_a_exact"] = tv_distance(ha, exact_mass);
                report["histograms"] = {{"lo", lo}, {"hi", hi}, {"a", ha},
                                        {"exact", exact_mass}};
            }

            write_json(report_out, report);
            std::cout << "wrote " << report_out << "\n";
            return 0;
        }
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

} // namespace lfis
