#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "lfis/importance.hpp"
#include "lfis/model.hpp"
#include "lfis/oracle.hpp"
#include "lfis/rng.hpp"

using namespace lfis;

namespace {

DistinctStateSet set_with_energies(int m, const std::vector<double>& energies) {
    DistinctStateSet set;
    for (std::size_t k = 0; k < energies.size(); ++k) {
        SpinState s;
        s.idx.assign(m, 0);
        // distinct states: encode k in binary
        for (int i = 0; i < m; ++i) s.idx[i] = (k >> i) & 1;
        set.insert(s, energies[k]);
    }
    return set;
}

} // namespace

TEST_SUITE("importance") {

TEST_CASE("selection weights") {
    SUBCASE("equal energies split evenly") {
        const auto set = set_with_energies(4, {1.25, 1.25});
        const auto logw = selection_log_weights(set, Temperature{3.0});
        CHECK(std::exp(logw[0]) == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(std::exp(logw[1]) == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("closed form at beta = 1") {
        const auto set = set_with_energies(4, {0.0, std::log(2.0)});
        const auto logw = selection_log_weights(set, Temperature{1.0});
        CHECK(std::exp(logw[0]) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
        CHECK(std::exp(logw[1]) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    }
    SUBCASE("softmax at beta = 20") {
        const auto set = set_with_energies(4, {-10.0, -9.9, 0.0});
        const auto logw = selection_log_weights(set, Temperature{20.0});
        // Direct evaluation: logits {200, 198, 0}.
        const double p0 = 1.0 / (1.0 + std::exp(-2.0) + std::exp(-200.0));
        CHECK(std::exp(logw[0]) == doctest::Approx(p0).epsilon(1e-10));
        CHECK(std::exp(logw[0]) == doctest::Approx(0.8808).epsilon(1e-4));
        CHECK(std::exp(logw[1]) == doctest::Approx(0.1192).epsilon(1e-4));
        CHECK(std::exp(logw[2]) < 1e-80);
    }
    SUBCASE("empty set is an error") {
        DistinctStateSet empty;
        RngStream rng(1);
        CHECK_THROWS_AS(select_state(empty, Temperature{1.0}, rng),
                        std::invalid_argument);
    }
    SUBCASE("sampling follows the weights") {
        const auto set = set_with_energies(4, {0.0, std::log(2.0)});
        RngStream rng(2);
        int first = 0;
        const int n = 100000;
        for (int k = 0; k < n; ++k) {
            const auto sel = select_state(set, Temperature{1.0}, rng);
            first += sel.energy == 0.0;
        }
        CHECK(std::abs(first / static_cast<double>(n) - 2.0 / 3.0) < 0.01);
    }
}

TEST_CASE("sweep kernel") {
    const auto model = build_ising_dense(10, 17);
    const auto order = SweepOrder::identity(10);
    RngStream rng(3);

    SUBCASE("apply and density agree exactly") {
        for (int trial = 0; trial < 1000; ++trial) {
            const auto y = uniform_random_state(model, rng);
            auto [moved, log_k] =
                sweep_kernel_apply(model, Temperature{2.5}, y, order, rng);
            const double density =
                sweep_kernel_density(model, Temperature{2.5}, moved, y, order);
            REQUIRE(std::abs(log_k - density) <= 1e-12);
        }
    }

    SUBCASE("beta = 0 gives the uniform kernel") {
        const auto y = uniform_random_state(model, rng);
        auto [moved, log_k] = sweep_kernel_apply(model, Temperature{0.0}, y, order, rng);
        CHECK(log_k == doctest::Approx(-10 * std::log(2.0)).epsilon(1e-12));
        const auto z = uniform_random_state(model, rng);
        CHECK(sweep_kernel_density(model, Temperature{0.0}, z, y, order) ==
              doctest::Approx(-10 * std::log(2.0)).epsilon(1e-12));
    }

    SUBCASE("kernel normalization on all states of M = 3") {
        const auto m3 = build_ising_dense(3, 5);
        const auto o3 = SweepOrder::identity(3);
        for (int from = 0; from < 8; ++from) {
            SpinState y0;
            for (int i = 0; i < 3; ++i) y0.idx.push_back((from >> i) & 1);
            double total = 0.0;
            for (int to = 0; to < 8; ++to) {
                SpinState y1;
                for (int i = 0; i < 3; ++i) y1.idx.push_back((to >> i) & 1);
                total += std::exp(sweep_kernel_density(m3, Temperature{2.0}, y1, y0, o3));
            }
            REQUIRE(total == doctest::Approx(1.0).epsilon(1e-10));
        }
    }

    SUBCASE("frozen model keeps its state with probability near one") {
        const PairwiseModel frozen(2, 2, 1.0, {{0, 1, 50.0}}, {-1.0, 1.0});
        SpinState ground;
        ground.idx = {1, 1};
        const auto o2 = SweepOrder::identity(2);
        CHECK(std::abs(sweep_kernel_density(frozen, Temperature{10.0}, ground, ground,
                                            o2)) < 1e-9);
    }

    SUBCASE("order must be a permutation") {
        SweepOrder bad;
        bad.order = {0, 0, 1};
        CHECK_THROWS_AS(bad.validate(3), std::invalid_argument);
        const auto y = uniform_random_state(model, rng);
        CHECK_THROWS_AS(sweep_kernel_density(model, Temperature{1.0}, y, y, bad),
                        std::invalid_argument);
    }
}

TEST_CASE("mixture density") {
    const auto model = build_ising_dense(8, 23);
    const auto order = SweepOrder::identity(8);
    RngStream rng(4);
    std::vector<SelectedSample> sources(3);
    for (auto& s : sources) s.state = uniform_random_state(model, rng);
    const auto target = uniform_random_state(model, rng);
    const Temperature beta{1.5};

    SUBCASE("single component equals the kernel density") {
        const double mix =
            mixture_log_density(target, {sources.data(), 1}, model, beta, order);
        const double direct =
            sweep_kernel_density(model, beta, target, sources[0].state, order);
        CHECK(mix == doctest::Approx(direct).epsilon(1e-12));
    }

    SUBCASE("duplicated component list changes nothing") {
        std::vector<SelectedSample> doubled = sources;
        doubled.insert(doubled.end(), sources.begin(), sources.end());
        CHECK(mixture_log_density(target, sources, model, beta, order) ==
              doctest::Approx(mixture_log_density(target, doubled, model, beta, order))
                  .epsilon(1e-12));
    }

    SUBCASE("beta = 0 mixture is the uniform density") {
        CHECK(mixture_log_density(target, sources, model, Temperature{0.0}, order) ==
              doctest::Approx(-8 * std::log(2.0)).epsilon(1e-12));
    }

    SUBCASE("parallel rows equal the serial reference bitwise") {
        std::vector<SpinState> targets, anchors;
        for (int k = 0; k < 20; ++k) {
            targets.push_back(uniform_random_state(model, rng));
            anchors.push_back(uniform_random_state(model, rng));
        }
        const double betas[2] = {1.5, 0.7};
        const auto par = mixture_log_density_rows(model, betas, targets, anchors, order);
        const auto ser =
            mixture_log_density_rows_serial(model, betas, targets, anchors, order);
        REQUIRE(par.size() == ser.size());
        for (std::size_t k = 0; k < par.size(); ++k) REQUIRE(par[k] == ser[k]);
    }
}

TEST_CASE("importance estimates") {
    SUBCASE("equal weights average the functional") {
        std::vector<MovedSample> samples(4);
        for (int k = 0; k < 4; ++k) {
            samples[k].state.idx = {static_cast<std::uint8_t>(k & 1),
                                    static_cast<std::uint8_t>((k >> 1) & 1)};
            samples[k].energy = k;
            samples[k].log_unnorm = -1.0;
            samples[k].log_mixture = -2.0;
        }
        std::vector<double> energies = {0.0, 1.0, 2.0, 3.0};
        StateFunctional h{"index", [&](const SpinState& s) {
                              return static_cast<double>(s.idx[0] + 2 * s.idx[1]);
                          }};
        const auto est = importance_estimate(samples, {&h, 1}, 4);
        CHECK(est.expectations.at("index") == doctest::Approx(1.5).epsilon(1e-13));
        CHECK(est.ess == doctest::Approx(4.0).epsilon(1e-12));
        CHECK(est.log_z_hat ==
              doctest::Approx(1.0 + std::log(4.0) - std::log(4.0)).epsilon(1e-12));
    }

    SUBCASE("constant functional is exact") {
        std::vector<MovedSample> samples(5);
        RngStream rng(5);
        for (auto& s : samples) {
            s.log_unnorm = rng.normal();
            s.log_mixture = rng.normal();
            s.state.idx = {0};
        }
        StateFunctional h{"c", [](const SpinState&) { return 2.75; }};
        const auto est = importance_estimate(samples, {&h, 1}, 5);
        CHECK(est.expectations.at("c") == doctest::Approx(2.75).epsilon(1e-13));
    }

    SUBCASE("empty list is an error") {
        CHECK_THROWS_AS(importance_estimate({}, {}, 1), std::invalid_argument);
    }

    SUBCASE("permuting samples leaves the estimate bit-identical") {
        std::vector<MovedSample> samples(64);
        RngStream rng(6);
        for (auto& s : samples) {
            s.log_unnorm = 3.0 * rng.normal();
            s.log_mixture = rng.normal();
            s.energy = rng.normal();
            s.state.idx = {static_cast<std::uint8_t>(rng.uniform_below(2))};
        }
        StateFunctional h{"e", [](const SpinState& s) { return s.idx[0] ? 1.0 : -1.0; }};
        const auto base = importance_estimate(samples, {&h, 1}, 64);
        std::vector<MovedSample> shuffled = samples;
        RngStream shuffle_rng(7);
        for (std::size_t k = shuffled.size(); k > 1; --k)
            std::swap(shuffled[k - 1], shuffled[shuffle_rng.uniform_below(k)]);
        const auto permuted = importance_estimate(shuffled, {&h, 1}, 64);
        CHECK(base.log_w == permuted.log_w);
        CHECK(base.ess == permuted.ess);
        CHECK(base.expectations.at("e") == permuted.expectations.at("e"));
    }
}

TEST_CASE("pipeline") {
    SUBCASE("beta = 0 recovers 2^M exactly") {
        const auto model = build_ising_dense(8, 99);
        LfisConfig cfg;
        cfg.num_sequences = 10;
        cfg.samples_per_sequence = 20;
        RngStream rng(8);
        const auto res = lfis_pipeline(model, Temperature{0.0}, cfg, rng);
        CHECK(std::exp(res.estimate.log_z_hat) ==
              doctest::Approx(256.0).epsilon(1e-9));
    }

    SUBCASE("seeded M = 12 estimate lands near the oracle") {
        const auto model = build_ising_dense(12, 321);
        const double oracle = exact_log_partition(model, Temperature{2.0});
        LfisConfig cfg;
        cfg.num_sequences = 500;
        cfg.samples_per_sequence = 500;
        RngStream rng(9);
        const auto res = lfis_pipeline(model, Temperature{2.0}, cfg, rng);
        CHECK(std::abs(res.estimate.log_z_hat - oracle) <= 0.05);
    }

    SUBCASE("degenerate N = 2, T = 1 still yields a finite estimate") {
        const auto model = build_ising_dense(6, 31);
        LfisConfig cfg;
        cfg.num_sequences = 2;
        cfg.samples_per_sequence = 1;
        RngStream rng(10);
        const auto res = lfis_pipeline(model, Temperature{1.0}, cfg, rng);
        CHECK(std::isfinite(res.estimate.log_z_hat));
        CHECK(res.estimate.ess >= 1.0);
        CHECK(res.estimate.ess <= 2.0);
        // With T = 1 each selection is the sequence's initial state.
        for (const auto& sel : res.selected)
            CHECK(sel.energy == doctest::Approx(model.energy(sel.state)).epsilon(1e-12));
    }

    SUBCASE("estimates are thread-count invariant") {
        const auto model = build_ising_dense(10, 77);
        LfisConfig cfg;
        cfg.num_sequences = 40;
        cfg.samples_per_sequence = 60;
        cfg.threads = 1;
        RngStream rng_a(11), rng_b(11);
        const auto a = lfis_pipeline(model, Temperature{2.0}, cfg, rng_a);
        cfg.threads = 4;
        const auto b = lfis_pipeline(model, Temperature{2.0}, cfg, rng_b);
        CHECK(a.estimate.log_z_hat == b.estimate.log_z_hat);
        CHECK(a.estimate.log_w == b.estimate.log_w);
        CHECK(a.estimate.ess == b.estimate.ess);
    }

    SUBCASE("multi-temperature kernel mixture stays consistent") {
        const auto model = build_ising_dense(8, 13);
        const double oracle = exact_log_partition(model, Temperature{2.0});
        LfisConfig cfg;
        cfg.num_sequences = 400;
        cfg.samples_per_sequence = 200;
        cfg.kernel_betas = {2.0, 1.0};
        RngStream rng(12);
        const auto res = lfis_pipeline(model, Temperature{2.0}, cfg, rng);
        CHECK(std::abs(res.estimate.log_z_hat - oracle) < 0.2);
    }

    SUBCASE("polish flips keep the correction valid") {
        const auto model = build_ising_dense(8, 13);
        const double oracle = exact_log_partition(model, Temperature{2.0});
        LfisConfig cfg;
        cfg.num_sequences = 400;
        cfg.samples_per_sequence = 100;
        cfg.polish_flips = 25;
        RngStream rng(13);
        const auto res = lfis_pipeline(model, Temperature{2.0}, cfg, rng);
        CHECK(std::abs(res.estimate.log_z_hat - oracle) < 0.2);
        for (const auto& sel : res.selected)
            CHECK(sel.energy == doctest::Approx(model.energy(sel.state)).epsilon(1e-9));
    }

    SUBCASE("level masses pool to unit mass") {
        const auto model = build_ising_dense(10, 5);
        LfisConfig cfg;
        cfg.num_sequences = 30;
        cfg.samples_per_sequence = 50;
        cfg.collect_level_masses = true;
        RngStream rng(14);
        const auto res = lfis_pipeline(model, Temperature{2.0}, cfg, rng);
        double total = 0.0;
        for (const auto& [key, mass] : res.level_masses) total += mass;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
    }
}

} // TEST_SUITE
