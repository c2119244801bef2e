#include <doctest.h>

#include <cmath>
#include <map>
#include <vector>

#include "lfis/model.hpp"
#include "lfis/oracle.hpp"
#include "lfis/rng.hpp"

using namespace lfis;

TEST_SUITE("oracle") {

TEST_CASE("independent spins give M log 2") {
    for (int m : {5, 15, 20}) {
        const auto model = build_free_spins(m);
        for (double beta : {0.0, 1.0, 20.0}) {
            CHECK(exact_log_partition(model, Temperature{beta}) ==
                  doctest::Approx(m * std::log(2.0)).epsilon(1e-12));
        }
    }
}

TEST_CASE("beta = 0 gives M log q for any model") {
    const auto model = build_ising_dense(12, 41);
    CHECK(exact_log_partition(model, Temperature{0.0}) ==
          doctest::Approx(12 * std::log(2.0)).epsilon(1e-12));
}

TEST_CASE("two-spin partition function") {
    const PairwiseModel m(2, 2, 1.0 / std::sqrt(2.0), {{0, 1, 1.0}}, {-1.0, 1.0});
    // Enumerate the four states directly: 2 e^{1/sqrt 2} + 2 e^{-1/sqrt 2}.
    const double e = 1.0 / std::sqrt(2.0);
    const double direct = std::log(2.0 * std::exp(e) + 2.0 * std::exp(-e));
    const double log_z = exact_log_partition(m, Temperature{1.0});
    CHECK(log_z == doctest::Approx(direct).epsilon(1e-12));
    CHECK(log_z == doctest::Approx(1.6178757).epsilon(1e-4));
}

TEST_CASE("budget is enforced") {
    const auto model = build_free_spins(30);
    CHECK_THROWS_AS(exact_log_partition(model, Temperature{1.0}), BudgetExceeded);
    CHECK_NOTHROW(exact_log_partition(model, Temperature{1.0}, 31.0));
}

TEST_CASE("serial reference matches the chunked kernel") {
    const auto model = build_ising_dense(21, 5);
    for (double beta : {0.5, 5.0}) {
        const double chunked = exact_log_partition(model, Temperature{beta});
        const double serial = exact_log_partition_serial(model, Temperature{beta});
        CHECK(chunked == doctest::Approx(serial).epsilon(1e-12));
    }
}

TEST_CASE("expectation basics") {
    const auto model = build_ising_dense(8, 13);
    SUBCASE("constant functional") {
        CHECK(exact_expectation(model, Temperature{2.0},
                                [](const SpinState&) { return 3.5; }) ==
              doctest::Approx(3.5).epsilon(1e-12));
    }
    SUBCASE("odd functional under symmetry") {
        const auto free = build_free_spins(6);
        CHECK(exact_expectation(free, Temperature{4.0},
                                [&](const SpinState& x) {
                                    return free.domain()[x.idx[0]];
                                }) == doctest::Approx(0.0).epsilon(1e-12));
    }
}

TEST_CASE("thermodynamic identity: E[E] = -d log Z / d beta") {
    const auto model = build_ising_dense(12, 29);
    const double beta = 2.0;
    const double mean_energy = exact_expectation(
        model, Temperature{beta}, [&](const SpinState& x) { return model.energy(x); });
    const double h = 1e-4;
    const double d_log_z = (exact_log_partition(model, Temperature{beta + h}) -
                            exact_log_partition(model, Temperature{beta - h})) /
                           (2.0 * h);
    CHECK(mean_energy == doctest::Approx(-d_log_z).epsilon(1e-5));
}

TEST_CASE("marginals match a direct enumeration") {
    const auto model = build_ising_dense(3, 71);
    const double beta = 1.7;
    const auto marginals = exact_marginals(model, Temperature{beta});
    // Direct sum over the 8 states.
    std::vector<double> up(3, 0.0);
    double z = 0.0;
    for (int mask = 0; mask < 8; ++mask) {
        SpinState x;
        for (int i = 0; i < 3; ++i) x.idx.push_back((mask >> i) & 1);
        const double w = std::exp(-beta * model.energy(x));
        z += w;
        for (int i = 0; i < 3; ++i)
            if (x.idx[i] == 1) up[i] += w;
    }
    for (int i = 0; i < 3; ++i) {
        CHECK(marginals[i][1] == doctest::Approx(up[i] / z).epsilon(1e-12));
        CHECK(marginals[i][0] + marginals[i][1] == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("energy distribution") {
    SUBCASE("single variable") {
        const auto model = build_free_spins(1);
        const auto hist = exact_energy_distribution(model, Temperature{3.0});
        REQUIRE(hist.levels_complete);
        REQUIRE(hist.levels.size() == 1);
        CHECK(hist.levels[0].first == 0.0);
        CHECK(hist.levels[0].second == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("two spins at beta = 0") {
        const PairwiseModel m(2, 2, 1.0 / std::sqrt(2.0), {{0, 1, 1.0}}, {-1.0, 1.0});
        const auto hist = exact_energy_distribution(m, Temperature{0.0});
        REQUIRE(hist.levels_complete);
        REQUIRE(hist.levels.size() == 2);
        CHECK(hist.levels[0].first == doctest::Approx(-0.70710678).epsilon(1e-9));
        CHECK(hist.levels[0].second == doctest::Approx(0.5).epsilon(1e-12));
        CHECK(hist.levels[1].first == doctest::Approx(0.70710678).epsilon(1e-9));
        CHECK(hist.levels[1].second == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("masses sum to one") {
        const auto model = build_ising_dense(10, 3);
        const auto hist = exact_energy_distribution(model, Temperature{2.0});
        double level_sum = 0.0, bin_sum = 0.0;
        for (const auto& [e, mass] : hist.levels) level_sum += mass;
        for (double mass : hist.bin_mass) bin_sum += mass;
        CHECK(level_sum == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(bin_sum == doctest::Approx(1.0).epsilon(1e-12));
    }
    SUBCASE("beta = 0 recovers the degeneracy distribution") {
        const auto model = build_ising_dense(4, 9);
        const auto hist = exact_energy_distribution(model, Temperature{0.0});
        std::map<std::int64_t, int> counts;
        for (int mask = 0; mask < 16; ++mask) {
            SpinState x;
            for (int i = 0; i < 4; ++i) x.idx.push_back((mask >> i) & 1);
            ++counts[quantize_energy(model.energy(x))];
        }
        REQUIRE(hist.levels.size() == counts.size());
        for (const auto& [e, mass] : hist.levels)
            CHECK(mass ==
                  doctest::Approx(counts.at(quantize_energy(e)) / 16.0).epsilon(1e-12));
    }
}

TEST_CASE("level masses at keys agree with the full level mode") {
    const auto model = build_ising_dense(8, 57);
    const Temperature beta{3.0};
    const auto hist = exact_energy_distribution(model, beta);
    REQUIRE(hist.levels_complete);
    std::vector<std::int64_t> keys;
    for (std::size_t k = 0; k < hist.levels.size(); k += 2)
        keys.push_back(quantize_energy(hist.levels[k].first));
    double log_z = 0.0;
    const auto masses = exact_level_masses(model, beta, keys, &log_z);
    CHECK(log_z == doctest::Approx(exact_log_partition(model, beta)).epsilon(1e-12));
    REQUIRE(masses.size() == keys.size());
    for (std::size_t k = 0; k < hist.levels.size(); k += 2) {
        const auto key = quantize_energy(hist.levels[k].first);
        CHECK(masses.at(key) == doctest::Approx(hist.levels[k].second).epsilon(1e-10));
    }
}

TEST_CASE("log Z bounds") {
    RngStream seeds(123);
    for (int trial = 0; trial < 5; ++trial) {
        const auto model = build_ising_dense(8, seeds.next_u64());
        // min E by enumeration.
        double min_e = 1e300;
        for (int mask = 0; mask < 256; ++mask) {
            SpinState x;
            for (int i = 0; i < 8; ++i) x.idx.push_back((mask >> i) & 1);
            min_e = std::min(min_e, model.energy(x));
        }
        for (double beta : {0.0, 1.0, 10.0}) {
            const double log_z = exact_log_partition(model, Temperature{beta});
            CHECK(log_z >= -beta * min_e - 1e-9);
            CHECK(log_z <= 8 * std::log(2.0) - beta * min_e + 1e-9);
        }
    }
}

} // TEST_SUITE
