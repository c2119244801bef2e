#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lfis/rng.hpp"

namespace lfis {

// Inverse temperature. beta = 0 is the uniform distribution.
struct Temperature {
    double beta = 0.0;
};

// An assignment of all M variables, stored as indices into the model's
// domain (for Ising, index 0 -> -1, index 1 -> +1).
struct SpinState {
    std::vector<std::uint8_t> idx;

    std::size_t size() const { return idx.size(); }
    bool operator==(const SpinState&) const = default;
};

struct Edge {
    std::int32_t i = 0; // i < j always
    std::int32_t j = 0;
    double coupling = 0.0;
};

// Discrete pairwise MRF over M variables with q-valued domain D and energy
//
//   E(x) = -coupling_scale * sum_{edges (i,j)} phi_e(x_i, x_j)
//
// where phi_e(a, b) = J_e * D[a] * D[b] (the spin-product form) unless the
// edge carries an explicit q x q potential table. Couplings are kept both as
// the canonical edge list and, for evaluation, as either a dense coupling
// matrix (fully connected families) or a CSR adjacency list (lattices).
// Models are immutable after construction and safe to share across threads.
class PairwiseModel {
public:
    PairwiseModel(int num_variables, int domain_size, double coupling_scale,
                  std::vector<Edge> edges, std::vector<double> domain,
                  std::vector<std::vector<double>> edge_tables = {});

    int num_variables() const { return m_; }
    int domain_size() const { return q_; }
    double coupling_scale() const { return scale_; }
    std::span<const double> domain() const { return domain_; }
    std::span<const Edge> edges() const { return edges_; }
    bool product_form() const { return tables_.empty(); }
    bool dense_storage() const { return !jmat_.empty(); }

    // Degree of variable i (number of incident edges).
    int degree(int i) const { return nbr_offset_[i + 1] - nbr_offset_[i]; }

    double energy(const SpinState& state) const;

    // E(x with x_i := new_value) - E(x). O(degree(i)).
    double delta_energy(const SpinState& state, int i, std::uint8_t new_value_idx) const;

    double log_unnorm(Temperature t, const SpinState& state) const;

    // Full conditional pi_i(. | x_rest); length-q probability vector.
    std::vector<double> conditional(Temperature t, const SpinState& state, int i) const;

    // Local interaction terms of variable i: terms[a] = scale * sum_{j~i}
    // phi(a, x_j). Conditional logits are beta * terms[a]. Writes q values.
    void local_terms(const SpinState& state, int i, double* terms) const;

    // Visit neighbors of i as f(j, coupling). Product-form models only.
    template <class F>
    void for_neighbors(int i, F&& f) const {
        if (!jmat_.empty()) {
            const double* row = jmat_.data() + static_cast<std::size_t>(i) * m_;
            for (int j = 0; j < m_; ++j) {
                if (j == i) continue;
                f(j, row[j]);
            }
            return;
        }
        for (int k = nbr_offset_[i]; k < nbr_offset_[i + 1]; ++k)
            f(nbr_var_[k], nbr_coupling_[k]);
    }

    // Visit neighbors with table access: f(j, coupling, table, transposed).
    // table is nullptr for product-form edges.
    template <class F>
    void for_neighbors_full(int i, F&& f) const {
        for (int k = nbr_offset_[i]; k < nbr_offset_[i + 1]; ++k) {
            const int t = nbr_table_[k];
            f(nbr_var_[k], nbr_coupling_[k],
              t >= 0 ? tables_[static_cast<std::size_t>(t)].data() : nullptr,
              nbr_transposed_[k] != 0);
        }
    }

    void validate_state(const SpinState& state) const;
    void validate_index(int i) const;

    // Content digest over (M, q, scale, domain, couplings); provenance
    // metadata is excluded.
    std::uint64_t digest() const;
    std::string digest_hex() const;

    // Provenance (carried through the model file format).
    std::string builder;
    std::uint64_t seed = 0;
    std::array<int, 3> dims{0, 0, 0};

private:
    double pair_term(int adj_index, int a, int b) const;

    int m_ = 0;
    int q_ = 0;
    double scale_ = 1.0;
    std::vector<double> domain_;
    std::vector<Edge> edges_;
    std::vector<std::vector<double>> tables_; // one q*q table per edge, or empty

    // dense coupling matrix (row-major, zero diagonal) when density warrants
    std::vector<double> jmat_;
    // CSR adjacency, both directions per edge
    std::vector<int> nbr_offset_;
    std::vector<std::int32_t> nbr_var_;
    std::vector<double> nbr_coupling_;
    std::vector<std::int32_t> nbr_table_;
    std::vector<std::uint8_t> nbr_transposed_;
};

// Fully connected binary model with J_ij ~ N(0,1) and scale 1/sqrt(M).
PairwiseModel build_ising_dense(int num_variables, std::uint64_t seed);

// 3D nearest-neighbor lattice, free boundaries, J_ij in {-1,+1} equiprobable,
// scale 1/sqrt(M) by default (override for experiments that drop it).
PairwiseModel build_cube_lattice(int nx, int ny, int nz, std::uint64_t seed,
                                 double coupling_scale_override = -1.0);

// Binary model with the given variable count and no interactions.
PairwiseModel build_free_spins(int num_variables);

SpinState uniform_random_state(const PairwiseModel& model, RngStream& rng);
SpinState state_from_indices(std::vector<std::uint8_t> idx);
// Binary convenience: spins are -1/+1 values matched against the domain.
SpinState state_from_spins(const PairwiseModel& model, std::span<const int> spins);

// Cached local interaction sums for one evolving state. Owned by a single
// sampler; flip updates are O(degree) (sparse) or O(M) (dense). Carries the
// state's energy, updated incrementally.
class FieldCache {
public:
    FieldCache(const PairwiseModel& model, SpinState initial);

    const SpinState& state() const { return state_; }
    const PairwiseModel& model() const { return *model_; }
    double energy() const { return energy_; }

    // Local term of variable i at domain index a (scale folded in).
    double local_term(int i, int a) const {
        if (product_) return model_->domain()[a] * h_[i];
        return g_[static_cast<std::size_t>(i) * q_ + a];
    }

    // Field h_i = scale * sum_j J_ij x_j (product-form models).
    double field(int i) const { return h_[i]; }

    void apply_flip(int i, std::uint8_t new_value_idx);

    // Recompute everything from the current state (drift guard in tests).
    void rebuild();

    // Copy another cache's contents without reallocating (same model).
    void assign_from(const FieldCache& other);

private:
    const PairwiseModel* model_;
    SpinState state_;
    int q_ = 0;
    bool product_ = true;
    std::vector<double> h_; // product form: one field per variable
    std::vector<double> g_; // table form: M*q local terms
    double energy_ = 0.0;
};

} // namespace lfis
