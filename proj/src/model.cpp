#include "lfis/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

#include "lfis/logsum.hpp"

namespace lfis {

namespace {

void append_bytes(std::uint64_t& h, const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t k = 0; k < n; ++k) {
        h ^= p[k];
        h *= 0x100000001b3ULL; // FNV-1a
    }
}

template <class T>
void append_value(std::uint64_t& h, const T& v) {
    append_bytes(h, &v, sizeof(v));
}

} // namespace

PairwiseModel::PairwiseModel(int num_variables, int domain_size, double coupling_scale,
                             std::vector<Edge> edges, std::vector<double> domain,
                             std::vector<std::vector<double>> edge_tables)
    : m_(num_variables),
      q_(domain_size),
      scale_(coupling_scale),
      domain_(std::move(domain)),
      edges_(std::move(edges)),
      tables_(std::move(edge_tables)) {
    if (m_ < 1) throw std::invalid_argument("model: need at least one variable");
    if (q_ < 2 || q_ > 255) throw std::invalid_argument("model: domain size out of range");
    if (!(scale_ > 0.0)) throw std::invalid_argument("model: coupling_scale must be positive");
    if (static_cast<int>(domain_.size()) != q_)
        throw std::invalid_argument("model: domain size mismatch");
    if (!tables_.empty() && tables_.size() != edges_.size())
        throw std::invalid_argument("model: need one potential table per edge");
    for (const auto& t : tables_)
        if (static_cast<int>(t.size()) != q_ * q_)
            throw std::invalid_argument("model: potential table must be q*q");
    for (const auto& e : edges_) {
        if (e.i < 0 || e.j < 0 || e.i >= m_ || e.j >= m_)
            throw std::invalid_argument("model: edge references variable out of range");
        if (e.i >= e.j)
            throw std::invalid_argument("model: edges must satisfy i < j (no self-coupling)");
    }

    // Dense matrix for high-density product-form models, CSR otherwise.
    const double density =
        m_ > 1 ? 2.0 * static_cast<double>(edges_.size()) / (static_cast<double>(m_) * (m_ - 1))
               : 0.0;
    if (tables_.empty() && density >= 0.5 && m_ >= 2) {
        jmat_.assign(static_cast<std::size_t>(m_) * m_, 0.0);
        for (const auto& e : edges_) {
            jmat_[static_cast<std::size_t>(e.i) * m_ + e.j] = e.coupling;
            jmat_[static_cast<std::size_t>(e.j) * m_ + e.i] = e.coupling;
        }
    }

    std::vector<int> deg(m_, 0);
    for (const auto& e : edges_) {
        ++deg[e.i];
        ++deg[e.j];
    }
    nbr_offset_.assign(m_ + 1, 0);
    for (int i = 0; i < m_; ++i) nbr_offset_[i + 1] = nbr_offset_[i] + deg[i];
    const std::size_t total = nbr_offset_[m_];
    nbr_var_.resize(total);
    nbr_coupling_.resize(total);
    nbr_table_.resize(total);
    nbr_transposed_.resize(total);
    std::vector<int> cursor(nbr_offset_.begin(), nbr_offset_.end() - 1);
    for (std::size_t e = 0; e < edges_.size(); ++e) {
        const auto& ed = edges_[e];
        const int t = tables_.empty() ? -1 : static_cast<int>(e);
        int k = cursor[ed.i]++;
        nbr_var_[k] = ed.j;
        nbr_coupling_[k] = ed.coupling;
        nbr_table_[k] = t;
        nbr_transposed_[k] = 0; // table indexed as (value of i, value of j)
        k = cursor[ed.j]++;
        nbr_var_[k] = ed.i;
        nbr_coupling_[k] = ed.coupling;
        nbr_table_[k] = t;
        nbr_transposed_[k] = 1;
    }
}

void PairwiseModel::validate_state(const SpinState& state) const {
    if (static_cast<int>(state.size()) != m_)
        throw std::invalid_argument("state length does not match model");
    for (auto v : state.idx)
        if (v >= q_) throw std::invalid_argument("state entry outside domain");
}

void PairwiseModel::validate_index(int i) const {
    if (i < 0 || i >= m_) throw std::invalid_argument("variable index out of range");
}

double PairwiseModel::energy(const SpinState& state) const {
    validate_state(state);
    NeumaierSum acc;
    if (tables_.empty()) {
        for (const auto& e : edges_)
            acc.add(e.coupling * domain_[state.idx[e.i]] * domain_[state.idx[e.j]]);
    } else {
        for (std::size_t k = 0; k < edges_.size(); ++k) {
            const auto& e = edges_[k];
            acc.add(tables_[k][static_cast<std::size_t>(state.idx[e.i]) * q_ + state.idx[e.j]]);
        }
    }
    return -scale_ * acc.value();
}

void PairwiseModel::local_terms(const SpinState& state, int i, double* terms) const {
    if (tables_.empty()) {
        double h = 0.0;
        for_neighbors(i, [&](int j, double c) { h += c * domain_[state.idx[j]]; });
        h *= scale_;
        for (int a = 0; a < q_; ++a) terms[a] = domain_[a] * h;
        return;
    }
    for (int a = 0; a < q_; ++a) terms[a] = 0.0;
    for_neighbors_full(i, [&](int j, double, const double* table, bool transposed) {
        const int b = state.idx[j];
        for (int a = 0; a < q_; ++a)
            terms[a] += transposed ? table[static_cast<std::size_t>(b) * q_ + a]
                                   : table[static_cast<std::size_t>(a) * q_ + b];
    });
    for (int a = 0; a < q_; ++a) terms[a] *= scale_;
}

double PairwiseModel::delta_energy(const SpinState& state, int i,
                                   std::uint8_t new_value_idx) const {
    validate_state(state);
    validate_index(i);
    if (new_value_idx >= q_) throw std::invalid_argument("new value outside domain");
    if (new_value_idx == state.idx[i]) return 0.0;
    std::vector<double> terms(q_);
    local_terms(state, i, terms.data());
    return -(terms[new_value_idx] - terms[state.idx[i]]);
}

double PairwiseModel::log_unnorm(Temperature t, const SpinState& state) const {
    if (t.beta < 0) throw std::invalid_argument("beta must be nonnegative");
    return -t.beta * energy(state);
}

std::vector<double> PairwiseModel::conditional(Temperature t, const SpinState& state,
                                               int i) const {
    if (t.beta < 0) throw std::invalid_argument("beta must be nonnegative");
    validate_state(state);
    validate_index(i);
    std::vector<double> logits(q_);
    local_terms(state, i, logits.data());
    for (auto& z : logits) z *= t.beta;
    const double lse = log_sum_exp(logits);
    std::vector<double> probs(q_);
    for (int a = 0; a < q_; ++a) probs[a] = std::exp(logits[a] - lse);
    return probs;
}

std::uint64_t PairwiseModel::digest() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    append_value(h, m_);
    append_value(h, q_);
    append_value(h, scale_);
    for (double d : domain_) append_value(h, d);
    for (const auto& e : edges_) {
        append_value(h, e.i);
        append_value(h, e.j);
        append_value(h, e.coupling);
    }
    for (const auto& t : tables_)
        for (double v : t) append_value(h, v);
    return h;
}

std::string PairwiseModel::digest_hex() const {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(digest()));
    return std::string(buf);
}

PairwiseModel build_ising_dense(int num_variables, std::uint64_t seed) {
    if (num_variables < 2)
        throw std::invalid_argument("build_ising_dense: need at least two variables");
    RngStream rng(derive_seed(seed, 0x15));
    std::vector<Edge> edges;
    edges.reserve(static_cast<std::size_t>(num_variables) * (num_variables - 1) / 2);
    for (int i = 0; i < num_variables; ++i)
        for (int j = i + 1; j < num_variables; ++j)
            edges.push_back({i, j, rng.normal()});
    PairwiseModel model(num_variables, 2, 1.0 / std::sqrt(static_cast<double>(num_variables)),
                        std::move(edges), {-1.0, 1.0});
    model.builder = "ising-dense";
    model.seed = seed;
    return model;
}

PairwiseModel build_cube_lattice(int nx, int ny, int nz, std::uint64_t seed,
                                 double coupling_scale_override) {
    if (nx < 1 || ny < 1 || nz < 1)
        throw std::invalid_argument("build_cube_lattice: dimensions must be positive");
    const long long m = static_cast<long long>(nx) * ny * nz;
    if (m < 2) throw std::invalid_argument("build_cube_lattice: need at least two sites");
    RngStream rng(derive_seed(seed, 0x3d));
    auto site = [&](int x, int y, int z) { return (z * ny + y) * nx + x; };
    std::vector<Edge> edges;
    for (int z = 0; z < nz; ++z)
        for (int y = 0; y < ny; ++y)
            for (int x = 0; x < nx; ++x) {
                const int s = site(x, y, z);
                if (x + 1 < nx)
                    edges.push_back({s, site(x + 1, y, z),
                                     rng.uniform_below(2) ? 1.0 : -1.0});
                if (y + 1 < ny)
                    edges.push_back({s, site(x, y + 1, z),
                                     rng.uniform_below(2) ? 1.0 : -1.0});
                if (z + 1 < nz)
                    edges.push_back({s, site(x, y, z + 1),
                                     rng.uniform_below(2) ? 1.0 : -1.0});
            }
    for (auto& e : edges)
        if (e.i > e.j) std::swap(e.i, e.j);
    const double scale = coupling_scale_override > 0.0
                             ? coupling_scale_override
                             : 1.0 / std::sqrt(static_cast<double>(m));
    PairwiseModel model(static_cast<int>(m), 2, scale, std::move(edges), {-1.0, 1.0});
    model.builder = "cube";
    model.seed = seed;
    model.dims = {nx, ny, nz};
    return model;
}

PairwiseModel build_free_spins(int num_variables) {
    PairwiseModel model(num_variables, 2, 1.0, {}, {-1.0, 1.0});
    model.builder = "free-spins";
    return model;
}

SpinState uniform_random_state(const PairwiseModel& model, RngStream& rng) {
    SpinState s;
    s.idx.resize(model.num_variables());
    for (auto& v : s.idx)
        v = static_cast<std::uint8_t>(rng.uniform_below(model.domain_size()));
    return s;
}

SpinState state_from_indices(std::vector<std::uint8_t> idx) {
    SpinState s;
    s.idx = std::move(idx);
    return s;
}

SpinState state_from_spins(const PairwiseModel& model, std::span<const int> spins) {
    SpinState s;
    s.idx.reserve(spins.size());
    for (int v : spins) {
        int found = -1;
        for (int a = 0; a < model.domain_size(); ++a)
            if (model.domain()[a] == static_cast<double>(v)) found = a;
        if (found < 0) throw std::invalid_argument("spin value not in domain");
        s.idx.push_back(static_cast<std::uint8_t>(found));
    }
    model.validate_state(s);
    return s;
}

FieldCache::FieldCache(const PairwiseModel& model, SpinState initial)
    : model_(&model), state_(std::move(initial)), q_(model.domain_size()),
      product_(model.product_form()) {
    model.validate_state(state_);
    if (product_) {
        h_.assign(model.num_variables(), 0.0);
    } else {
        g_.assign(static_cast<std::size_t>(model.num_variables()) * q_, 0.0);
    }
    rebuild();
}

void FieldCache::rebuild() {
    const int m = model_->num_variables();
    if (product_) {
        const auto domain = model_->domain();
        const double scale = model_->coupling_scale();
        for (int i = 0; i < m; ++i) {
            double h = 0.0;
            model_->for_neighbors(i, [&](int j, double c) { h += c * domain[state_.idx[j]]; });
            h_[i] = scale * h;
        }
    } else {
        for (int i = 0; i < m; ++i)
            model_->local_terms(state_, i, g_.data() + static_cast<std::size_t>(i) * q_);
    }
    energy_ = model_->energy(state_);
}

void FieldCache::apply_flip(int i, std::uint8_t new_value_idx) {
    const std::uint8_t old_idx = state_.idx[i];
    if (new_value_idx == old_idx) return;
    energy_ += -(local_term(i, new_value_idx) - local_term(i, old_idx));
    state_.idx[i] = new_value_idx;
    const auto domain = model_->domain();
    const double scale = model_->coupling_scale();
    if (product_) {
        const double dv = domain[new_value_idx] - domain[old_idx];
        model_->for_neighbors(i, [&](int j, double c) { h_[j] += scale * c * dv; });
    } else {
        // Adjacency flags are from i's perspective; seen from neighbor j the
        // table orientation is the opposite one.
        model_->for_neighbors_full(i, [&](int j, double, const double* table, bool transposed) {
            double* gj = g_.data() + static_cast<std::size_t>(j) * q_;
            for (int b = 0; b < q_; ++b) {
                const double before = transposed
                                          ? table[static_cast<std::size_t>(b) * q_ + old_idx]
                                          : table[static_cast<std::size_t>(old_idx) * q_ + b];
                const double after = transposed
                                         ? table[static_cast<std::size_t>(b) * q_ + new_value_idx]
                                         : table[static_cast<std::size_t>(new_value_idx) * q_ + b];
                gj[b] += scale * (after - before);
            }
        });
    }
}

void FieldCache::assign_from(const FieldCache& other) {
    state_.idx.assign(other.state_.idx.begin(), other.state_.idx.end());
    h_.assign(other.h_.begin(), other.h_.end());
    g_.assign(other.g_.begin(), other.g_.end());
    energy_ = other.energy_;
}

} // namespace lfis
