#include "lfis/model_io.hpp"

#include <fstream>
#include <stdexcept>

namespace lfis {

nlohmann::ordered_json model_to_json(const PairwiseModel& model) {
    nlohmann::ordered_json j;
    j["M"] = model.num_variables();
    j["q"] = model.domain_size();
    j["coupling_scale"] = model.coupling_scale();
    auto edges = nlohmann::ordered_json::array();
    for (const auto& e : model.edges())
        edges.push_back({e.i, e.j, e.coupling});
    j["edges"] = std::move(edges);
    j["domain"] = std::vector<double>(model.domain().begin(), model.domain().end());
    j["builder"] = model.builder;
    j["seed"] = model.seed;
    j["dims"] = model.dims;
    j["model_digest"] = model.digest_hex();
    return j;
}

PairwiseModel model_from_json(const nlohmann::json& j) {
    const int m = j.at("M").get<int>();
    const int q = j.at("q").get<int>();
    const double scale = j.at("coupling_scale").get<double>();
    std::vector<Edge> edges;
    for (const auto& e : j.at("edges"))
        edges.push_back({e.at(0).get<std::int32_t>(), e.at(1).get<std::int32_t>(),
                         e.at(2).get<double>()});
    auto domain = j.at("domain").get<std::vector<double>>();
    PairwiseModel model(m, q, scale, std::move(edges), std::move(domain));
    if (j.contains("builder")) model.builder = j["builder"].get<std::string>();
    if (j.contains("seed")) model.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("dims")) model.dims = j["dims"].get<std::array<int, 3>>();
    return model;
}

void save_model(const PairwiseModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path + " for writing");
    out << model_to_json(model).dump(2) << "\n";
}

PairwiseModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open model file " + path);
    nlohmann::json j;
    in >> j;
    return model_from_json(j);
}

} // namespace lfis
