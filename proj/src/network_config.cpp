#include "elc/network_config.hpp"

#include <json.hpp>

#include "elc/errors.hpp"

namespace elc::net {

NetworkConfig NetworkConfig::standard() {
    NetworkConfig cfg;
    cfg.scale = 10.0;
    cfg.global_skip = true;
    cfg.layers.push_back({16, 1, 3, true});
    for (int i = 0; i < 17; ++i) cfg.layers.push_back({16, 16, 3, true});
    for (int i = 0; i < 3; ++i) cfg.layers.push_back({16, 16, 1, true});
    cfg.layers.push_back({1, 16, 3, false});
    cfg.validate();
    if (cfg.weight_count() != kStandardWeightCount || cfg.bias_count() != kStandardBiasCount)
        throw ConfigError("standard layer table no longer matches its parameter budget");
    return cfg;
}

void NetworkConfig::validate() const {
    if (layers.empty()) throw ConfigError("network config: no layers");
    if (!(scale > 0.0)) throw ConfigError("network config: scale must be positive");
    for (size_t i = 0; i < layers.size(); ++i) {
        const LayerSpec& l = layers[i];
        std::string where = "network config: layer " + std::to_string(i + 1);
        if (l.out_ch <= 0 || l.in_ch <= 0 || l.kernel <= 0)
            throw ConfigError(where + ": non-positive dimension");
        if (l.kernel % 2 == 0)
            throw ConfigError(where + ": kernel must be odd for size-preserving padding");
        if (i > 0 && l.in_ch != layers[i - 1].out_ch)
            throw ConfigError(where + ": input channels " + std::to_string(l.in_ch) +
                              " do not chain from previous output " +
                              std::to_string(layers[i - 1].out_ch));
    }
}

size_t NetworkConfig::weight_count() const {
    size_t n = 0;
    for (const LayerSpec& l : layers) n += l.weight_count();
    return n;
}

size_t NetworkConfig::bias_count() const {
    size_t n = 0;
    for (const LayerSpec& l : layers) n += size_t(l.out_ch);
    return n;
}

std::string NetworkConfig::to_json() const {
    nlohmann::json j;
    j["scale"] = scale;
    j["global_skip"] = global_skip;
    j["layers"] = nlohmann::json::array();
    for (const LayerSpec& l : layers)
        j["layers"].push_back({{"out", l.out_ch}, {"in", l.in_ch}, {"kernel", l.kernel}, {"relu", l.relu}});
    return j.dump(2);
}

NetworkConfig NetworkConfig::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("network config: bad JSON: ") + e.what());
    }
    NetworkConfig cfg;
    try {
        cfg.scale = j.at("scale").get<double>();
        cfg.global_skip = j.at("global_skip").get<bool>();
        for (const auto& jl : j.at("layers")) {
            LayerSpec l;
            l.out_ch = jl.at("out").get<int>();
            l.in_ch = jl.at("in").get<int>();
            l.kernel = jl.at("kernel").get<int>();
            l.relu = jl.at("relu").get<bool>();
            cfg.layers.push_back(l);
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("network config: missing or mistyped key: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

}  // namespace elc::net
