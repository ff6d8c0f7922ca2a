#pragma once

// Deterministic stand-in for the embedding service used by the transport
// tests. Vectors are deliberately not unit length and pair scores stray
// outside [0, 1] so the client-side normalisation is exercised.

#include <cstdint>
#include <string>

#include <json.hpp>

namespace stub {

inline constexpr std::size_t kDim = 8;

inline std::uint64_t hash(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

inline nlohmann::json vector_for(const std::string& text) {
    auto arr = nlohmann::json::array();
    const auto h = hash(text);
    for (std::size_t i = 0; i < kDim; ++i) arr.push_back(3.0 * (static_cast<double>((h >> (i * 8)) & 0xff) - 127.5));
    return arr;
}

inline double pair_score(const std::string& a, const std::string& b) {
    return (static_cast<double>(a.size()) - static_cast<double>(b.size())) / 10.0;
}

/// `id_offset` shifts the echoed id to simulate a confused service.
inline nlohmann::json handle(const nlohmann::json& req, std::int64_t id_offset = 0) {
    nlohmann::json reply{{"id", req.at("id").get<std::int64_t>() + id_offset}};
    const auto op = req.at("op").get<std::string>();
    if (op == "embed") {
        auto vectors = nlohmann::json::array();
        for (const auto& t : req.at("texts")) {
            if (t == "__fail__") return {{"id", reply["id"]}, {"error", "refused"}};
            vectors.push_back(vector_for(t.get<std::string>()));
        }
        reply["vectors"] = vectors;
        reply["model"] = req.value("model", "");
    } else if (op == "score_pairs") {
        auto scores = nlohmann::json::array();
        for (const auto& p : req.at("pairs")) scores.push_back(pair_score(p.at(0), p.at(1)));
        reply["scores"] = scores;
    } else {
        reply["error"] = "unknown op " + op;
    }
    return reply;
}

}  // namespace stub
