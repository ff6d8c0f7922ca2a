#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "error.hpp"
#include "util.hpp"

namespace qbd {

/// Dense sentence representation. Providers emit unit-norm vectors; a vector
/// built from text with no tokens is an all-zero sentinel with valid == false.
struct EmbeddingVector {
    std::vector<float> values;
    bool valid = true;

    std::size_t dim() const noexcept { return values.size(); }

    static EmbeddingVector sentinel(std::size_t dim) { return {std::vector<float>(dim, 0.0f), false}; }

    friend bool operator==(const EmbeddingVector&, const EmbeddingVector&) = default;
};

inline double l2_norm(std::span<const float> v) {
    double s = 0.0;
    for (float x : v) s += static_cast<double>(x) * x;
    return std::sqrt(s);
}

inline double dot(std::span<const float> a, std::span<const float> b) {
    if (a.size() != b.size()) throw std::invalid_argument("dot: dimension mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += static_cast<double>(a[i]) * b[i];
    return s;
}

/// Cosine of two unit vectors (their dot product), clamped to [-1, 1]. Zero
/// when either side is a sentinel.
inline double cosine(const EmbeddingVector& a, const EmbeddingVector& b) {
    if (!a.valid || !b.valid) return 0.0;
    return std::clamp(dot(a.values, b.values), -1.0, 1.0);
}

/// Scales to unit length; a zero vector becomes a sentinel.
inline EmbeddingVector normalized(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    const double norm = std::sqrt(s);
    if (!(norm > 0.0) || !std::isfinite(norm)) return EmbeddingVector::sentinel(v.size());
    EmbeddingVector out;
    out.values.resize(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) out.values[i] = static_cast<float>(v[i] / norm);
    return out;
}

inline EmbeddingVector normalized(const EmbeddingVector& v) {
    if (!v.valid) return v;
    if (std::abs(l2_norm(v.values) - 1.0) <= 1e-6) return v;
    std::vector<double> d(v.values.begin(), v.values.end());
    return normalized(d);
}

/// Element-wise mean of valid vectors, re-normalized.
inline EmbeddingVector mean_pool(std::span<const EmbeddingVector> vectors, std::size_t dim) {
    std::vector<double> acc(dim, 0.0);
    bool any = false;
    for (const auto& v : vectors) {
        if (!v.valid) continue;
        if (v.dim() != dim) throw std::invalid_argument("mean_pool: dimension mismatch");
        for (std::size_t i = 0; i < dim; ++i) acc[i] += v.values[i];
        any = true;
    }
    if (!any) return EmbeddingVector::sentinel(dim);
    return normalized(acc);
}

enum class EmbedRole { CLUSTERING, SIMILARITY };
enum class ProviderKind { BASELINE, FILE, EXTERNAL };

inline std::string to_string(ProviderKind k) {
    switch (k) {
        case ProviderKind::BASELINE: return "baseline";
        case ProviderKind::FILE: return "file";
        case ProviderKind::EXTERNAL: return "external";
    }
    return "?";
}

inline std::optional<ProviderKind> parse_provider_kind(std::string_view s) {
    if (s == "baseline") return ProviderKind::BASELINE;
    if (s == "file") return ProviderKind::FILE;
    if (s == "external") return ProviderKind::EXTERNAL;
    return std::nullopt;
}

/// Describes a provider and the model behind each role.
struct ProviderHandle {
    ProviderKind kind = ProviderKind::BASELINE;
    std::size_t dim = 384;
    std::string clustering_model = "all-mpnet-base-v2";
    std::string similarity_model = "msmarco-bert-base-dot-v5";
    std::string cross_model = "ms-marco-MiniLM-L-12-v2";

    const std::string& model_for(EmbedRole role) const {
        return role == EmbedRole::CLUSTERING ? clustering_model : similarity_model;
    }
};

class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;

    virtual const ProviderHandle& handle() const = 0;

    /// One vector per text, order preserved.
    virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts, EmbedRole role) = 0;

    /// Relevance of each (query sentence, doc sentence) pair, in [0, 1].
    virtual std::vector<double> score(std::span<const std::pair<std::string, std::string>> pairs) = 0;

    /// Character budget of one embedding request item.
    virtual std::size_t max_chars() const { return 2000; }
};

inline std::vector<EmbeddingVector> embed_texts(EmbeddingProvider& provider, std::span<const std::string> texts,
                                                EmbedRole role) {
    if (texts.empty()) throw std::invalid_argument("embed_texts: no texts");
    auto out = provider.embed(texts, role);
    if (out.size() != texts.size()) throw TransportError("provider returned a wrong number of vectors");
    return out;
}

inline std::vector<double> score_pairs(EmbeddingProvider& provider,
                                       std::span<const std::pair<std::string, std::string>> pairs) {
    if (pairs.empty()) throw std::invalid_argument("score_pairs: no pairs");
    auto out = provider.score(pairs);
    if (out.size() != pairs.size()) throw TransportError("provider returned a wrong number of scores");
    return out;
}

/// (cos + 1) / 2, the pair score used when no cross-encoder is available.
inline double cosine_pair_score(const EmbeddingVector& a, const EmbeddingVector& b) {
    return std::clamp((cosine(a, b) + 1.0) / 2.0, 0.0, 1.0);
}

inline TokenizerConfig baseline_tokenizer() {
    TokenizerConfig c;
    c.min_token_length = 1;
    return c;
}

/// Pseudo-random unit vector for one token, seeded by its FNV-1a hash.
inline std::vector<double> baseline_token_vector(std::string_view token, std::size_t dim) {
    Rng rng(fnv1a64(token));
    std::vector<double> v(dim);
    double s = 0.0;
    for (auto& x : v) {
        x = rng.gaussian();
        s += x * x;
    }
    const double norm = std::sqrt(s);
    for (auto& x : v) x /= norm;
    return v;
}

/// Random-projection bag of words: normalized mean of per-token unit vectors.
inline EmbeddingVector baseline_embed(std::string_view text, std::size_t dim = 384) {
    if (dim < 8) throw std::invalid_argument("baseline_embed: dim must be >= 8");
    const auto tokens = tokenize(text, baseline_tokenizer());
    if (tokens.empty()) return EmbeddingVector::sentinel(dim);
    std::vector<double> acc(dim, 0.0);
    for (const auto& t : tokens) {
        const auto tv = baseline_token_vector(t, dim);
        for (std::size_t i = 0; i < dim; ++i) acc[i] += tv[i];
    }
    for (auto& x : acc) x /= static_cast<double>(tokens.size());
    return normalized(acc);
}

/// Deterministic, dependency-free stand-in for the sentence encoders. Both
/// roles share one embedding; pairs score as (cos + 1) / 2.
class BaselineProvider final : public EmbeddingProvider {
public:
    explicit BaselineProvider(std::size_t dim = 384) {
        if (dim < 8) throw std::invalid_argument("baseline provider: dim must be >= 8");
        handle_.kind = ProviderKind::BASELINE;
        handle_.dim = dim;
        handle_.clustering_model = handle_.similarity_model = handle_.cross_model = "baseline";
    }

    const ProviderHandle& handle() const override { return handle_; }

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts, EmbedRole) override {
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(embed_one(t));
        return out;
    }

    std::vector<double> score(std::span<const std::pair<std::string, std::string>> pairs) override {
        std::vector<double> out;
        out.reserve(pairs.size());
        for (const auto& [a, b] : pairs) out.push_back(cosine_pair_score(embed_one(a), embed_one(b)));
        return out;
    }

private:
    // Same arithmetic as baseline_embed, with token vectors memoized.
    EmbeddingVector embed_one(std::string_view text) {
        const auto tokens = tokenize(text, baseline_tokenizer());
        const std::size_t dim = handle_.dim;
        if (tokens.empty()) return EmbeddingVector::sentinel(dim);
        std::vector<double> acc(dim, 0.0);
        for (const auto& t : tokens) {
            const auto& tv = token_vector(t);
            for (std::size_t i = 0; i < dim; ++i) acc[i] += tv[i];
        }
        for (auto& x : acc) x /= static_cast<double>(tokens.size());
        return normalized(acc);
    }

    const std::vector<double>& token_vector(const std::string& token) {
        {
            std::shared_lock lock(mutex_);
            if (auto it = cache_.find(token); it != cache_.end()) return it->second;
        }
        auto v = baseline_token_vector(token, handle_.dim);
        std::unique_lock lock(mutex_);
        return cache_.try_emplace(token, std::move(v)).first->second;
    }

    ProviderHandle handle_;
    std::shared_mutex mutex_;
    std::unordered_map<std::string, std::vector<double>> cache_;
};

/// Stable record id of a text in an embedding file.
inline std::string text_id(std::string_view text) { return hex64(fnv1a64(text)); }

struct EmbeddingFile {
    std::size_t dim = 0;
    std::map<std::string, EmbeddingVector> vectors;
};

/// Header line {"dim": n}, then one {"id": ..., "vector": [...]} per line.
inline std::string format_embedding_file(const EmbeddingFile& file) {
    std::string out = nlohmann::json{{"dim", file.dim}}.dump() + "\n";
    for (const auto& [id, v] : file.vectors) {
        if (v.dim() != file.dim) throw ValidationError("embedding dimension mismatch", {id});
        auto arr = nlohmann::json::array();
        for (float x : v.values) arr.push_back(static_cast<double>(x));
        out += nlohmann::json{{"id", id}, {"vector", std::move(arr)}}.dump() + "\n";
    }
    return out;
}

inline EmbeddingFile parse_embedding_file(std::string_view text, const std::string& origin = "<embeddings>") {
    EmbeddingFile file;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    bool header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IngestionError(origin, "line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!header) {
            if (!j.contains("dim")) throw IngestionError(origin, "missing {\"dim\": n} header");
            file.dim = j.at("dim").get<std::size_t>();
            if (file.dim == 0) throw IngestionError(origin, "dim must be positive");
            header = true;
            continue;
        }
        EmbeddingVector v;
        for (const auto& x : j.at("vector")) v.values.push_back(static_cast<float>(x.get<double>()));
        if (v.dim() != file.dim)
            throw IngestionError(origin, "line " + std::to_string(lineno) + ": vector has wrong dimension");
        for (float x : v.values)
            if (!std::isfinite(x)) throw IngestionError(origin, "line " + std::to_string(lineno) + ": non-finite value");
        v.valid = l2_norm(v.values) > 0.0;
        file.vectors[j.at("id").get<std::string>()] = std::move(v);
    }
    if (!header) throw IngestionError(origin, "empty embedding file");
    return file;
}

/// Serves precomputed vectors. A text resolves by text_id(text) first and by
/// its literal string second. Pairs score as (cos + 1) / 2.
class FileProvider final : public EmbeddingProvider {
public:
    explicit FileProvider(EmbeddingFile file) : file_(std::move(file)) {
        handle_.kind = ProviderKind::FILE;
        handle_.dim = file_.dim;
        handle_.clustering_model = handle_.similarity_model = handle_.cross_model = "file";
    }

    static FileProvider load(const std::filesystem::path& path) {
        return FileProvider(parse_embedding_file(read_file(path), path.string()));
    }

    const ProviderHandle& handle() const override { return handle_; }

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts, EmbedRole) override {
        std::vector<EmbeddingVector> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back(lookup(t));
        return out;
    }

    std::vector<double> score(std::span<const std::pair<std::string, std::string>> pairs) override {
        std::vector<double> out;
        out.reserve(pairs.size());
        for (const auto& [a, b] : pairs) out.push_back(cosine_pair_score(lookup(a), lookup(b)));
        return out;
    }

private:
    EmbeddingVector lookup(const std::string& text) const {
        auto it = file_.vectors.find(text_id(text));
        if (it == file_.vectors.end()) it = file_.vectors.find(text);
        if (it == file_.vectors.end()) throw LookupError("no precomputed embedding for text id " + text_id(text));
        return normalized(it->second);
    }

    EmbeddingFile file_;
    ProviderHandle handle_;
};

/// Memoizes another provider's embeddings per (role, text). Pair scores pass
/// through uncached.
class CachedProvider final : public EmbeddingProvider {
public:
    explicit CachedProvider(std::shared_ptr<EmbeddingProvider> inner) : inner_(std::move(inner)) {}

    const ProviderHandle& handle() const override { return inner_->handle(); }
    std::size_t max_chars() const override { return inner_->max_chars(); }

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts, EmbedRole role) override {
        std::vector<EmbeddingVector> out(texts.size());
        std::vector<std::string> missing;
        std::vector<std::size_t> slots;
        {
            std::lock_guard lock(mutex_);
            auto& cache = cache_[static_cast<int>(role)];
            for (std::size_t i = 0; i < texts.size(); ++i) {
                if (auto it = cache.find(texts[i]); it != cache.end()) {
                    out[i] = it->second;
                } else {
                    missing.push_back(texts[i]);
                    slots.push_back(i);
                }
            }
        }
        if (missing.empty()) return out;
        auto fresh = inner_->embed(missing, role);
        if (fresh.size() != missing.size()) throw TransportError("provider returned a wrong number of vectors");
        std::lock_guard lock(mutex_);
        auto& cache = cache_[static_cast<int>(role)];
        for (std::size_t j = 0; j < missing.size(); ++j) {
            cache.emplace(missing[j], fresh[j]);
            out[slots[j]] = std::move(fresh[j]);
        }
        return out;
    }

    std::vector<double> score(std::span<const std::pair<std::string, std::string>> pairs) override {
        return inner_->score(pairs);
    }

private:
    std::shared_ptr<EmbeddingProvider> inner_;
    std::mutex mutex_;
    std::unordered_map<std::string, EmbeddingVector> cache_[2];
};

}  // namespace qbd
