#pragma once

#include <algorithm>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "corpus.hpp"
#include "embed.hpp"
#include "termex.hpp"

namespace qbd {

enum class Diversifier { MMR, MAXSUM, NONE };

inline std::optional<Diversifier> parse_diversifier(std::string_view s) {
    if (s == "mmr") return Diversifier::MMR;
    if (s == "maxsum") return Diversifier::MAXSUM;
    if (s == "none") return Diversifier::NONE;
    return std::nullopt;
}

inline std::string to_string(Diversifier d) {
    switch (d) {
        case Diversifier::MMR: return "mmr";
        case Diversifier::MAXSUM: return "maxsum";
        case Diversifier::NONE: return "none";
    }
    return "?";
}

struct KeyexParams {
    int ngram_min = 1;
    int ngram_max = 2;
    int top_n = 20;
    Diversifier diversifier = Diversifier::MMR;
    /// Redundancy weight in MMR (KeyBERT's `diversity`); relevance gets 1 - diversity.
    double diversity = 0.6;
    /// Max-Sum candidate pool = pool_mult * top_n, capped at kMaxSumPoolCap.
    int pool_mult = 2;
    int min_token_length = 2;
    std::set<std::string> stopwords = english_stopwords();

    void validate() const {
        if (ngram_min < 1 || ngram_max < ngram_min) throw ConfigError("keyex.ngram_max", "need 1 <= ngram_min <= ngram_max");
        if (top_n < 1) throw ConfigError("keyex.top_n", "must be >= 1");
        if (!(diversity >= 0.0 && diversity <= 1.0)) throw ConfigError("keyex.diversity", "must lie in [0, 1]");
        if (pool_mult < 1) throw ConfigError("keyex.pool_mult", "must be >= 1");
        if (min_token_length < 1) throw ConfigError("keyex.min_token_length", "must be >= 1");
    }
};

inline constexpr std::size_t kMaxSumPoolCap = 20;

/// Lowercased text with every non-token run collapsed to one space. Extracted
/// n-grams are always substrings of this form of their paragraph.
inline std::string normalize_for_match(std::string_view text) {
    std::string out;
    for (const auto& t : tokenize(text, baseline_tokenizer())) {
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

/// Unique n-grams of adjacent tokens in order of first occurrence (an n-gram
/// is listed when its last token is read, shorter n first). The first and last
/// token of an n-gram must be non-stopwords of at least min_token_length.
inline std::vector<std::string> candidate_ngrams(std::string_view paragraph, const KeyexParams& params) {
    const auto tokens = tokenize(paragraph, baseline_tokenizer());
    auto eligible = [&](const std::string& t) {
        return static_cast<int>(t.size()) >= params.min_token_length && params.stopwords.count(t) == 0;
    };
    std::vector<std::string> out;
    std::set<std::string> seen;
    for (std::size_t end = 0; end < tokens.size(); ++end) {
        for (int n = params.ngram_min; n <= params.ngram_max; ++n) {
            if (static_cast<std::size_t>(n) > end + 1) break;
            const std::size_t begin = end + 1 - static_cast<std::size_t>(n);
            if (!eligible(tokens[begin]) || !eligible(tokens[end])) continue;
            std::string gram = tokens[begin];
            for (std::size_t i = begin + 1; i <= end; ++i) gram += " " + tokens[i];
            if (seen.insert(gram).second) out.push_back(std::move(gram));
        }
    }
    return out;
}

using Candidate = std::pair<std::string, EmbeddingVector>;

/// Candidates by cosine to the paragraph, highest first; equal cosines keep
/// input order. Sentinel vectors are dropped.
inline std::vector<TermScore> rank_by_doc_similarity(const EmbeddingVector& paragraph_vec,
                                                     std::span<const Candidate> candidates) {
    std::vector<TermScore> out;
    for (const auto& [text, vec] : candidates)
        if (vec.valid) out.push_back({text, cosine(vec, paragraph_vec)});
    std::stable_sort(out.begin(), out.end(), [](const TermScore& a, const TermScore& b) { return a.score > b.score; });
    return out;
}

/// Greedy maximal marginal relevance. `coeff` weighs relevance to the
/// paragraph against redundancy with picks so far:
/// coeff * cos(c, p) - (1 - coeff) * max_s cos(c, s).
inline std::vector<std::string> mmr_diversify(const EmbeddingVector& paragraph_vec, std::span<const Candidate> candidates,
                                              std::size_t top_n, double coeff) {
    if (!(coeff >= 0.0 && coeff <= 1.0)) throw std::invalid_argument("mmr_diversify: coeff must lie in [0, 1]");
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < candidates.size(); ++i)
        if (candidates[i].second.valid) pool.push_back(i);
    std::vector<double> relevance(candidates.size(), 0.0);
    for (auto i : pool) relevance[i] = cosine(candidates[i].second, paragraph_vec);

    std::vector<std::size_t> picked;
    std::vector<double> redundancy(candidates.size(), -std::numeric_limits<double>::infinity());
    std::vector<char> used(candidates.size(), 0);
    while (picked.size() < top_n && picked.size() < pool.size()) {
        std::optional<std::size_t> best;
        double best_score = 0.0;
        for (auto i : pool) {
            if (used[i]) continue;
            const double s = picked.empty() ? relevance[i] : coeff * relevance[i] - (1.0 - coeff) * redundancy[i];
            if (!best || s > best_score) {
                best = i;
                best_score = s;
            }
        }
        used[*best] = 1;
        picked.push_back(*best);
        for (auto i : pool)
            if (!used[i]) redundancy[i] = std::max(redundancy[i], cosine(candidates[i].second, candidates[*best].second));
    }
    std::vector<std::string> out;
    out.reserve(picked.size());
    for (auto i : picked) out.push_back(candidates[i].first);
    return out;
}

/// Max-Sum similarity: from the pool_mult * top_n most paragraph-similar
/// candidates (at most kMaxSumPoolCap), the top_n-subset with the smallest
/// total pairwise cosine. Exhaustive; the lexicographically first index set
/// wins ties. Output keeps pool (similarity) order.
inline std::vector<std::string> max_sum_select(const EmbeddingVector& paragraph_vec,
                                               std::span<const Candidate> candidates, std::size_t top_n,
                                               std::size_t pool_mult) {
    if (pool_mult < 1) throw std::invalid_argument("max_sum_select: pool_mult must be >= 1");
    // rank indices, not strings, so duplicate candidate texts stay distinct
    std::vector<std::size_t> order;
    for (std::size_t i = 0; i < candidates.size(); ++i)
        if (candidates[i].second.valid) order.push_back(i);
    std::vector<double> sim(candidates.size(), 0.0);
    for (auto i : order) sim[i] = cosine(candidates[i].second, paragraph_vec);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return sim[a] > sim[b]; });
    const std::size_t pool_size = std::min({order.size(), pool_mult * top_n, kMaxSumPoolCap});
    order.resize(pool_size);

    std::vector<std::string> out;
    if (pool_size <= top_n) {
        for (auto i : order) out.push_back(candidates[i].first);
        return out;
    }
    std::vector<std::vector<double>> pair(pool_size, std::vector<double>(pool_size, 0.0));
    for (std::size_t a = 0; a < pool_size; ++a)
        for (std::size_t b = a + 1; b < pool_size; ++b)
            pair[a][b] = pair[b][a] = cosine(candidates[order[a]].second, candidates[order[b]].second);

    std::vector<std::size_t> combo(top_n);
    std::iota(combo.begin(), combo.end(), 0);
    std::vector<std::size_t> best = combo;
    double best_cost = std::numeric_limits<double>::infinity();
    for (;;) {
        double cost = 0.0;
        for (std::size_t x = 0; x < top_n; ++x)
            for (std::size_t y = x + 1; y < top_n; ++y) cost += pair[combo[x]][combo[y]];
        if (cost < best_cost - 1e-12) {
            best_cost = cost;
            best = combo;
        }
        // next combination in lexicographic order
        std::size_t i = top_n;
        while (i > 0 && combo[i - 1] == pool_size - top_n + (i - 1)) --i;
        if (i == 0) break;
        ++combo[i - 1];
        for (std::size_t j = i; j < top_n; ++j) combo[j] = combo[j - 1] + 1;
    }
    for (auto i : best) out.push_back(candidates[order[i]].first);
    return out;
}

/// Greedy whitespace chunks of at most max_chars (a single longer word is its
/// own chunk).
inline std::vector<std::string> chunk_text(std::string_view text, std::size_t max_chars) {
    std::vector<std::string> chunks;
    std::string current;
    std::istringstream in{std::string(text)};
    std::string word;
    while (in >> word) {
        if (!current.empty() && current.size() + 1 + word.size() > max_chars) {
            chunks.push_back(std::move(current));
            current.clear();
        }
        if (!current.empty()) current.push_back(' ');
        current += word;
    }
    if (!current.empty()) chunks.push_back(std::move(current));
    return chunks;
}

/// Paragraph vector; paragraphs over the provider's budget are mean-pooled
/// over their chunks.
inline EmbeddingVector embed_paragraph(EmbeddingProvider& provider, std::string_view paragraph) {
    const auto budget = std::max<std::size_t>(provider.max_chars(), 1);
    std::vector<std::string> chunks =
        paragraph.size() <= budget ? std::vector<std::string>{std::string(paragraph)} : chunk_text(paragraph, budget);
    if (chunks.empty()) return EmbeddingVector::sentinel(provider.handle().dim);
    auto vecs = embed_texts(provider, chunks, EmbedRole::SIMILARITY);
    if (vecs.size() == 1) return vecs.front();
    return mean_pool(vecs, vecs.front().dim());
}

/// Key phrases of one paragraph, in selection order.
inline std::vector<std::string> extract_keyphrases(std::string_view paragraph, EmbeddingProvider& provider,
                                                   const KeyexParams& params) {
    params.validate();
    const auto grams = candidate_ngrams(paragraph, params);
    if (grams.empty()) return {};
    const auto pvec = embed_paragraph(provider, paragraph);
    if (!pvec.valid) return {};
    const auto vecs = embed_texts(provider, grams, EmbedRole::SIMILARITY);
    std::vector<Candidate> cands;
    cands.reserve(grams.size());
    for (std::size_t i = 0; i < grams.size(); ++i) cands.emplace_back(grams[i], vecs[i]);
    const auto top_n = static_cast<std::size_t>(params.top_n);
    switch (params.diversifier) {
        case Diversifier::MMR: return mmr_diversify(pvec, cands, top_n, 1.0 - params.diversity);
        case Diversifier::MAXSUM: return max_sum_select(pvec, cands, top_n, static_cast<std::size_t>(params.pool_mult));
        case Diversifier::NONE: break;
    }
    std::vector<std::string> out;
    for (const auto& ts : rank_by_doc_similarity(pvec, cands)) {
        if (out.size() == top_n) break;
        out.push_back(ts.term);
    }
    return out;
}

/// Concatenates every paragraph's key phrases, in paragraph order, into one
/// keyword query (duplicates across paragraphs kept).
inline ReformulatedQuery reformulate_query_keyex(const CaseDocument& query_doc, EmbeddingProvider& provider,
                                                 const KeyexParams& params) {
    ReformulatedQuery q{query_doc.id, {}, QuerySource::KEYBERT, 1.0};
    for (const auto& paragraph : query_doc.paragraphs)
        for (const auto& phrase : extract_keyphrases(paragraph, provider, params)) {
            std::istringstream words(phrase);
            std::string w;
            while (words >> w) q.terms.push_back(w);
        }
    return q;
}

}  // namespace qbd
