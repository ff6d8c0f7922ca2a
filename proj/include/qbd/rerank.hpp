#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "corpus.hpp"
#include "embed.hpp"
#include "error.hpp"
#include "kmeans.hpp"
#include "rankers.hpp"
#include "util.hpp"

namespace qbd {

struct RerankParams {
    std::size_t k = 3;
    std::size_t depth = 50;
    std::uint64_t kmeans_seed = 42;
    int kmeans_restarts = 4;
    int kmeans_max_iters = 100;
    /// Workers for per-document scoring; 0 = all cores.
    unsigned threads = 1;

    void validate() const {
        if (k < 1) throw ConfigError("rerank.k", "must be >= 1");
        if (depth < 1) throw ConfigError("rerank.depth", "must be >= 1");
        if (kmeans_restarts < 1) throw ConfigError("rerank.kmeans_restarts", "must be >= 1");
        if (kmeans_max_iters < 1) throw ConfigError("rerank.kmeans_max_iters", "must be >= 1");
    }
};

struct Representative {
    std::size_t index;  // position in the query's sentence list
    std::string text;
    EmbeddingVector vector;  // clustering-role embedding
};

/// The query stand-in: one sentence per cluster, ordered by sentence index.
struct RepresentativeSet {
    std::string query_id;
    std::vector<Representative> sentences;

    std::vector<std::string> texts() const {
        std::vector<std::string> out;
        for (const auto& r : sentences) out.push_back(r.text);
        return out;
    }
};

struct SentenceMatch {
    std::size_t query_sentence;  // index into RepresentativeSet::sentences
    std::size_t doc_sentence;    // index into CaseDocument::sentences
    double cosine = 0.0;
    double pair_relevance = 0.0;
};

/// Clusters the query's sentence embeddings and keeps, per cluster, the member
/// closest to the cluster mean. With at most k embeddable sentences every one
/// of them is returned.
inline RepresentativeSet representative_sentences(const CaseDocument& query, EmbeddingProvider& provider,
                                                  const RerankParams& params) {
    params.validate();
    if (query.sentences.empty()) throw std::invalid_argument("representative_sentences: query has no sentences");
    const auto vecs = embed_texts(provider, query.sentences, EmbedRole::CLUSTERING);

    std::vector<std::size_t> usable;
    for (std::size_t i = 0; i < vecs.size(); ++i)
        if (vecs[i].valid) usable.push_back(i);
    if (usable.empty()) throw ValidationError("no query sentence yields a valid embedding", {query.id});

    RepresentativeSet out;
    out.query_id = query.id;
    if (usable.size() <= params.k) {
        for (auto i : usable) out.sentences.push_back({i, query.sentences[i], vecs[i]});
        return out;
    }

    std::vector<std::vector<double>> points;
    points.reserve(usable.size());
    for (auto i : usable) points.emplace_back(vecs[i].values.begin(), vecs[i].values.end());
    const auto km = kmeans(points, {params.k, params.kmeans_seed, params.kmeans_restarts, params.kmeans_max_iters});

    const std::size_t dim = points.front().size();
    for (std::size_t c = 0; c < params.k; ++c) {
        std::vector<double> mean(dim, 0.0);
        std::size_t members = 0;
        for (std::size_t p = 0; p < points.size(); ++p) {
            if (km.assignment[p] != c) continue;
            ++members;
            for (std::size_t j = 0; j < dim; ++j) mean[j] += points[p][j];
        }
        if (members == 0) continue;
        for (auto& x : mean) x /= static_cast<double>(members);
        std::size_t best = points.size();
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t p = 0; p < points.size(); ++p) {
            if (km.assignment[p] != c) continue;
            const double d = squared_distance(points[p], mean);
            if (d < best_d) {
                best_d = d;
                best = p;
            }
        }
        const auto idx = usable[best];
        out.sentences.push_back({idx, query.sentences[idx], vecs[idx]});
    }
    std::sort(out.sentences.begin(), out.sentences.end(),
              [](const Representative& a, const Representative& b) { return a.index < b.index; });
    return out;
}

/// For each representative, the doc sentence of highest cosine (lowest index
/// on ties). Both sides must come from the similarity encoder. A doc sentence
/// may serve several representatives.
inline std::vector<SentenceMatch> match_sentences(std::span<const EmbeddingVector> rep_vecs,
                                                  std::span<const EmbeddingVector> doc_vecs) {
    std::vector<SentenceMatch> out;
    for (std::size_t r = 0; r < rep_vecs.size(); ++r) {
        if (!rep_vecs[r].valid) continue;
        std::optional<SentenceMatch> best;
        for (std::size_t d = 0; d < doc_vecs.size(); ++d) {
            if (!doc_vecs[d].valid) continue;
            const double c = cosine(rep_vecs[r], doc_vecs[d]);
            if (!best || c > best->cosine) best = SentenceMatch{r, d, c, 0.0};
        }
        if (best) out.push_back(*best);
    }
    return out;
}

inline std::vector<SentenceMatch> match_sentences(const RepresentativeSet& reps, const CaseDocument& doc,
                                                  EmbeddingProvider& provider) {
    if (doc.sentences.empty()) throw std::invalid_argument("match_sentences: document has no sentences");
    if (reps.sentences.empty()) return {};
    const auto rep_vecs = embed_texts(provider, reps.texts(), EmbedRole::SIMILARITY);
    const auto doc_vecs = embed_texts(provider, doc.sentences, EmbedRole::SIMILARITY);
    return match_sentences(rep_vecs, doc_vecs);
}

/// Sum of pair relevance over the matches, each pair ordered (query sentence,
/// doc sentence). Fills SentenceMatch::pair_relevance.
inline double cluster_driven_score(const RepresentativeSet& reps, std::vector<SentenceMatch>& matches,
                                   const CaseDocument& doc, EmbeddingProvider& provider) {
    if (matches.empty()) return 0.0;
    std::vector<std::pair<std::string, std::string>> pairs;
    pairs.reserve(matches.size());
    for (const auto& m : matches) pairs.emplace_back(reps.sentences.at(m.query_sentence).text, doc.sentences.at(m.doc_sentence));
    const auto scores = score_pairs(provider, pairs);
    double total = 0.0;
    for (std::size_t i = 0; i < matches.size(); ++i) {
        matches[i].pair_relevance = scores[i];
        total += scores[i];
    }
    return total;
}

/// Re-scores the top `depth` first-stage entries with the cluster-driven
/// score; deeper entries are dropped.
inline RankedList rerank_topk(const RankedList& first_stage, const Corpus& corpus, EmbeddingProvider& provider,
                              const RerankParams& params) {
    params.validate();
    if (first_stage.entries.empty()) throw std::invalid_argument("rerank_topk: empty first-stage list");
    const auto pool = retrieve_topk(first_stage, params.depth);
    const auto& query = corpus.at(first_stage.query_id);
    const auto reps = representative_sentences(query, provider, params);
    const auto rep_vecs = embed_texts(provider, reps.texts(), EmbedRole::SIMILARITY);

    std::vector<double> scores(pool.entries.size(), 0.0);
    parallel_for(pool.entries.size(), params.threads, [&](std::size_t i) {
        const auto& doc = corpus.at(pool.entries[i].doc_id);
        if (doc.sentences.empty()) return;
        const auto doc_vecs = embed_texts(provider, doc.sentences, EmbedRole::SIMILARITY);
        auto matches = match_sentences(rep_vecs, doc_vecs);
        scores[i] = cluster_driven_score(reps, matches, doc, provider);
    });

    RankedList out;
    out.query_id = first_stage.query_id;
    for (std::size_t i = 0; i < pool.entries.size(); ++i) out.entries.push_back({pool.entries[i].doc_id, scores[i]});
    out.sort();
    return out;
}

}  // namespace qbd
