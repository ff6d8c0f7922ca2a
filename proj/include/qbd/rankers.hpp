#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "error.hpp"
#include "index.hpp"
#include "util.hpp"

namespace qbd {

struct ScoredDoc {
    std::string doc_id;
    double score = 0.0;

    friend bool operator==(const ScoredDoc&, const ScoredDoc&) = default;
};

/// Scored ranking for one query: score descending, ties by ascending doc id.
struct RankedList {
    std::string query_id;
    std::vector<ScoredDoc> entries;

    /// Re-establishes the ordering invariant.
    void sort() {
        std::sort(entries.begin(), entries.end(), [](const ScoredDoc& a, const ScoredDoc& b) {
            if (a.score != b.score) return a.score > b.score;
            return a.doc_id < b.doc_id;
        });
    }

    std::vector<std::string> doc_ids() const {
        std::vector<std::string> ids;
        ids.reserve(entries.size());
        for (const auto& e : entries) ids.push_back(e.doc_id);
        return ids;
    }

    friend bool operator==(const RankedList&, const RankedList&) = default;
};

/// A run: one RankedList per query id.
using Run = std::map<std::string, RankedList>;

enum class RankerModel { BM25, LMJM, DFR_InExpC2 };

inline std::string to_string(RankerModel m) {
    switch (m) {
        case RankerModel::BM25: return "bm25";
        case RankerModel::LMJM: return "lmjm";
        case RankerModel::DFR_InExpC2: return "dfr";
    }
    return "?";
}

inline std::optional<RankerModel> parse_ranker(std::string_view s) {
    if (s == "bm25") return RankerModel::BM25;
    if (s == "lmjm") return RankerModel::LMJM;
    if (s == "dfr") return RankerModel::DFR_InExpC2;
    return std::nullopt;
}

struct RankerParams {
    RankerModel model = RankerModel::BM25;
    double k1 = 1.2;
    double b = 0.75;
    double lambda = 0.1;
    double c = 0.1;

    /// Checks only the fields `model` reads.
    void validate() const {
        switch (model) {
            case RankerModel::BM25:
                if (!(k1 >= 0.0)) throw ConfigError("ranker.k1", "must be >= 0");
                if (!(b >= 0.0 && b <= 1.0)) throw ConfigError("ranker.b", "must lie in [0, 1]");
                break;
            case RankerModel::LMJM:
                if (!(lambda > 0.0 && lambda <= 1.0)) throw ConfigError("ranker.lambda", "must lie in (0, 1]");
                break;
            case RankerModel::DFR_InExpC2:
                if (!(c >= 0.0)) throw ConfigError("ranker.c", "must be >= 0");
                break;
        }
    }
};

namespace detail {

inline std::map<std::string, std::uint32_t> query_tf(std::span<const std::string> terms) {
    std::map<std::string, std::uint32_t> q;
    for (const auto& t : terms) ++q[t];
    return q;
}

inline RankedList collect(const InvertedIndex& index, std::string query_id, const std::vector<double>& scores,
                          const std::vector<char>& touched) {
    RankedList out;
    out.query_id = std::move(query_id);
    for (std::size_t d = 0; d < scores.size(); ++d)
        if (touched[d] && scores[d] != 0.0) out.entries.push_back({index.doc_id(static_cast<std::uint32_t>(d)), scores[d]});
    out.sort();
    return out;
}

}  // namespace detail

/// Okapi BM25 with the non-negative Lucene idf, ln(1 + (N - df + 0.5)/(df + 0.5)).
/// Unknown terms contribute nothing; zero-score documents are omitted.
inline RankedList score_bm25(const InvertedIndex& index, std::span<const std::string> query, double k1, double b,
                             std::string query_id = {}) {
    RankerParams{RankerModel::BM25, k1, b}.validate();
    const auto n = static_cast<double>(index.num_docs());
    std::vector<double> scores(index.num_docs(), 0.0);
    std::vector<char> touched(index.num_docs(), 0);
    for (const auto& [term, qtf] : detail::query_tf(query)) {
        const auto* stats = index.find(term);
        if (!stats) continue;
        const auto df = static_cast<double>(stats->df());
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        for (const auto& p : stats->postings) {
            const double tf = p.tf;
            const double norm = k1 * (1.0 - b + b * index.doc_len(p.doc) / index.avg_len());
            scores[p.doc] += qtf * idf * tf * (k1 + 1.0) / (tf + norm);
            touched[p.doc] = 1;
        }
    }
    return detail::collect(index, std::move(query_id), scores, touched);
}

/// Query likelihood with Jelinek-Mercer smoothing:
/// sum over in-vocabulary query terms of qtf * ln((1-l) tf/|d| + l cf/|C|).
/// Every document is scored once any query term is in the vocabulary.
inline RankedList score_lmjm(const InvertedIndex& index, std::span<const std::string> query, double lambda,
                             std::string query_id = {}) {
    RankerParams p{RankerModel::LMJM};
    p.lambda = lambda;
    p.validate();
    const std::size_t n = index.num_docs();
    std::vector<double> scores(n, 0.0);
    const auto total = static_cast<double>(index.total_tokens());
    bool any = false;
    std::vector<std::uint32_t> tf(n);
    for (const auto& [term, qtf] : detail::query_tf(query)) {
        const auto* stats = index.find(term);
        if (!stats || stats->cf == 0) continue;
        any = true;
        const double background = lambda * static_cast<double>(stats->cf) / total;
        std::fill(tf.begin(), tf.end(), 0u);
        for (const auto& post : stats->postings) tf[post.doc] = post.tf;
        for (std::size_t d = 0; d < n; ++d) {
            const auto len = index.doc_len(static_cast<std::uint32_t>(d));
            const double foreground = len == 0 ? 0.0 : (1.0 - lambda) * tf[d] / static_cast<double>(len);
            scores[d] += qtf * std::log(foreground + background);
        }
    }
    RankedList out;
    out.query_id = std::move(query_id);
    if (!any) return out;
    out.entries.reserve(n);
    for (std::size_t d = 0; d < n; ++d) out.entries.push_back({index.doc_id(static_cast<std::uint32_t>(d)), scores[d]});
    out.sort();
    return out;
}

/// Expected document frequency under the Bernoulli model: N (1 - ((N-1)/N)^cf).
inline double inexp_expected_df(double num_docs, double cf) {
    return num_docs * (1.0 - std::pow((num_docs - 1.0) / num_docs, cf));
}

/// DFR In_expC2: inverse expected document frequency, Bernoulli after-effect,
/// normalisation 2. Logs are base 2.
inline RankedList score_dfr_inexpc2(const InvertedIndex& index, std::span<const std::string> query, double c,
                                    std::string query_id = {}) {
    RankerParams p{RankerModel::DFR_InExpC2};
    p.c = c;
    p.validate();
    const auto n = static_cast<double>(index.num_docs());
    std::vector<double> scores(index.num_docs(), 0.0);
    std::vector<char> touched(index.num_docs(), 0);
    for (const auto& [term, qtf] : detail::query_tf(query)) {
        const auto* stats = index.find(term);
        if (!stats) continue;
        const auto cf = static_cast<double>(stats->cf);
        const auto df = static_cast<double>(stats->df());
        const double idf = std::log2((n + 1.0) / (inexp_expected_df(n, cf) + 0.5));
        for (const auto& post : stats->postings) {
            const auto len = index.doc_len(post.doc);
            if (len == 0) continue;
            const double tfn = post.tf * std::log2(1.0 + c * index.avg_len() / len);
            scores[post.doc] += qtf * (cf + 1.0) / (df * (tfn + 1.0)) * tfn * idf;
            touched[post.doc] = 1;
        }
    }
    return detail::collect(index, std::move(query_id), scores, touched);
}

inline RankedList score(const InvertedIndex& index, std::span<const std::string> query, const RankerParams& params,
                        std::string query_id = {}) {
    switch (params.model) {
        case RankerModel::BM25: return score_bm25(index, query, params.k1, params.b, std::move(query_id));
        case RankerModel::LMJM: return score_lmjm(index, query, params.lambda, std::move(query_id));
        case RankerModel::DFR_InExpC2: return score_dfr_inexpc2(index, query, params.c, std::move(query_id));
    }
    throw std::invalid_argument("unknown ranker model");
}

inline RankedList retrieve_topk(const RankedList& ranked, std::size_t k) {
    if (k < 1) throw std::invalid_argument("retrieve_topk: k must be >= 1");
    RankedList out;
    out.query_id = ranked.query_id;
    const auto n = std::min(k, ranked.entries.size());
    out.entries.assign(ranked.entries.begin(), ranked.entries.begin() + static_cast<std::ptrdiff_t>(n));
    return out;
}

// TREC run format: `qid Q0 docid rank score tag`, rank starting at 1.

inline std::string format_trec_run(const Run& run, std::string_view tag) {
    std::string out;
    for (const auto& [qid, list] : run) {
        std::size_t rank = 1;
        for (const auto& e : list.entries) {
            out += qid;
            out += " Q0 ";
            out += e.doc_id;
            out += ' ';
            out += std::to_string(rank++);
            out += ' ';
            out += format_double(e.score);
            out += ' ';
            out += tag;
            out += '\n';
        }
    }
    return out;
}

/// Parses a TREC run. Entries are re-sorted by (score desc, doc id asc) so that
/// third-party runs satisfy the RankedList invariant; duplicate doc ids within
/// a query are rejected.
inline Run parse_trec_run(std::string_view text, const std::string& origin = "<run>") {
    Run run;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    std::map<std::string, std::set<std::string>> seen;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        std::istringstream fields(line);
        std::string qid, q0, docid, tag;
        long rank = 0;
        double s = 0.0;
        if (!(fields >> qid >> q0 >> docid >> rank >> s))
            throw IngestionError(origin, "malformed run line " + std::to_string(lineno));
        if (!seen[qid].insert(docid).second) throw ValidationError("duplicate document in run for query " + qid, {docid});
        auto& list = run[qid];
        list.query_id = qid;
        list.entries.push_back({docid, s});
    }
    for (auto& [q, list] : run) list.sort();
    return run;
}

inline Run load_trec_run(const std::filesystem::path& path) { return parse_trec_run(read_file(path), path.string()); }

}  // namespace qbd
