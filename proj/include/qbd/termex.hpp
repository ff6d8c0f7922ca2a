#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "error.hpp"
#include "index.hpp"

namespace qbd {

struct TermScore {
    std::string term;
    double score = 0.0;

    friend bool operator==(const TermScore&, const TermScore&) = default;
};

enum class QuerySource { KLI, PLM, IDF, KEYBERT, SUMMARY, ORIGINAL };

inline std::string to_string(QuerySource s) {
    switch (s) {
        case QuerySource::KLI: return "KLI";
        case QuerySource::PLM: return "PLM";
        case QuerySource::IDF: return "IDF";
        case QuerySource::KEYBERT: return "KEYBERT";
        case QuerySource::SUMMARY: return "SUMMARY";
        case QuerySource::ORIGINAL: return "ORIGINAL";
    }
    return "?";
}

inline std::optional<QuerySource> parse_query_source(std::string_view s) {
    for (auto q : {QuerySource::KLI, QuerySource::PLM, QuerySource::IDF, QuerySource::KEYBERT, QuerySource::SUMMARY,
                   QuerySource::ORIGINAL})
        if (to_string(q) == s) return q;
    return std::nullopt;
}

/// A keyword-style query: a token multiset in source order.
struct ReformulatedQuery {
    std::string query_id;
    std::vector<std::string> terms;
    QuerySource source = QuerySource::ORIGINAL;
    double proportion = 1.0;

    friend bool operator==(const ReformulatedQuery&, const ReformulatedQuery&) = default;
};

/// Orders by score descending, then term ascending.
inline void sort_term_scores(std::vector<TermScore>& scores) {
    std::sort(scores.begin(), scores.end(), [](const TermScore& a, const TermScore& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.term < b.term;
    });
}

namespace detail {

inline std::map<std::string, std::uint32_t> term_counts(std::span<const std::string> tokens) {
    std::map<std::string, std::uint32_t> counts;
    for (const auto& t : tokens) ++counts[t];
    return counts;
}

/// ceil(p * n) guarded against products like 0.7 * 10 = 7.000000000000001.
inline std::size_t proportion_count(double p, std::size_t n) {
    const double x = p * static_cast<double>(n);
    return std::min(n, static_cast<std::size_t>(std::ceil(x - 1e-9)));
}

}  // namespace detail

/// P(t|C) from candidate-collection counts, floored at 1/(|C|+1) for terms the
/// collection never saw.
inline double background_probability(const InvertedIndex& index, const std::string& term) {
    const auto cf = index.cf(term);
    const auto total = static_cast<double>(index.total_tokens());
    if (cf == 0) return 1.0 / (total + 1.0);
    return static_cast<double>(cf) / total;
}

/// Kullback-Leibler informativeness of each unique query term:
/// P(t|Q) ln(P(t|Q) / P(t|C)), highest first.
inline std::vector<TermScore> kli_scores(std::span<const std::string> query_tokens, const InvertedIndex& index) {
    if (query_tokens.empty()) throw std::invalid_argument("kli_scores: empty query");
    const auto len = static_cast<double>(query_tokens.size());
    std::vector<TermScore> out;
    for (const auto& [term, tf] : detail::term_counts(query_tokens)) {
        const double pq = tf / len;
        out.push_back({term, pq * std::log(pq / background_probability(index, term))});
    }
    sort_term_scores(out);
    return out;
}

inline std::vector<TermScore> kli_scores(const CaseDocument& query_doc, const InvertedIndex& index,
                                         const TokenizerConfig& config = TokenizerConfig::for_extraction()) {
    return kli_scores(tokenize(query_doc.raw_text, config), index);
}

/// Parsimonious language model state. Maps are keyed by unique query term.
struct PLMState {
    double lambda = 0.1;
    std::map<std::string, double> p_fg;        // P(t|Q_d)
    std::map<std::string, double> e;           // expected counts, last E-step
    std::map<std::string, std::uint32_t> tf;   // tf(t, Q_d)
    std::map<std::string, double> background;  // P(t|C)
    int iterations = 0;
};

/// Starts at the maximum-likelihood estimate tf/|Q|.
inline PLMState plm_init(std::span<const std::string> query_tokens, const InvertedIndex& index, double lambda) {
    if (query_tokens.empty()) throw std::invalid_argument("plm: empty query");
    if (!(lambda > 0.0 && lambda <= 1.0)) throw std::invalid_argument("plm: lambda must lie in (0, 1]");
    PLMState s;
    s.lambda = lambda;
    s.tf = detail::term_counts(query_tokens);
    const auto len = static_cast<double>(query_tokens.size());
    for (const auto& [t, count] : s.tf) {
        s.p_fg[t] = count / len;
        s.e[t] = count;
        s.background[t] = background_probability(index, t);
    }
    return s;
}

/// One EM iteration. Returns max |delta P(t|Q_d)|.
inline double plm_step(PLMState& s) {
    double total = 0.0;
    for (const auto& [t, count] : s.tf) {
        const double fg = s.lambda * s.p_fg[t];
        const double denom = (1.0 - s.lambda) * s.background[t] + fg;
        const double e = denom > 0.0 ? count * fg / denom : 0.0;
        s.e[t] = e;
        total += e;
    }
    double delta = 0.0;
    for (auto& [t, p] : s.p_fg) {
        const double next = total > 0.0 ? s.e[t] / total : 0.0;
        delta = std::max(delta, std::abs(next - p));
        p = next;
    }
    ++s.iterations;
    return delta;
}

inline PLMState plm_estimate(std::span<const std::string> query_tokens, const InvertedIndex& index, double lambda,
                             int max_iters, double tol) {
    if (max_iters < 1) throw std::invalid_argument("plm: max_iters must be >= 1");
    auto s = plm_init(query_tokens, index, lambda);
    for (int i = 0; i < max_iters; ++i)
        if (plm_step(s) < tol) break;
    return s;
}

/// Terms ranked by their parsimonious foreground probability.
inline std::vector<TermScore> plm_scores(std::span<const std::string> query_tokens, const InvertedIndex& index,
                                         double lambda = 0.1, int max_iters = 50, double tol = 1e-6) {
    const auto s = plm_estimate(query_tokens, index, lambda, max_iters, tol);
    std::vector<TermScore> out;
    out.reserve(s.p_fg.size());
    for (const auto& [t, p] : s.p_fg) out.push_back({t, p});
    sort_term_scores(out);
    return out;
}

inline std::vector<TermScore> plm_scores(const CaseDocument& query_doc, const InvertedIndex& index, double lambda = 0.1,
                                         int max_iters = 50, double tol = 1e-6,
                                         const TokenizerConfig& config = TokenizerConfig::for_extraction()) {
    return plm_scores(tokenize(query_doc.raw_text, config), index, lambda, max_iters, tol);
}

/// Keeps the ceil(p*U) best of the U scored unique terms, then emits the query
/// tokens whose term was kept, preserving order and multiplicity.
inline ReformulatedQuery select_proportion(std::vector<TermScore> scores, std::span<const std::string> query_tokens,
                                           double proportion, std::string query_id = {},
                                           QuerySource source = QuerySource::KLI) {
    if (scores.empty()) throw std::invalid_argument("select_proportion: empty score list");
    if (!(proportion > 0.0 && proportion <= 1.0)) throw std::invalid_argument("select_proportion: proportion must lie in (0, 1]");
    sort_term_scores(scores);
    const auto keep = detail::proportion_count(proportion, scores.size());
    std::set<std::string> kept;
    for (std::size_t i = 0; i < keep; ++i) kept.insert(scores[i].term);
    ReformulatedQuery q{std::move(query_id), {}, source, proportion};
    for (const auto& t : query_tokens)
        if (kept.count(t)) q.terms.push_back(t);
    return q;
}

/// IDF-r: ln(N/df) ranking of unique query terms; unseen terms get ln(N+1).
inline std::vector<TermScore> idf_scores(std::span<const std::string> query_tokens, const InvertedIndex& index) {
    const auto n = static_cast<double>(index.num_docs());
    std::vector<TermScore> out;
    for (const auto& [term, tf] : detail::term_counts(query_tokens)) {
        const auto df = index.df(term);
        out.push_back({term, df == 0 ? std::log(n + 1.0) : std::log(n / static_cast<double>(df))});
    }
    sort_term_scores(out);
    return out;
}

inline ReformulatedQuery idf_select(std::span<const std::string> query_tokens, const InvertedIndex& index, double r,
                                    std::string query_id = {}) {
    if (query_tokens.empty()) throw std::invalid_argument("idf_select: empty query");
    return select_proportion(idf_scores(query_tokens, index), query_tokens, r, std::move(query_id), QuerySource::IDF);
}

inline ReformulatedQuery idf_select(const CaseDocument& query_doc, const InvertedIndex& index, double r,
                                    const TokenizerConfig& config = TokenizerConfig::for_extraction()) {
    return idf_select(tokenize(query_doc.raw_text, config), index, r, query_doc.id);
}

// JSONL: {"query_id": ..., "source": ..., "proportion": ..., "terms": [...]}

inline nlohmann::json to_json(const ReformulatedQuery& q) {
    return {{"query_id", q.query_id}, {"source", to_string(q.source)}, {"proportion", q.proportion}, {"terms", q.terms}};
}

inline ReformulatedQuery reformulated_query_from_json(const nlohmann::json& j) {
    ReformulatedQuery q;
    q.query_id = j.at("query_id").get<std::string>();
    const auto src = parse_query_source(j.at("source").get<std::string>());
    if (!src) throw ValidationError("unknown query source", {j.at("source").get<std::string>()});
    q.source = *src;
    q.proportion = j.value("proportion", 1.0);
    q.terms = j.at("terms").get<std::vector<std::string>>();
    return q;
}

inline std::string format_queries_jsonl(std::span<const ReformulatedQuery> queries) {
    std::string out;
    for (const auto& q : queries) out += to_json(q).dump() + "\n";
    return out;
}

inline std::vector<ReformulatedQuery> parse_queries_jsonl(std::string_view text, const std::string& origin = "<queries>") {
    std::vector<ReformulatedQuery> out;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        try {
            out.push_back(reformulated_query_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw IngestionError(origin, "line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace qbd
