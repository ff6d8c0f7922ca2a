#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "error.hpp"
#include "rankers.hpp"
#include "util.hpp"

namespace qbd {

// ---------------------------------------------------------------------------
// Score aggregation

struct AggregationParams {
    double alpha = 48.0;  // lexical weight
    double beta = 36.0;   // neural weight
    /// Per-query min-max scaling of both lists within the pool before mixing.
    bool normalize = true;

    void validate() const {
        if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw ConfigError("aggregation.alpha", "must be >= 0");
        if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("aggregation.beta", "must be >= 0");
        if (!(alpha + beta > 0.0)) throw ConfigError("aggregation.beta", "alpha + beta must be > 0");
    }
};

namespace detail {

inline std::map<std::string, double> min_max(std::map<std::string, double> scores) {
    if (scores.empty()) return scores;
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& [d, s] : scores) {
        lo = std::min(lo, s);
        hi = std::max(hi, s);
    }
    for (auto& [d, s] : scores) s = hi > lo ? (s - lo) / (hi - lo) : 1.0;
    return scores;
}

}  // namespace detail

/// alpha * lexical + beta * neural over the documents both lists hold (the
/// re-rank pool).
inline RankedList aggregate_scores(const RankedList& lexical, const RankedList& neural, const AggregationParams& params) {
    params.validate();
    RankedList out;
    out.query_id = lexical.query_id;
    if (neural.entries.empty()) return out;

    std::map<std::string, double> lex, neu;
    std::map<std::string, double> lex_all;
    for (const auto& e : lexical.entries) lex_all.emplace(e.doc_id, e.score);
    for (const auto& e : neural.entries) {
        auto it = lex_all.find(e.doc_id);
        if (it == lex_all.end()) continue;
        lex.emplace(e.doc_id, it->second);
        neu.emplace(e.doc_id, e.score);
    }
    if (lex.empty()) throw ValidationError("lexical and neural lists share no documents", {lexical.query_id});
    if (params.normalize) {
        lex = detail::min_max(std::move(lex));
        neu = detail::min_max(std::move(neu));
    }
    for (const auto& [d, s] : lex) out.entries.push_back({d, params.alpha * s + params.beta * neu.at(d)});
    out.sort();
    return out;
}

inline Run fuse_runs(const Run& lexical, const Run& neural, const AggregationParams& params) {
    std::vector<std::string> missing;
    for (const auto& [q, list] : neural)
        if (!lexical.count(q)) missing.push_back(q);
    if (!missing.empty()) throw ValidationError("neural run has queries absent from the lexical run", missing);
    Run out;
    for (const auto& [q, list] : neural) out.emplace(q, aggregate_scores(lexical.at(q), list, params));
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation

struct QueryCounts {
    std::size_t retrieved = 0;
    std::size_t relevant = 0;
    std::size_t correct = 0;

    friend bool operator==(const QueryCounts&, const QueryCounts&) = default;
};

inline double f_measure(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

/// Micro-averaged set metrics over the top `cutoff` documents per query, with
/// the macro averages alongside.
struct EvalResult {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
    std::size_t cutoff = 0;
    std::map<std::string, QueryCounts> per_query;
};

/// Every run query must be judged. Queries with fewer than `cutoff` results
/// contribute what they have.
inline EvalResult evaluate(const Run& run, const Qrels& qrels, std::size_t cutoff) {
    if (cutoff < 1) throw std::invalid_argument("evaluate: cutoff must be >= 1");
    std::vector<std::string> unjudged;
    for (const auto& [q, list] : run)
        if (!qrels.judgments.count(q)) unjudged.push_back(q);
    if (!unjudged.empty()) throw ValidationError("run contains unjudged queries", unjudged);

    EvalResult r;
    r.cutoff = cutoff;
    std::size_t retrieved = 0, relevant = 0, correct = 0;
    for (const auto& [q, list] : run) {
        const auto& rel = qrels.relevant(q);
        QueryCounts c;
        c.retrieved = std::min(cutoff, list.entries.size());
        c.relevant = rel.size();
        for (std::size_t i = 0; i < c.retrieved; ++i) c.correct += rel.count(list.entries[i].doc_id);
        retrieved += c.retrieved;
        relevant += c.relevant;
        correct += c.correct;
        const double p = c.retrieved ? static_cast<double>(c.correct) / c.retrieved : 0.0;
        const double rc = c.relevant ? static_cast<double>(c.correct) / c.relevant : 0.0;
        r.macro_precision += p;
        r.macro_recall += rc;
        r.macro_f1 += f_measure(p, rc);
        r.per_query.emplace(q, c);
    }
    if (!run.empty()) {
        const auto n = static_cast<double>(run.size());
        r.macro_precision /= n;
        r.macro_recall /= n;
        r.macro_f1 /= n;
    }
    r.precision = retrieved ? static_cast<double>(correct) / retrieved : 0.0;
    r.recall = relevant ? static_cast<double>(correct) / relevant : 0.0;
    r.f1 = f_measure(r.precision, r.recall);
    return r;
}

struct SweepResult {
    std::size_t best_k = 0;
    std::vector<EvalResult> curve;  // one per k, ascending

    const EvalResult& best() const {
        for (const auto& e : curve)
            if (e.cutoff == best_k) return e;
        throw std::logic_error("sweep without best point");
    }
};

/// Evaluates each cutoff in [k_min, k_max] from per-query prefix counts; best
/// is the highest F1, smaller k on ties.
inline SweepResult sweep_cutoff(const Run& run, const Qrels& qrels, std::size_t k_min, std::size_t k_max) {
    if (k_min < 1 || k_max < k_min) throw std::invalid_argument("sweep_cutoff: need 1 <= k_min <= k_max");
    std::vector<std::string> unjudged;
    for (const auto& [q, list] : run)
        if (!qrels.judgments.count(q)) unjudged.push_back(q);
    if (!unjudged.empty()) throw ValidationError("run contains unjudged queries", unjudged);

    // correct[q][i] = relevant documents among the first i entries of q
    std::vector<std::vector<std::size_t>> correct;
    std::vector<std::size_t> relevant, listed;
    for (const auto& [q, list] : run) {
        const auto& rel = qrels.relevant(q);
        const std::size_t n = std::min(k_max, list.entries.size());
        std::vector<std::size_t> prefix(n + 1, 0);
        for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + rel.count(list.entries[i].doc_id);
        correct.push_back(std::move(prefix));
        relevant.push_back(rel.size());
        listed.push_back(n);
    }

    SweepResult s;
    double best = -1.0;
    for (std::size_t k = k_min; k <= k_max; ++k) {
        EvalResult r;
        r.cutoff = k;
        std::size_t retrieved = 0, rel_total = 0, hits = 0, qi = 0;
        for (const auto& [q, list] : run) {
            QueryCounts c{std::min(k, listed[qi]), relevant[qi], 0};
            c.correct = correct[qi][c.retrieved];
            retrieved += c.retrieved;
            rel_total += c.relevant;
            hits += c.correct;
            const double p = c.retrieved ? static_cast<double>(c.correct) / c.retrieved : 0.0;
            const double rc = c.relevant ? static_cast<double>(c.correct) / c.relevant : 0.0;
            r.macro_precision += p;
            r.macro_recall += rc;
            r.macro_f1 += f_measure(p, rc);
            r.per_query.emplace_hint(r.per_query.end(), q, c);
            ++qi;
        }
        if (!run.empty()) {
            const auto n = static_cast<double>(run.size());
            r.macro_precision /= n;
            r.macro_recall /= n;
            r.macro_f1 /= n;
        }
        r.precision = retrieved ? static_cast<double>(hits) / retrieved : 0.0;
        r.recall = rel_total ? static_cast<double>(hits) / rel_total : 0.0;
        r.f1 = f_measure(r.precision, r.recall);
        s.curve.push_back(std::move(r));
        if (s.curve.back().f1 > best) {
            best = s.curve.back().f1;
            s.best_k = k;
        }
    }
    return s;
}

inline nlohmann::json to_json(const EvalResult& r, bool with_queries = true) {
    nlohmann::json j{{"cutoff", r.cutoff},
                     {"precision", r.precision},
                     {"recall", r.recall},
                     {"f1", r.f1},
                     {"macro", {{"precision", r.macro_precision}, {"recall", r.macro_recall}, {"f1", r.macro_f1}}}};
    if (with_queries) {
        auto& pq = j["per_query"] = nlohmann::json::object();
        for (const auto& [q, c] : r.per_query)
            pq[q] = {{"retrieved", c.retrieved}, {"relevant", c.relevant}, {"correct", c.correct}};
    }
    return j;
}

/// `k,P,R,F1` rows.
inline std::string curve_to_csv(const SweepResult& s) {
    std::string out = "k,P,R,F1\n";
    for (const auto& e : s.curve)
        out += std::to_string(e.cutoff) + "," + format_double(e.precision) + "," + format_double(e.recall) + "," +
               format_double(e.f1) + "\n";
    return out;
}

// ---------------------------------------------------------------------------
// Grid search

enum class Objective { F1, P_AT_K };

using Assignment = std::vector<std::pair<std::string, double>>;

inline double value_of(const Assignment& a, std::string_view name) {
    for (const auto& [k, v] : a)
        if (k == name) return v;
    throw std::out_of_range("assignment has no parameter '" + std::string(name) + "'");
}

struct GridSpec {
    /// Enumerated with the first parameter outermost.
    std::vector<std::pair<std::string, std::vector<double>>> parameters;
    Objective objective = Objective::F1;
    std::size_t objective_k = 4;

    std::size_t size() const {
        std::size_t n = 1;
        for (const auto& [name, values] : parameters) n *= values.size();
        return n;
    }

    Assignment point(std::size_t flat) const {
        Assignment a(parameters.size());
        for (std::size_t i = parameters.size(); i-- > 0;) {
            const auto& values = parameters[i].second;
            a[i] = {parameters[i].first, values[flat % values.size()]};
            flat /= values.size();
        }
        return a;
    }
};

inline double objective_value(const EvalResult& r, Objective o) { return o == Objective::F1 ? r.f1 : r.precision; }

struct GridPoint {
    Assignment assignment;
    std::optional<EvalResult> result;
    std::string error;
    double objective = 0.0;
};

struct GridResult {
    Assignment best;
    EvalResult best_result;
    std::vector<GridPoint> ledger;  // enumeration order
};

/// Exhaustive Cartesian search. A failing point is logged and skipped; the
/// best point is the earliest one reaching the maximal objective, regardless
/// of how many threads evaluated the grid.
inline GridResult grid_search(const GridSpec& spec, const std::function<EvalResult(const Assignment&)>& eval_fn,
                              unsigned threads = 1) {
    if (spec.parameters.empty()) throw std::invalid_argument("grid_search: no parameters");
    for (const auto& [name, values] : spec.parameters)
        if (values.empty()) throw ConfigError("grid." + name, "empty value list");
    const std::size_t n = spec.size();
    GridResult g;
    g.ledger.resize(n);
    parallel_for(n, threads, [&](std::size_t i) {
        auto& p = g.ledger[i];
        p.assignment = spec.point(i);
        try {
            p.result = eval_fn(p.assignment);
            p.objective = objective_value(*p.result, spec.objective);
        } catch (const std::exception& e) {
            p.error = e.what();
        }
    });
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < n; ++i) {
        if (!g.ledger[i].result) continue;
        if (!best || g.ledger[i].objective > g.ledger[*best].objective) best = i;
    }
    if (!best) throw Error("grid_search: every grid point failed (first error: " + g.ledger.front().error + ")");
    g.best = g.ledger[*best].assignment;
    g.best_result = *g.ledger[*best].result;
    return g;
}

inline nlohmann::json to_json(const GridResult& g) {
    auto assignment_json = [](const Assignment& a) {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [k, v] : a) j[k] = v;
        return j;
    };
    nlohmann::json j;
    j["best"] = assignment_json(g.best);
    j["best_result"] = to_json(g.best_result, false);
    auto& rows = j["ledger"] = nlohmann::json::array();
    for (const auto& p : g.ledger) {
        nlohmann::json row{{"params", assignment_json(p.assignment)}};
        if (p.result) {
            row["objective"] = p.objective;
            row["result"] = to_json(*p.result, false);
        } else {
            row["error"] = p.error;
        }
        rows.push_back(std::move(row));
    }
    return j;
}

/// lo, lo + step, ..., hi computed as lo + i * step to avoid drift.
inline std::vector<double> linear_grid(double lo, double hi, double step) {
    std::vector<double> out;
    const auto n = static_cast<std::size_t>(std::floor((hi - lo) / step + 1e-9));
    for (std::size_t i = 0; i <= n; ++i) out.push_back(std::round((lo + static_cast<double>(i) * step) * 1e9) / 1e9);
    return out;
}

/// k1 in {0, 0.1, ..., 3} x b in {0, 0.1, ..., 1}: 341 points.
inline GridSpec bm25_default_grid() {
    return {{{"k1", linear_grid(0.0, 3.0, 0.1)}, {"b", linear_grid(0.0, 1.0, 0.1)}}, Objective::F1, 4};
}

inline GridSpec lmjm_default_grid() { return {{{"lambda", linear_grid(0.1, 1.0, 0.1)}}, Objective::F1, 4}; }

/// DFR is tuned for precision at 4.
inline GridSpec dfr_default_grid() {
    return {{{"c", {0.05, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0}}}, Objective::P_AT_K, 4};
}

/// alpha, beta in {1, ..., 100}: 10,000 points.
inline GridSpec fusion_default_grid() {
    return {{{"alpha", linear_grid(1.0, 100.0, 1.0)}, {"beta", linear_grid(1.0, 100.0, 1.0)}}, Objective::F1, 5};
}

}  // namespace qbd
