#pragma once

// Stage orchestration over a whole query set: reformulate, search, re-rank,
// fuse, tune and evaluate.

#include <chrono>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "embed.hpp"
#include "error.hpp"
#include "index.hpp"
#include "keyex.hpp"
#include "pipeline.hpp"
#include "rankers.hpp"
#include "rerank.hpp"
#include "termex.hpp"
#include "util.hpp"

namespace qbd {

struct ReformulationParams {
    QuerySource method = QuerySource::KLI;
    double proportion = 0.4;
    double plm_lambda = 0.1;
    int plm_max_iters = 50;
    double plm_tol = 1e-6;
    KeyexParams keyex;
    /// Extraction-side tokenizer (candidates for KLI, PLM and IDF-r).
    TokenizerConfig extraction = TokenizerConfig::for_extraction();

    void validate() const {
        if (!(proportion > 0.0 && proportion <= 1.0)) throw ConfigError("reformulation.proportion", "must lie in (0, 1]");
        if (!(plm_lambda > 0.0 && plm_lambda <= 1.0)) throw ConfigError("reformulation.plm_lambda", "must lie in (0, 1]");
        if (plm_max_iters < 1) throw ConfigError("reformulation.plm_max_iters", "must be >= 1");
        if (!(plm_tol > 0.0)) throw ConfigError("reformulation.plm_tol", "must be > 0");
        extraction.validate();
        if (method == QuerySource::KEYBERT) keyex.validate();
    }
};

/// Summary-format queries: {"id": ..., "text": ...} per line.
inline std::map<std::string, std::string> load_summaries(const std::filesystem::path& path) {
    std::map<std::string, std::string> out;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            out[j.at("id").get<std::string>()] = j.at("text").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            throw IngestionError(path.string(), "line " + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

/// One query document to a keyword query. `provider` is needed only for
/// KEYBERT and `summaries` only for SUMMARY.
inline ReformulatedQuery reformulate(const CaseDocument& query, const InvertedIndex& index,
                                     const ReformulationParams& params, EmbeddingProvider* provider = nullptr,
                                     const std::map<std::string, std::string>* summaries = nullptr) {
    switch (params.method) {
        case QuerySource::ORIGINAL:
            return {query.id, tokenize(query.raw_text, index.tokenizer()), QuerySource::ORIGINAL, 1.0};
        case QuerySource::SUMMARY: {
            if (!summaries) throw ConfigError("reformulation.summaries", "summary method needs a summaries file");
            auto it = summaries->find(query.id);
            if (it == summaries->end()) throw LookupError("no summary for query '" + query.id + "'");
            return {query.id, tokenize(it->second, index.tokenizer()), QuerySource::SUMMARY, 1.0};
        }
        case QuerySource::KEYBERT:
            if (!provider) throw ConfigError("provider", "keyex method needs an embedding provider");
            return reformulate_query_keyex(query, *provider, params.keyex);
        default: break;
    }
    const auto tokens = tokenize(query.raw_text, params.extraction);
    if (tokens.empty()) throw ValidationError("query has no extractable terms", {query.id});
    if (params.method == QuerySource::KLI)
        return select_proportion(kli_scores(tokens, index), tokens, params.proportion, query.id, QuerySource::KLI);
    if (params.method == QuerySource::PLM)
        return select_proportion(plm_scores(tokens, index, params.plm_lambda, params.plm_max_iters, params.plm_tol), tokens,
                                 params.proportion, query.id, QuerySource::PLM);
    return idf_select(tokens, index, params.proportion, query.id);
}

inline std::vector<ReformulatedQuery> reformulate_all(const Corpus& corpus, std::span<const std::string> query_ids,
                                                      const InvertedIndex& index, const ReformulationParams& params,
                                                      EmbeddingProvider* provider = nullptr,
                                                      const std::map<std::string, std::string>* summaries = nullptr,
                                                      unsigned threads = 1) {
    params.validate();
    std::vector<ReformulatedQuery> out(query_ids.size());
    parallel_for(query_ids.size(), threads, [&](std::size_t i) {
        out[i] = reformulate(corpus.at(query_ids[i]), index, params, provider, summaries);
    });
    return out;
}

/// Scores every query; `depth` > 0 truncates each list.
inline Run search_all(const InvertedIndex& index, std::span<const ReformulatedQuery> queries, const RankerParams& params,
                      std::size_t depth = 0, unsigned threads = 1) {
    params.validate();
    std::vector<RankedList> lists(queries.size());
    parallel_for(queries.size(), threads, [&](std::size_t i) {
        lists[i] = score(index, queries[i].terms, params, queries[i].query_id);
        if (depth > 0) lists[i] = retrieve_topk(lists[i], depth);
    });
    Run run;
    for (auto& l : lists) {
        const auto id = l.query_id;
        if (!run.emplace(id, std::move(l)).second) throw ValidationError("duplicate query in query set", {id});
    }
    return run;
}

/// Cluster-driven re-ranking of every first-stage list. Queries whose
/// first-stage list is empty keep an empty list.
inline Run rerank_all(const Run& first_stage, const Corpus& corpus, EmbeddingProvider& provider,
                      const RerankParams& params) {
    params.validate();
    Run out;
    for (const auto& [q, list] : first_stage) {
        if (list.entries.empty()) {
            out.emplace(q, RankedList{q, {}});
            continue;
        }
        out.emplace(q, rerank_topk(list, corpus, provider, params));
    }
    return out;
}

/// Keeps only the listed queries.
inline Run restrict_run(const Run& run, std::span<const std::string> query_ids) {
    Run out;
    for (const auto& q : query_ids) {
        auto it = run.find(q);
        if (it != run.end()) out.emplace(q, it->second);
    }
    return out;
}

inline Qrels restrict_qrels(const Qrels& qrels, std::span<const std::string> query_ids) {
    Qrels out;
    for (const auto& q : query_ids) {
        auto it = qrels.judgments.find(q);
        if (it != qrels.judgments.end()) out.judgments.emplace(q, it->second);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tuning

/// Result used as a grid point's score: evaluation at objective_k, or the best
/// point of a cutoff sweep when objective_k is 0.
inline EvalResult tuning_eval(const Run& run, const Qrels& qrels, std::size_t objective_k, std::size_t k_min,
                              std::size_t k_max) {
    if (objective_k > 0) return evaluate(run, qrels, objective_k);
    return sweep_cutoff(run, qrels, k_min, k_max).best();
}

struct TuneSettings {
    /// 0 = best over the sweep range.
    std::size_t objective_k = 4;
    std::size_t k_min = 1;
    std::size_t k_max = 20;
    unsigned threads = 1;
};

inline RankerParams apply_assignment(RankerParams p, const Assignment& a) {
    for (const auto& [name, v] : a) {
        if (name == "k1") p.k1 = v;
        else if (name == "b") p.b = v;
        else if (name == "lambda") p.lambda = v;
        else if (name == "c") p.c = v;
        else throw ConfigError("grid." + name, "not a ranker parameter");
    }
    return p;
}

inline GridResult tune_ranker(const InvertedIndex& index, std::span<const ReformulatedQuery> queries, const Qrels& qrels,
                              const RankerParams& base, GridSpec spec, const TuneSettings& settings) {
    spec.objective_k = settings.objective_k;
    return grid_search(
        spec,
        [&](const Assignment& a) {
            const auto run = search_all(index, queries, apply_assignment(base, a), 0, 1);
            return tuning_eval(run, qrels, settings.objective_k, settings.k_min, settings.k_max);
        },
        settings.threads);
}

inline AggregationParams apply_assignment(AggregationParams p, const Assignment& a) {
    for (const auto& [name, v] : a) {
        if (name == "alpha") p.alpha = v;
        else if (name == "beta") p.beta = v;
        else throw ConfigError("grid." + name, "not an aggregation parameter");
    }
    return p;
}

inline GridResult tune_fusion(const Run& lexical, const Run& neural, const Qrels& qrels, const AggregationParams& base,
                              GridSpec spec, const TuneSettings& settings) {
    spec.objective_k = settings.objective_k;
    return grid_search(
        spec,
        [&](const Assignment& a) {
            const auto fused = fuse_runs(lexical, neural, apply_assignment(base, a));
            return tuning_eval(fused, qrels, settings.objective_k, settings.k_min, settings.k_max);
        },
        settings.threads);
}

// ---------------------------------------------------------------------------
// End to end

struct PipelineSettings {
    TokenizerConfig tokenizer = TokenizerConfig::for_indexing();
    ReformulationParams reformulation;
    RankerParams ranker;
    bool tune_ranker = false;
    GridSpec ranker_grid = bm25_default_grid();
    TuneSettings ranker_tuning;
    RerankParams rerank;
    AggregationParams aggregation;
    bool tune_fusion = true;
    GridSpec fusion_grid = fusion_default_grid();
    TuneSettings fusion_tuning{5, 1, 20, 1};
    std::size_t k_min = 1;
    std::size_t k_max = 20;
    /// Queries evaluated; empty = every query of the corpus.
    std::vector<std::string> queries;
    /// Queries used for tuning; empty = the evaluated queries.
    std::vector<std::string> tuning_queries;
};

struct StageReport {
    SweepResult sweep;
    double seconds = 0.0;
};

struct PipelineReport {
    std::vector<ReformulatedQuery> queries;
    RankerParams ranker;
    AggregationParams aggregation;
    std::optional<GridResult> ranker_grid;
    std::optional<GridResult> fusion_grid;
    Run lexical;  // full first-stage lists
    Run reranked;
    Run fused;
    StageReport lexical_eval, rerank_eval, fusion_eval;
    double seconds = 0.0;
};

namespace detail {

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace detail

/// Runs reformulation, lexical ranking (optionally tuned), cluster-driven
/// re-ranking, fusion (optionally tuned) and a cutoff sweep per stage.
/// `corpus` holds queries and candidates; the index covers candidates only.
inline PipelineReport run_pipeline(const Corpus& corpus, const Qrels& qrels, const InvertedIndex& index,
                                   EmbeddingProvider& provider, const PipelineSettings& s,
                                   const std::map<std::string, std::string>* summaries = nullptr, unsigned threads = 1) {
    const auto t_start = std::chrono::steady_clock::now();
    s.reformulation.validate();
    s.ranker.validate();
    s.rerank.validate();
    s.aggregation.validate();
    if (s.k_min < 1 || s.k_max < s.k_min) throw ConfigError("eval.k_max", "need 1 <= k_min <= k_max");
    if (s.k_max > s.rerank.depth) throw ConfigError("eval.k_max", "cutoffs may not exceed the re-rank depth");

    PipelineReport r;
    const std::vector<std::string> eval_ids = s.queries.empty() ? corpus.query_ids : s.queries;
    const std::vector<std::string> tune_ids = s.tuning_queries.empty() ? eval_ids : s.tuning_queries;
    std::vector<std::string> all_ids = eval_ids;
    for (const auto& q : tune_ids)
        if (std::find(all_ids.begin(), all_ids.end(), q) == all_ids.end()) all_ids.push_back(q);
    const auto eval_qrels = restrict_qrels(qrels, eval_ids);
    const auto tune_qrels = restrict_qrels(qrels, tune_ids);

    r.queries = reformulate_all(corpus, all_ids, index, s.reformulation, &provider, summaries, threads);
    r.ranker = s.ranker;
    r.aggregation = s.aggregation;

    auto t0 = std::chrono::steady_clock::now();
    if (s.tune_ranker) {
        std::vector<ReformulatedQuery> tune_queries;
        for (const auto& q : r.queries)
            if (tune_qrels.judgments.count(q.query_id)) tune_queries.push_back(q);
        auto settings = s.ranker_tuning;
        settings.threads = threads;
        r.ranker_grid = tune_ranker(index, tune_queries, tune_qrels, s.ranker, s.ranker_grid, settings);
        r.ranker = apply_assignment(s.ranker, r.ranker_grid->best);
    }
    r.lexical = search_all(index, r.queries, r.ranker, 0, threads);
    r.lexical_eval.sweep = sweep_cutoff(restrict_run(r.lexical, eval_ids), eval_qrels, s.k_min, s.k_max);
    r.lexical_eval.seconds = detail::seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    auto rerank_params = s.rerank;
    rerank_params.threads = threads;
    r.reranked = rerank_all(r.lexical, corpus, provider, rerank_params);
    r.rerank_eval.sweep = sweep_cutoff(restrict_run(r.reranked, eval_ids), eval_qrels, s.k_min, s.k_max);
    r.rerank_eval.seconds = detail::seconds_since(t0);

    t0 = std::chrono::steady_clock::now();
    // fusion needs a shared pool, so queries with nothing retrieved drop out
    Run lex_pool, neu_pool;
    for (const auto& [q, list] : r.reranked) {
        if (list.entries.empty()) continue;
        lex_pool.emplace(q, r.lexical.at(q));
        neu_pool.emplace(q, list);
    }
    if (s.tune_fusion) {
        auto settings = s.fusion_tuning;
        settings.threads = threads;
        r.fusion_grid = tune_fusion(restrict_run(lex_pool, tune_ids), restrict_run(neu_pool, tune_ids), tune_qrels,
                                    s.aggregation, s.fusion_grid, settings);
        r.aggregation = apply_assignment(s.aggregation, r.fusion_grid->best);
    }
    r.fused = fuse_runs(lex_pool, neu_pool, r.aggregation);
    for (const auto& [q, list] : r.reranked)
        if (list.entries.empty()) r.fused.emplace(q, RankedList{q, {}});
    r.fusion_eval.sweep = sweep_cutoff(restrict_run(r.fused, eval_ids), eval_qrels, s.k_min, s.k_max);
    r.fusion_eval.seconds = detail::seconds_since(t0);
    r.seconds = detail::seconds_since(t_start);
    return r;
}

inline nlohmann::json to_json(const RankerParams& p) {
    return {{"model", to_string(p.model)}, {"k1", p.k1}, {"b", p.b}, {"lambda", p.lambda}, {"c", p.c}};
}

inline nlohmann::json to_json(const StageReport& s) {
    nlohmann::json curve = nlohmann::json::array();
    for (const auto& e : s.sweep.curve) curve.push_back(to_json(e, false));
    return {{"best_k", s.sweep.best_k}, {"best", to_json(s.sweep.best(), false)}, {"curve", curve}, {"seconds", s.seconds}};
}

/// Summary without the runs or the grid ledgers. `with_timing` = false gives a
/// byte-stable document for fixed inputs.
inline nlohmann::json to_json(const PipelineReport& r, bool with_timing = true) {
    auto strip = [&](nlohmann::json j) {
        if (!with_timing) j.erase("seconds");
        return j;
    };
    nlohmann::json j{{"ranker", to_json(r.ranker)},
                     {"aggregation",
                      {{"alpha", r.aggregation.alpha}, {"beta", r.aggregation.beta}, {"normalize", r.aggregation.normalize}}},
                     {"lexical", strip(to_json(r.lexical_eval))},
                     {"rerank", strip(to_json(r.rerank_eval))},
                     {"fusion", strip(to_json(r.fusion_eval))}};
    auto grid_summary = [](const GridResult& g) {
        auto full = to_json(g);
        return nlohmann::json{{"points", g.ledger.size()}, {"best", full["best"]}, {"best_result", full["best_result"]}};
    };
    if (r.ranker_grid) j["ranker_tuning"] = grid_summary(*r.ranker_grid);
    if (r.fusion_grid) j["fusion_tuning"] = grid_summary(*r.fusion_grid);
    if (with_timing) j["seconds"] = r.seconds;
    return j;
}

}  // namespace qbd
