#pragma once

// Command-line surface. Every stage reads and writes file artifacts; the
// `pipeline` command chains them from one config file.
//
// Exit status: 0 success, 1 runtime failure, 2 configuration or usage error,
// 3 missing or unreadable input. Failures print one JSON line on stderr.

#include <deque>
#include <filesystem>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "config.hpp"
#include "corpus.hpp"
#include "embed.hpp"
#include "embed_external.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "index.hpp"
#include "pipeline.hpp"
#include "rankers.hpp"
#include "synthetic.hpp"

namespace qbd {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Artifacts shared by the commands

/// `<dir>/index.json` (candidates only), `<dir>/corpus.jsonl` (every case,
/// queries first and flagged) and `<dir>/qrels.txt`.
struct IndexArtifact {
    InvertedIndex index;
    Corpus corpus;
    Qrels qrels;
};

inline std::string format_corpus_jsonl(const Corpus& corpus) {
    std::string out;
    for (const auto& q : corpus.query_ids)
        out += nlohmann::json{{"id", q}, {"text", corpus.at(q).raw_text}, {"query", true}}.dump() + "\n";
    for (const auto& [id, doc] : corpus.documents)
        if (!corpus.is_query(id)) out += nlohmann::json{{"id", id}, {"text", doc.raw_text}}.dump() + "\n";
    return out;
}

inline void write_index_artifact(const fs::path& dir, const InvertedIndex& index, const Corpus& corpus,
                                 const Qrels& qrels) {
    write_file_atomic(dir / "corpus.jsonl", format_corpus_jsonl(corpus));
    write_file_atomic(dir / "qrels.txt", format_trec_qrels(qrels));
    write_file_atomic(dir / "index.json", index.to_json().dump() + "\n");
}

inline IndexArtifact load_index_artifact(const fs::path& dir) {
    if (!fs::is_directory(dir)) throw IngestionError(dir.string(), "index directory not found");
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(dir / "index.json"));
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError((dir / "index.json").string(), e.what());
    }
    IndexArtifact a{InvertedIndex::from_json(j), {}, {}};
    a.corpus = load_jsonl_corpus(dir / "corpus.jsonl", a.index.tokenizer());
    a.qrels = load_trec_qrels(dir / "qrels.txt");
    return a;
}

/// Reads the collection described by `c`. Queries come from the labels (or
/// the JSONL query flags) in source order.
inline std::pair<Corpus, Qrels> load_collection(const CorpusConfig& c, const TokenizerConfig& tokenizer) {
    if (c.layout == "synthetic") {
        auto gen = generate_synthetic(c.synthetic);
        for (auto& [id, doc] : gen.corpus.documents) doc = make_document(id, std::move(doc.raw_text), tokenizer);
        return {std::move(gen.corpus), std::move(gen.qrels)};
    }
    if (c.layout == "jsonl") {
        auto corpus = load_jsonl_corpus(c.jsonl, tokenizer);
        auto qrels = load_trec_qrels(c.qrels);
        assign_queries(corpus, qrels);
        validate_qrels(corpus, qrels);
        return {std::move(corpus), std::move(qrels)};
    }
    if (c.layout == "coliee") return load_coliee_layout(c.case_dir, c.labels, tokenizer);
    throw ConfigError("corpus.layout", "must be coliee, jsonl or synthetic");
}

struct ServiceUrl {
    std::string host;
    int port = 80;
    std::string path = "/rpc";
};

inline ServiceUrl parse_service_url(const std::string& url) {
    static constexpr std::string_view scheme = "http://";
    if (url.rfind(scheme, 0) != 0) throw ConfigError("provider.url", "only http:// URLs are supported");
    ServiceUrl u;
    std::string rest = url.substr(scheme.size());
    if (const auto slash = rest.find('/'); slash != std::string::npos) {
        u.path = rest.substr(slash);
        rest.resize(slash);
    }
    if (const auto colon = rest.rfind(':'); colon != std::string::npos) {
        try {
            u.port = std::stoi(rest.substr(colon + 1));
        } catch (const std::exception&) {
            throw ConfigError("provider.url", "invalid port");
        }
        rest.resize(colon);
    }
    if (rest.empty()) throw ConfigError("provider.url", "missing host");
    u.host = rest;
    return u;
}

/// Builds the configured provider, memoized per (role, text).
inline std::shared_ptr<EmbeddingProvider> make_provider(const ProviderConfig& p) {
    std::shared_ptr<EmbeddingProvider> inner;
    switch (p.kind) {
        case ProviderKind::BASELINE: inner = std::make_shared<BaselineProvider>(p.dim); break;
        case ProviderKind::FILE: inner = std::make_shared<FileProvider>(FileProvider::load(p.file)); break;
        case ProviderKind::EXTERNAL: {
            ProviderHandle h;
            h.dim = p.dim;
            h.clustering_model = p.clustering_model;
            h.similarity_model = p.similarity_model;
            h.cross_model = p.cross_model;
            const std::chrono::milliseconds timeout(p.timeout_ms);
            std::unique_ptr<Transport> t;
            if (!p.url.empty()) {
                const auto u = parse_service_url(p.url);
                t = std::make_unique<HttpTransport>(u.host, u.port, u.path, timeout);
            } else {
                t = std::make_unique<StdioTransport>(p.command, timeout);
            }
            inner = std::make_shared<ExternalProvider>(h, std::move(t), p.max_batch, p.max_chars);
            break;
        }
    }
    return std::make_shared<CachedProvider>(std::move(inner));
}

/// `name=v1,v2,...` or `name=lo:hi:step`, parameters separated by ';'.
inline GridSpec parse_grid(const std::string& text, const GridSpec& defaults) {
    if (text.empty() || text == "default") return defaults;
    GridSpec spec = defaults;
    spec.parameters.clear();
    std::istringstream in(text);
    std::string part;
    while (std::getline(in, part, ';')) {
        const auto eq = part.find('=');
        if (eq == std::string::npos) throw ConfigError("grid", "expected name=values in '" + part + "'");
        const std::string name(detail::trim(part.substr(0, eq)));
        const std::string values = part.substr(eq + 1);
        if (std::none_of(defaults.parameters.begin(), defaults.parameters.end(),
                         [&](const auto& p) { return p.first == name; }))
            throw ConfigError("grid." + name, "not a tunable parameter here");
        std::vector<double> list;
        auto number = [&](const std::string& s) {
            char* end = nullptr;
            const double v = std::strtod(s.c_str(), &end);
            if (s.empty() || *end != '\0') throw ConfigError("grid." + name, "not a number: '" + s + "'");
            return v;
        };
        if (std::count(values.begin(), values.end(), ':') == 2) {
            const auto a = values.find(':'), b = values.find(':', a + 1);
            const double step = number(values.substr(b + 1));
            if (!(step > 0.0)) throw ConfigError("grid." + name, "step must be > 0");
            list = linear_grid(number(values.substr(0, a)), number(values.substr(a + 1, b - a - 1)), step);
        } else {
            std::istringstream vs(values);
            std::string v;
            while (std::getline(vs, v, ',')) list.push_back(number(std::string(detail::trim(v))));
        }
        if (list.empty()) throw ConfigError("grid." + name, "empty value list");
        spec.parameters.emplace_back(name, std::move(list));
    }
    return spec;
}

namespace detail {

/// Command-line options that override a dotted config path.
class Overrides {
public:
    void add(CLI::App* app, const std::string& flag, const std::string& path, const std::string& help) {
        slots_.push_back({path, {}, nullptr});
        slots_.back().option = app->add_option(flag, slots_.back().value, help);
    }

    void apply(PipelineConfig& config) const {
        for (const auto& s : slots_)
            if (s.option->count() > 0) set_config_value(config, s.path, s.value);
    }

private:
    struct Slot {
        std::string path;
        std::string value;
        CLI::Option* option;
    };
    std::deque<Slot> slots_;
};

inline void add_provider_options(CLI::App* app, Overrides& o) {
    o.add(app, "--provider", "provider.kind", "baseline | file | external");
    o.add(app, "--embeddings", "provider.file", "Embedding JSONL for the file provider");
    o.add(app, "--service-cmd", "provider.command", "External service spawned over stdio");
    o.add(app, "--service-url", "provider.url", "External service endpoint, http://host:port/rpc");
    o.add(app, "--dim", "provider.dim", "Embedding dimension (0 = learn from the service)");
}

inline std::string run_tag(const RankerParams& p) { return "qbd-" + to_string(p.model); }

inline Qrels resolve_qrels(const std::string& qrels_path, const std::string& index_dir) {
    if (!qrels_path.empty()) return load_trec_qrels(qrels_path);
    if (!index_dir.empty()) return load_trec_qrels(fs::path(index_dir) / "qrels.txt");
    throw ConfigError("qrels", "pass --qrels or --index");
}

inline bool all_exist(std::initializer_list<fs::path> paths) {
    for (const auto& p : paths)
        if (!fs::exists(p)) return false;
    return true;
}

inline nlohmann::json error_json(const std::string& kind, const std::string& message) {
    return {{"error", kind}, {"message", message}};
}

}  // namespace detail

/// Runs one command. `args` excludes the program name; `env` holds
/// NAME=VALUE entries searched for LEIBI_* overrides.
inline int run_command(const std::vector<std::string>& args, std::ostream& out = std::cout,
                       std::ostream& err = std::cerr, const std::vector<std::string>& env = process_environment()) {
    CLI::App app{"Query-by-document retrieval engine", "qbd"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all", "Show help for every command");

    std::string config_path;
    unsigned threads_opt = 0;
    bool resume = false;
    std::optional<std::uint64_t> seed_opt;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "TOML config supplying defaults");
        sub->add_option("--threads", threads_opt, "Worker threads (0 = all cores)");
        sub->add_option("--seed", seed_opt, "Seed for every stochastic choice");
        sub->add_flag("--resume", resume, "Skip when every output already exists");
    };
    detail::Overrides ov;

    // index
    auto* c_index = app.add_subcommand("index", "Ingest a corpus and build the candidate index");
    std::string corpus_path, labels_path, qrels_path, out_path;
    bool synthetic = false;
    c_index->add_option("--corpus", corpus_path, "Case directory (one .txt per case) or a JSONL corpus");
    c_index->add_option("--labels", labels_path, "Labels JSON for a case directory (default <corpus>/labels.json)");
    c_index->add_option("--qrels", qrels_path, "TREC qrels for a JSONL corpus");
    c_index->add_flag("--synthetic", synthetic, "Index the bundled synthetic collection");
    c_index->add_option("--out", out_path, "Output directory")->required();
    ov.add(c_index, "--min-token-length", "tokenizer.min_token_length", "Shortest kept token");
    ov.add(c_index, "--remove-stopwords", "tokenizer.remove_stopwords", "true | false");
    add_common(c_index);

    // reformulate
    auto* c_reform = app.add_subcommand("reformulate", "Turn query cases into keyword queries");
    std::string index_dir;
    c_reform->add_option("--index", index_dir, "Index directory")->required();
    c_reform->add_option("--out", out_path, "Output queries JSONL")->required();
    ov.add(c_reform, "--method", "reformulation.method", "kli | plm | idf | keyex | summary-file | original");
    ov.add(c_reform, "--proportion", "reformulation.proportion", "Share of unique terms kept");
    ov.add(c_reform, "--plm-lambda", "reformulation.plm_lambda", "PLM foreground weight");
    ov.add(c_reform, "--summaries", "reformulation.summaries", "JSONL {id, text} summaries for summary-file");
    ov.add(c_reform, "--top-n", "keyex.top_n", "Key phrases per paragraph");
    ov.add(c_reform, "--diversifier", "keyex.diversifier", "mmr | maxsum | none");
    ov.add(c_reform, "--diversity", "keyex.diversity", "MMR diversity");
    detail::add_provider_options(c_reform, ov);
    add_common(c_reform);

    // search
    auto* c_search = app.add_subcommand("search", "Rank candidates for every query");
    std::string queries_path, tag;
    std::size_t depth = 0;
    c_search->add_option("--index", index_dir, "Index directory")->required();
    c_search->add_option("--queries", queries_path, "Queries JSONL (default: reformulate on the fly)");
    c_search->add_option("--out", out_path, "Output TREC run")->required();
    c_search->add_option("--depth", depth, "Keep the top n per query (0 = all)");
    c_search->add_option("--tag", tag, "Run tag");
    ov.add(c_search, "--ranker", "ranker.model", "bm25 | lmjm | dfr");
    ov.add(c_search, "--k1", "ranker.k1", "BM25 k1");
    ov.add(c_search, "--b", "ranker.b", "BM25 b");
    ov.add(c_search, "--lambda", "ranker.lambda", "LM-JM lambda");
    ov.add(c_search, "--c", "ranker.c", "DFR c");
    ov.add(c_search, "--method", "reformulation.method", "Reformulation used without --queries");
    ov.add(c_search, "--proportion", "reformulation.proportion", "Share of unique terms kept");
    add_common(c_search);

    // rerank
    auto* c_rerank = app.add_subcommand("rerank", "Cluster-driven re-ranking of a first-stage run");
    std::string run_path;
    c_rerank->add_option("--index", index_dir, "Index directory")->required();
    c_rerank->add_option("--run", run_path, "First-stage TREC run")->required();
    c_rerank->add_option("--out", out_path, "Output TREC run")->required();
    c_rerank->add_option("--tag", tag, "Run tag");
    ov.add(c_rerank, "--k", "rerank.k", "Representative sentences per query");
    ov.add(c_rerank, "--depth", "rerank.depth", "Re-rank depth");
    ov.add(c_rerank, "--kmeans-seed", "rerank.kmeans_seed", "k-means seed");
    detail::add_provider_options(c_rerank, ov);
    add_common(c_rerank);

    // fuse
    auto* c_fuse = app.add_subcommand("fuse", "Linear aggregation of a lexical and a neural run");
    std::string lexical_path, neural_path;
    c_fuse->add_option("--lexical", lexical_path, "Lexical TREC run")->required();
    c_fuse->add_option("--neural", neural_path, "Neural TREC run")->required();
    c_fuse->add_option("--out", out_path, "Output TREC run")->required();
    c_fuse->add_option("--tag", tag, "Run tag");
    ov.add(c_fuse, "--alpha", "aggregation.alpha", "Lexical weight");
    ov.add(c_fuse, "--beta", "aggregation.beta", "Neural weight");
    ov.add(c_fuse, "--normalize", "aggregation.normalize", "Per-query min-max scaling: true | false");
    add_common(c_fuse);

    // evaluate
    auto* c_eval = app.add_subcommand("evaluate", "Micro P/R/F1 at one cutoff");
    std::size_t cutoff = 5;
    c_eval->add_option("--run", run_path, "TREC run")->required();
    c_eval->add_option("--qrels", qrels_path, "TREC qrels");
    c_eval->add_option("--index", index_dir, "Index directory supplying qrels.txt");
    c_eval->add_option("--cutoff", cutoff, "Cutoff k");
    c_eval->add_option("--out", out_path, "Output JSON report");
    add_common(c_eval);

    // sweep-cutoff
    auto* c_sweep = app.add_subcommand("sweep-cutoff", "Evaluate every cutoff in a range");
    std::string report_path;
    c_sweep->add_option("--run", run_path, "TREC run")->required();
    c_sweep->add_option("--qrels", qrels_path, "TREC qrels");
    c_sweep->add_option("--index", index_dir, "Index directory supplying qrels.txt");
    c_sweep->add_option("--out", out_path, "Output CSV (k,P,R,F1)")->required();
    c_sweep->add_option("--report", report_path, "Output JSON report");
    ov.add(c_sweep, "--k-min", "eval.k_min", "Smallest cutoff");
    ov.add(c_sweep, "--k-max", "eval.k_max", "Largest cutoff");
    add_common(c_sweep);

    // tune
    auto* c_tune = app.add_subcommand("tune", "Grid search of ranker or fusion parameters");
    std::string target, grid_text = "default", objective_text;
    std::optional<std::size_t> objective_k;
    c_tune->add_option("--ranker", target, "bm25 | lmjm | dfr | fusion")->required();
    c_tune->add_option("--grid", grid_text, "default, or name=v1,v2;name=lo:hi:step");
    c_tune->add_option("--index", index_dir, "Index directory");
    c_tune->add_option("--queries", queries_path, "Queries JSONL (default: reformulate on the fly)");
    c_tune->add_option("--qrels", qrels_path, "TREC qrels (default: the index's)");
    c_tune->add_option("--lexical", lexical_path, "Lexical run (fusion)");
    c_tune->add_option("--neural", neural_path, "Neural run (fusion)");
    c_tune->add_option("--objective", objective_text, "f1 | p_at_k");
    c_tune->add_option("--objective-k", objective_k, "Cutoff of the objective (0 = best over the sweep)");
    c_tune->add_option("--out", out_path, "Output ledger JSON")->required();
    ov.add(c_tune, "--method", "reformulation.method", "Reformulation used without --queries");
    ov.add(c_tune, "--proportion", "reformulation.proportion", "Share of unique terms kept");
    ov.add(c_tune, "--k-min", "eval.k_min", "Smallest cutoff of a sweep objective");
    ov.add(c_tune, "--k-max", "eval.k_max", "Largest cutoff of a sweep objective");
    add_common(c_tune);

    // pipeline
    auto* c_pipe = app.add_subcommand("pipeline", "End-to-end run from a config file");
    c_pipe->add_option("--out", out_path, "Output directory (overrides output.dir)");
    add_common(c_pipe);

    // generate-synthetic
    auto* c_gen = app.add_subcommand("generate-synthetic", "Write the synthetic collection as case files and labels");
    c_gen->add_option("--out", out_path, "Output directory")->required();
    ov.add(c_gen, "--candidates", "corpus.synthetic_candidates", "Candidate cases");
    ov.add(c_gen, "--queries", "corpus.synthetic_queries", "Query cases");
    add_common(c_gen);

    auto fail = [&](int code, nlohmann::json j) {
        err << j.dump() << "\n";
        return code;
    };

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        auto j = detail::error_json("usage", e.what());
        j["field"] = "argv";
        return fail(2, j);
    }

    try {
        PipelineConfig cfg;
        if (!config_path.empty()) apply_toml(cfg, read_file(config_path), config_path);
        apply_env_overrides(cfg, env);
        ov.apply(cfg);
        if (seed_opt) cfg.seed = seed_opt;
        if (threads_opt) cfg.threads = threads_opt;
        apply_seed(cfg);
        const unsigned threads = cfg.threads ? cfg.threads : default_threads();
        auto report = [&](nlohmann::json j) { out << j.dump() << "\n"; };
        auto skipped = [&](const fs::path& p) {
            report({{"command", app.get_subcommands().front()->get_name()}, {"skipped", true}, {"out", p.string()}});
            return 0;
        };

        if (app.got_subcommand(c_index)) {
            const fs::path dir = out_path;
            if (resume && detail::all_exist({dir / "index.json", dir / "corpus.jsonl", dir / "qrels.txt"})) return skipped(dir);
            cfg.tokenizer.validate();
            if (synthetic) {
                cfg.corpus.layout = "synthetic";
            } else if (corpus_path.empty()) {
                throw ConfigError("corpus", "pass --corpus or --synthetic");
            } else if (fs::is_regular_file(corpus_path)) {
                cfg.corpus.layout = "jsonl";
                cfg.corpus.jsonl = corpus_path;
                cfg.corpus.qrels = qrels_path;
                if (qrels_path.empty()) throw ConfigError("qrels", "a JSONL corpus needs --qrels");
            } else {
                if (!fs::is_directory(corpus_path)) throw IngestionError(corpus_path, "no such corpus");
                cfg.corpus.layout = "coliee";
                cfg.corpus.case_dir = corpus_path;
                cfg.corpus.labels = labels_path.empty() ? (fs::path(corpus_path) / "labels.json").string() : labels_path;
            }
            const auto [corpus, qrels] = load_collection(cfg.corpus, cfg.tokenizer);
            const auto index = build_index(corpus.candidates(), cfg.tokenizer);
            write_index_artifact(dir, index, corpus, qrels);
            report({{"command", "index"},
                    {"out", dir.string()},
                    {"documents", index.num_docs()},
                    {"queries", corpus.query_ids.size()},
                    {"terms", index.terms().size()}});
            return 0;
        }

        if (app.got_subcommand(c_reform)) {
            if (resume && fs::exists(out_path)) return skipped(out_path);
            cfg.reformulation.validate();
            const auto a = load_index_artifact(index_dir);
            std::optional<std::map<std::string, std::string>> summaries;
            if (cfg.reformulation.method == QuerySource::SUMMARY) {
                if (cfg.summaries.empty()) throw ConfigError("reformulation.summaries", "required for summary-file");
                summaries = load_summaries(cfg.summaries);
            }
            std::shared_ptr<EmbeddingProvider> provider;
            if (cfg.reformulation.method == QuerySource::KEYBERT) provider = make_provider(cfg.provider);
            const auto queries = reformulate_all(a.corpus, a.corpus.query_ids, a.index, cfg.reformulation, provider.get(),
                                                 summaries ? &*summaries : nullptr, threads);
            write_file_atomic(out_path, format_queries_jsonl(queries));
            report({{"command", "reformulate"}, {"out", out_path}, {"queries", queries.size()}});
            return 0;
        }

        // queries from a file, or reformulated from the index on the fly
        auto obtain_queries = [&](const IndexArtifact& a) {
            if (!queries_path.empty()) return parse_queries_jsonl(read_file(queries_path), queries_path);
            cfg.reformulation.validate();
            std::shared_ptr<EmbeddingProvider> provider;
            if (cfg.reformulation.method == QuerySource::KEYBERT) provider = make_provider(cfg.provider);
            std::optional<std::map<std::string, std::string>> summaries;
            if (cfg.reformulation.method == QuerySource::SUMMARY) summaries = load_summaries(cfg.summaries);
            return reformulate_all(a.corpus, a.corpus.query_ids, a.index, cfg.reformulation, provider.get(),
                                   summaries ? &*summaries : nullptr, threads);
        };

        if (app.got_subcommand(c_search)) {
            if (resume && fs::exists(out_path)) return skipped(out_path);
            cfg.ranker.validate();
            const auto a = load_index_artifact(index_dir);
            const auto queries = obtain_queries(a);
            const auto run = search_all(a.index, queries, cfg.ranker, depth, threads);
            write_file_atomic(out_path, format_trec_run(run, tag.empty() ? detail::run_tag(cfg.ranker) : tag));
            report({{"command", "search"}, {"out", out_path}, {"queries", run.size()}});
            return 0;
        }

        if (app.got_subcommand(c_rerank)) {
            if (resume && fs::exists(out_path)) return skipped(out_path);
            cfg.rerank.validate();
            const auto a = load_index_artifact(index_dir);
            const auto first = load_trec_run(run_path);
            auto provider = make_provider(cfg.provider);
            auto params = cfg.rerank;
            params.threads = threads;
            const auto run = rerank_all(first, a.corpus, *provider, params);
            write_file_atomic(out_path, format_trec_run(run, tag.empty() ? "cluster-driven" : tag));
            report({{"command", "rerank"}, {"out", out_path}, {"queries", run.size()}});
            return 0;
        }

        if (app.got_subcommand(c_fuse)) {
            if (resume && fs::exists(out_path)) return skipped(out_path);
            cfg.aggregation.validate();
            const auto lexical = load_trec_run(lexical_path);
            const auto neural = load_trec_run(neural_path);
            const auto run = fuse_runs(lexical, neural, cfg.aggregation);
            write_file_atomic(out_path, format_trec_run(run, tag.empty() ? "weighting" : tag));
            report({{"command", "fuse"}, {"out", out_path}, {"queries", run.size()}});
            return 0;
        }

        if (app.got_subcommand(c_eval)) {
            if (resume && !out_path.empty() && fs::exists(out_path)) return skipped(out_path);
            if (cutoff < 1) throw ConfigError("eval.cutoff", "must be >= 1");
            const auto run = load_trec_run(run_path);
            const auto qrels = detail::resolve_qrels(qrels_path, index_dir);
            const auto result = evaluate(run, qrels, cutoff);
            if (!out_path.empty()) write_file_atomic(out_path, to_json(result).dump(2) + "\n");
            report(to_json(result, false));
            return 0;
        }

        if (app.got_subcommand(c_sweep)) {
            if (resume && fs::exists(out_path)) return skipped(out_path);
            if (cfg.k_min < 1 || cfg.k_max < cfg.k_min) throw ConfigError("eval.k_max", "need 1 <= k_min <= k_max");
            const auto run = load_trec_run(run_path);
            const auto qrels = detail::resolve_qrels(qrels_path, index_dir);
            const auto sweep = sweep_cutoff(run, qrels, cfg.k_min, cfg.k_max);
            write_file_atomic(out_path, curve_to_csv(sweep));
            nlohmann::json j{{"best_k", sweep.best_k}, {"best", to_json(sweep.best(), false)}};
            if (!report_path.empty()) write_file_atomic(report_path, j.dump(2) + "\n");
            report(j);
            return 0;
        }

        if (app.got_subcommand(c_tune)) {
            if (resume && fs::exists(out_path)) return skipped(out_path);
            if (!objective_text.empty() && objective_text != "f1" && objective_text != "p_at_k")
                throw ConfigError("tune.objective", "must be f1 or p_at_k");
            TuneSettings settings{objective_k.value_or(0), cfg.k_min, cfg.k_max, threads};
            GridResult g;
            if (target == "fusion") {
                if (lexical_path.empty() || neural_path.empty())
                    throw ConfigError("tune.lexical", "fusion tuning needs --lexical and --neural");
                const auto qrels = detail::resolve_qrels(qrels_path, index_dir);
                auto spec = parse_grid(grid_text, fusion_default_grid());
                if (!objective_k) settings.objective_k = spec.objective_k;
                if (objective_text == "p_at_k") spec.objective = Objective::P_AT_K;
                g = tune_fusion(load_trec_run(lexical_path), load_trec_run(neural_path), qrels, cfg.aggregation, spec,
                                settings);
            } else {
                const auto model = parse_ranker(target);
                if (!model) throw ConfigError("tune.ranker", "must be bm25, lmjm, dfr or fusion");
                if (index_dir.empty()) throw ConfigError("tune.index", "ranker tuning needs --index");
                const auto a = load_index_artifact(index_dir);
                const auto qrels = qrels_path.empty() ? a.qrels : load_trec_qrels(qrels_path);
                const auto queries = obtain_queries(a);
                GridSpec defaults = *model == RankerModel::BM25   ? bm25_default_grid()
                                    : *model == RankerModel::LMJM ? lmjm_default_grid()
                                                                  : dfr_default_grid();
                auto spec = parse_grid(grid_text, defaults);
                if (!objective_k) settings.objective_k = spec.objective_k;
                if (objective_text == "p_at_k") spec.objective = Objective::P_AT_K;
                if (objective_text == "f1") spec.objective = Objective::F1;
                std::vector<ReformulatedQuery> judged;
                for (const auto& q : queries)
                    if (qrels.judgments.count(q.query_id)) judged.push_back(q);
                auto base = cfg.ranker;
                base.model = *model;
                g = tune_ranker(a.index, judged, qrels, base, spec, settings);
            }
            write_file_atomic(out_path, to_json(g).dump(1) + "\n");
            nlohmann::json best = to_json(g)["best"];
            report({{"command", "tune"}, {"out", out_path}, {"points", g.ledger.size()}, {"best", best}});
            return 0;
        }

        if (app.got_subcommand(c_gen)) {
            const fs::path dir = out_path;
            if (resume && detail::all_exist({dir / "labels.json", dir / "cases"})) return skipped(dir);
            const auto gen = generate_synthetic(cfg.corpus.synthetic);
            write_coliee_layout(gen, dir / "cases", dir / "labels.json");
            report({{"command", "generate-synthetic"},
                    {"out", dir.string()},
                    {"documents", gen.corpus.documents.size()},
                    {"queries", gen.corpus.query_ids.size()}});
            return 0;
        }

        if (app.got_subcommand(c_pipe)) {
            if (!out_path.empty()) cfg.output_dir = out_path;
            cfg.validate();
            const fs::path dir = cfg.output_dir;
            if (resume && fs::exists(dir / "report.json")) return skipped(dir);
            const auto [corpus, qrels] = load_collection(cfg.corpus, cfg.tokenizer);
            const auto index = build_index(corpus.candidates(), cfg.tokenizer);
            auto settings = cfg.settings();
            if (cfg.corpus.validation_last > 0) {
                auto [train, validation] = split_last(corpus.query_ids, cfg.corpus.validation_last);
                settings.queries = validation;
                settings.tuning_queries = train;
            }
            std::optional<std::map<std::string, std::string>> summaries;
            if (cfg.reformulation.method == QuerySource::SUMMARY) summaries = load_summaries(cfg.summaries);
            auto provider = make_provider(cfg.provider);
            const auto r = run_pipeline(corpus, qrels, index, *provider, settings, summaries ? &*summaries : nullptr,
                                        threads);

            write_file_atomic(dir / "config.json", to_json(cfg).dump(2) + "\n");
            write_file_atomic(dir / "queries.jsonl", format_queries_jsonl(r.queries));
            write_file_atomic(dir / "run.lexical.txt", format_trec_run(r.lexical, detail::run_tag(r.ranker)));
            write_file_atomic(dir / "run.rerank.txt", format_trec_run(r.reranked, "cluster-driven"));
            write_file_atomic(dir / "run.fused.txt", format_trec_run(r.fused, "weighting"));
            write_file_atomic(dir / "curve.lexical.csv", curve_to_csv(r.lexical_eval.sweep));
            write_file_atomic(dir / "curve.rerank.csv", curve_to_csv(r.rerank_eval.sweep));
            write_file_atomic(dir / "curve.fused.csv", curve_to_csv(r.fusion_eval.sweep));
            if (r.ranker_grid) write_file_atomic(dir / "ledger.ranker.json", to_json(*r.ranker_grid).dump(1) + "\n");
            if (r.fusion_grid) write_file_atomic(dir / "ledger.fusion.json", to_json(*r.fusion_grid).dump(1) + "\n");
            write_file_atomic(dir / "timing.json", nlohmann::json{{"seconds", r.seconds},
                                                                   {"lexical", r.lexical_eval.seconds},
                                                                   {"rerank", r.rerank_eval.seconds},
                                                                   {"fusion", r.fusion_eval.seconds}}
                                                           .dump(2) +
                                                       "\n");
            // report.json last: its presence marks a finished run for --resume
            write_file_atomic(dir / "report.json", to_json(r, false).dump(2) + "\n");
            report({{"command", "pipeline"},
                    {"out", dir.string()},
                    {"f1", {{"lexical", r.lexical_eval.sweep.best().f1},
                            {"rerank", r.rerank_eval.sweep.best().f1},
                            {"fusion", r.fusion_eval.sweep.best().f1}}},
                    {"seconds", r.seconds}});
            return 0;
        }
        return fail(2, detail::error_json("usage", "no command"));
    } catch (const ConfigError& e) {
        auto j = detail::error_json("config", e.what());
        j["field"] = e.field();
        return fail(2, j);
    } catch (const IngestionError& e) {
        auto j = detail::error_json("missing_input", e.what());
        j["path"] = e.path();
        return fail(3, j);
    } catch (const ValidationError& e) {
        auto j = detail::error_json("validation", e.what());
        j["offenders"] = e.offenders();
        return fail(1, j);
    } catch (const TransportError& e) {
        return fail(1, detail::error_json("transport", e.what()));
    } catch (const LookupError& e) {
        return fail(1, detail::error_json("lookup", e.what()));
    } catch (const std::exception& e) {
        return fail(1, detail::error_json("internal", e.what()));
    }
}

}  // namespace qbd
