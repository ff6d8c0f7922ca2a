#pragma once

// Pipeline configuration: one TOML document, environment overrides of the form
// LEIBI_<SECTION>__<KEY>=value, then command-line overrides. Unknown keys are
// rejected and every value is checked before any work starts.

#include <charconv>
#include <cstdlib>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <toml++/toml.hpp>
#include <unistd.h>

#include "embed.hpp"
#include "error.hpp"
#include "experiment.hpp"
#include "pipeline.hpp"
#include "rankers.hpp"
#include "rerank.hpp"
#include "synthetic.hpp"

namespace qbd {

inline std::optional<QuerySource> parse_method(std::string_view s) {
    if (s == "kli") return QuerySource::KLI;
    if (s == "plm") return QuerySource::PLM;
    if (s == "idf") return QuerySource::IDF;
    if (s == "keyex") return QuerySource::KEYBERT;
    if (s == "summary-file") return QuerySource::SUMMARY;
    if (s == "original") return QuerySource::ORIGINAL;
    return std::nullopt;
}

inline std::string method_name(QuerySource s) {
    switch (s) {
        case QuerySource::KLI: return "kli";
        case QuerySource::PLM: return "plm";
        case QuerySource::IDF: return "idf";
        case QuerySource::KEYBERT: return "keyex";
        case QuerySource::SUMMARY: return "summary-file";
        case QuerySource::ORIGINAL: return "original";
    }
    return "?";
}

struct CorpusConfig {
    std::string layout = "synthetic";  // coliee | jsonl | synthetic
    std::string case_dir;
    std::string labels;
    std::string jsonl;
    std::string qrels;  // TREC qrels for the jsonl layout
    /// Evaluate on the last n queries and tune on the rest; 0 = all queries for both.
    std::size_t validation_last = 0;
    SyntheticSpec synthetic;
};

struct ProviderConfig {
    ProviderKind kind = ProviderKind::BASELINE;
    std::size_t dim = 384;
    std::string file;     // FILE: embeddings JSONL
    std::string command;  // EXTERNAL over stdio
    std::string url;      // EXTERNAL over HTTP, http://host:port/path
    std::string clustering_model = "all-mpnet-base-v2";
    std::string similarity_model = "msmarco-bert-base-dot-v5";
    std::string cross_model = "ms-marco-MiniLM-L-12-v2";
    std::size_t max_batch = 64;
    std::size_t max_chars = 2000;
    std::size_t timeout_ms = 120000;
};

struct PipelineConfig {
    CorpusConfig corpus;
    TokenizerConfig tokenizer = TokenizerConfig::for_indexing();
    ReformulationParams reformulation;
    std::string summaries;
    RankerParams ranker;
    bool tune_ranker = false;
    Objective ranker_objective = Objective::F1;
    std::size_t ranker_objective_k = 4;
    ProviderConfig provider;
    RerankParams rerank;
    AggregationParams aggregation;
    bool tune_fusion = true;
    /// 0 = best F1 over [eval.k_min, eval.k_max].
    std::size_t fusion_objective_k = 5;
    std::size_t k_min = 1;
    std::size_t k_max = 20;
    std::string output_dir = "out";
    /// 0 = all cores.
    unsigned threads = 0;
    std::optional<std::uint64_t> seed;

    void validate() const {
        tokenizer.validate();
        reformulation.validate();
        ranker.validate();
        rerank.validate();
        aggregation.validate();
        if (corpus.layout == "coliee") {
            if (corpus.case_dir.empty()) throw ConfigError("corpus.case_dir", "required for the coliee layout");
            if (corpus.labels.empty()) throw ConfigError("corpus.labels", "required for the coliee layout");
        } else if (corpus.layout == "jsonl") {
            if (corpus.jsonl.empty()) throw ConfigError("corpus.jsonl", "required for the jsonl layout");
            if (corpus.qrels.empty()) throw ConfigError("corpus.qrels", "required for the jsonl layout");
        } else if (corpus.layout == "synthetic") {
            if (corpus.synthetic.num_candidates < 1) throw ConfigError("corpus.synthetic_candidates", "must be >= 1");
            if (corpus.synthetic.num_queries < 1) throw ConfigError("corpus.synthetic_queries", "must be >= 1");
        } else {
            throw ConfigError("corpus.layout", "must be coliee, jsonl or synthetic");
        }
        if (reformulation.method == QuerySource::SUMMARY && summaries.empty())
            throw ConfigError("reformulation.summaries", "required for the summary-file method");
        if (ranker_objective_k < 1) throw ConfigError("ranker.objective_k", "must be >= 1");
        if (k_min < 1) throw ConfigError("eval.k_min", "must be >= 1");
        if (k_max < k_min) throw ConfigError("eval.k_max", "must be >= eval.k_min");
        if (k_max > rerank.depth) throw ConfigError("eval.k_max", "must not exceed rerank.depth");
        if (provider.dim < 8 && provider.kind == ProviderKind::BASELINE) throw ConfigError("provider.dim", "must be >= 8");
        if (provider.kind == ProviderKind::FILE && provider.file.empty())
            throw ConfigError("provider.file", "required for the file provider");
        if (provider.kind == ProviderKind::EXTERNAL && provider.command.empty() == provider.url.empty())
            throw ConfigError("provider.command", "the external provider needs exactly one of command or url");
        if (provider.max_batch < 1 || provider.max_batch > 64) throw ConfigError("provider.max_batch", "must lie in [1, 64]");
        if (provider.max_chars < 1) throw ConfigError("provider.max_chars", "must be >= 1");
        if (provider.timeout_ms < 1) throw ConfigError("provider.timeout_ms", "must be >= 1");
        if (output_dir.empty()) throw ConfigError("output.dir", "must be non-empty");
    }

    /// The settings run_pipeline consumes.
    PipelineSettings settings() const {
        PipelineSettings s;
        s.tokenizer = tokenizer;
        s.reformulation = reformulation;
        s.ranker = ranker;
        s.tune_ranker = tune_ranker;
        switch (ranker.model) {
            case RankerModel::BM25: s.ranker_grid = bm25_default_grid(); break;
            case RankerModel::LMJM: s.ranker_grid = lmjm_default_grid(); break;
            case RankerModel::DFR_InExpC2: s.ranker_grid = dfr_default_grid(); break;
        }
        s.ranker_grid.objective = ranker_objective;
        s.ranker_tuning = {ranker_objective_k, k_min, k_max, 1};
        s.rerank = rerank;
        s.aggregation = aggregation;
        s.tune_fusion = tune_fusion;
        s.fusion_tuning = {fusion_objective_k, k_min, k_max, 1};
        s.k_min = k_min;
        s.k_max = k_max;
        return s;
    }
};

namespace detail {

using ConfigValue = std::variant<bool, std::int64_t, double, std::string, std::vector<std::string>>;

enum class ValueKind { BOOL, INT, DOUBLE, STRING, STRING_LIST };

struct FieldDef {
    std::string path;  // section.key
    ValueKind kind;
    std::function<void(PipelineConfig&, const ConfigValue&)> set;
};

inline std::string kind_name(ValueKind k) {
    switch (k) {
        case ValueKind::BOOL: return "a boolean";
        case ValueKind::INT: return "an integer";
        case ValueKind::DOUBLE: return "a number";
        case ValueKind::STRING: return "a string";
        case ValueKind::STRING_LIST: return "a list of strings";
    }
    return "?";
}

inline FieldDef make_field(std::string path, ValueKind kind, std::function<void(PipelineConfig&, const ConfigValue&)> set) {
    return FieldDef{std::move(path), kind, std::move(set)};
}

inline std::size_t as_count(const std::string& path, const ConfigValue& v) {
    const auto x = std::get<std::int64_t>(v);
    if (x < 0) throw ConfigError(path, "must be >= 0");
    return static_cast<std::size_t>(x);
}

inline const std::vector<FieldDef>& config_fields() {
    using K = ValueKind;
    using C = PipelineConfig;
    using V = ConfigValue;
    auto str = [](const V& v) { return std::get<std::string>(v); };
    auto num = [](const V& v) { return std::get<double>(v); };
    auto integer = [](const V& v) { return std::get<std::int64_t>(v); };
    auto boolean = [](const V& v) { return std::get<bool>(v); };
    auto count = [](const char* path) { return [path](const V& v) { return as_count(path, v); }; };

    static const std::vector<FieldDef> fields = {
        // corpus
        make_field("corpus.layout", K::STRING, [=](C& c, const V& v) { c.corpus.layout = str(v); }),
        make_field("corpus.case_dir", K::STRING, [=](C& c, const V& v) { c.corpus.case_dir = str(v); }),
        make_field("corpus.labels", K::STRING, [=](C& c, const V& v) { c.corpus.labels = str(v); }),
        make_field("corpus.jsonl", K::STRING, [=](C& c, const V& v) { c.corpus.jsonl = str(v); }),
        make_field("corpus.qrels", K::STRING, [=](C& c, const V& v) { c.corpus.qrels = str(v); }),
        make_field("corpus.validation_last", K::INT,
                   [=](C& c, const V& v) { c.corpus.validation_last = count("corpus.validation_last")(v); }),
        make_field("corpus.synthetic_candidates", K::INT,
                   [=](C& c, const V& v) { c.corpus.synthetic.num_candidates = count("corpus.synthetic_candidates")(v); }),
        make_field("corpus.synthetic_queries", K::INT,
                   [=](C& c, const V& v) { c.corpus.synthetic.num_queries = count("corpus.synthetic_queries")(v); }),
        make_field("corpus.synthetic_seed", K::INT,
                   [=](C& c, const V& v) { c.corpus.synthetic.seed = count("corpus.synthetic_seed")(v); }),
        // tokenizer
        make_field("tokenizer.lowercase", K::BOOL, [=](C& c, const V& v) { c.tokenizer.lowercase = boolean(v); }),
        make_field("tokenizer.min_token_length", K::INT,
                   [=](C& c, const V& v) { c.tokenizer.min_token_length = static_cast<int>(integer(v)); }),
        make_field("tokenizer.remove_stopwords", K::BOOL, [=](C& c, const V& v) { c.tokenizer.remove_stopwords = boolean(v); }),
        make_field("tokenizer.strip_suppressed_fragments", K::BOOL,
                   [=](C& c, const V& v) { c.tokenizer.strip_suppressed_fragments = boolean(v); }),
        make_field("tokenizer.stopwords", K::STRING_LIST,
                   [](C& c, const V& v) {
                       const auto& list = std::get<std::vector<std::string>>(v);
                       c.tokenizer.stopwords = {list.begin(), list.end()};
                       c.reformulation.extraction.stopwords = c.tokenizer.stopwords;
                       c.reformulation.keyex.stopwords = c.tokenizer.stopwords;
                   }),
        // reformulation
        make_field("reformulation.method", K::STRING,
                   [=](C& c, const V& v) {
                       const auto m = parse_method(str(v));
                       if (!m) throw ConfigError("reformulation.method", "must be kli, plm, idf, keyex, summary-file or original");
                       c.reformulation.method = *m;
                   }),
        make_field("reformulation.proportion", K::DOUBLE, [=](C& c, const V& v) { c.reformulation.proportion = num(v); }),
        make_field("reformulation.plm_lambda", K::DOUBLE, [=](C& c, const V& v) { c.reformulation.plm_lambda = num(v); }),
        make_field("reformulation.plm_max_iters", K::INT,
                   [=](C& c, const V& v) { c.reformulation.plm_max_iters = static_cast<int>(integer(v)); }),
        make_field("reformulation.plm_tol", K::DOUBLE, [=](C& c, const V& v) { c.reformulation.plm_tol = num(v); }),
        make_field("reformulation.summaries", K::STRING, [=](C& c, const V& v) { c.summaries = str(v); }),
        // keyex
        make_field("keyex.ngram_min", K::INT, [=](C& c, const V& v) { c.reformulation.keyex.ngram_min = static_cast<int>(integer(v)); }),
        make_field("keyex.ngram_max", K::INT, [=](C& c, const V& v) { c.reformulation.keyex.ngram_max = static_cast<int>(integer(v)); }),
        make_field("keyex.top_n", K::INT, [=](C& c, const V& v) { c.reformulation.keyex.top_n = static_cast<int>(integer(v)); }),
        make_field("keyex.diversifier", K::STRING,
                   [=](C& c, const V& v) {
                       const auto d = parse_diversifier(str(v));
                       if (!d) throw ConfigError("keyex.diversifier", "must be mmr, maxsum or none");
                       c.reformulation.keyex.diversifier = *d;
                   }),
        make_field("keyex.diversity", K::DOUBLE, [=](C& c, const V& v) { c.reformulation.keyex.diversity = num(v); }),
        make_field("keyex.pool_mult", K::INT, [=](C& c, const V& v) { c.reformulation.keyex.pool_mult = static_cast<int>(integer(v)); }),
        // ranker
        make_field("ranker.model", K::STRING,
                   [=](C& c, const V& v) {
                       const auto m = parse_ranker(str(v));
                       if (!m) throw ConfigError("ranker.model", "must be bm25, lmjm or dfr");
                       c.ranker.model = *m;
                   }),
        make_field("ranker.k1", K::DOUBLE, [=](C& c, const V& v) { c.ranker.k1 = num(v); }),
        make_field("ranker.b", K::DOUBLE, [=](C& c, const V& v) { c.ranker.b = num(v); }),
        make_field("ranker.lambda", K::DOUBLE, [=](C& c, const V& v) { c.ranker.lambda = num(v); }),
        make_field("ranker.c", K::DOUBLE, [=](C& c, const V& v) { c.ranker.c = num(v); }),
        make_field("ranker.tune", K::BOOL, [=](C& c, const V& v) { c.tune_ranker = boolean(v); }),
        make_field("ranker.objective", K::STRING,
                   [=](C& c, const V& v) {
                       if (str(v) == "f1") c.ranker_objective = Objective::F1;
                       else if (str(v) == "p_at_k") c.ranker_objective = Objective::P_AT_K;
                       else throw ConfigError("ranker.objective", "must be f1 or p_at_k");
                   }),
        make_field("ranker.objective_k", K::INT, [=](C& c, const V& v) { c.ranker_objective_k = count("ranker.objective_k")(v); }),
        // provider
        make_field("provider.kind", K::STRING,
                   [=](C& c, const V& v) {
                       const auto k = parse_provider_kind(str(v));
                       if (!k) throw ConfigError("provider.kind", "must be baseline, file or external");
                       c.provider.kind = *k;
                   }),
        make_field("provider.dim", K::INT, [=](C& c, const V& v) { c.provider.dim = count("provider.dim")(v); }),
        make_field("provider.file", K::STRING, [=](C& c, const V& v) { c.provider.file = str(v); }),
        make_field("provider.command", K::STRING, [=](C& c, const V& v) { c.provider.command = str(v); }),
        make_field("provider.url", K::STRING, [=](C& c, const V& v) { c.provider.url = str(v); }),
        make_field("provider.clustering_model", K::STRING, [=](C& c, const V& v) { c.provider.clustering_model = str(v); }),
        make_field("provider.similarity_model", K::STRING, [=](C& c, const V& v) { c.provider.similarity_model = str(v); }),
        make_field("provider.cross_model", K::STRING, [=](C& c, const V& v) { c.provider.cross_model = str(v); }),
        make_field("provider.max_batch", K::INT, [=](C& c, const V& v) { c.provider.max_batch = count("provider.max_batch")(v); }),
        make_field("provider.max_chars", K::INT, [=](C& c, const V& v) { c.provider.max_chars = count("provider.max_chars")(v); }),
        make_field("provider.timeout_ms", K::INT, [=](C& c, const V& v) { c.provider.timeout_ms = count("provider.timeout_ms")(v); }),
        // rerank
        make_field("rerank.k", K::INT, [=](C& c, const V& v) { c.rerank.k = count("rerank.k")(v); }),
        make_field("rerank.depth", K::INT, [=](C& c, const V& v) { c.rerank.depth = count("rerank.depth")(v); }),
        make_field("rerank.kmeans_seed", K::INT, [=](C& c, const V& v) { c.rerank.kmeans_seed = count("rerank.kmeans_seed")(v); }),
        make_field("rerank.kmeans_restarts", K::INT,
                   [=](C& c, const V& v) { c.rerank.kmeans_restarts = static_cast<int>(integer(v)); }),
        make_field("rerank.kmeans_max_iters", K::INT,
                   [=](C& c, const V& v) { c.rerank.kmeans_max_iters = static_cast<int>(integer(v)); }),
        // aggregation
        make_field("aggregation.alpha", K::DOUBLE, [=](C& c, const V& v) { c.aggregation.alpha = num(v); }),
        make_field("aggregation.beta", K::DOUBLE, [=](C& c, const V& v) { c.aggregation.beta = num(v); }),
        make_field("aggregation.normalize", K::BOOL, [=](C& c, const V& v) { c.aggregation.normalize = boolean(v); }),
        make_field("aggregation.tune", K::BOOL, [=](C& c, const V& v) { c.tune_fusion = boolean(v); }),
        make_field("aggregation.objective_k", K::INT,
                   [=](C& c, const V& v) { c.fusion_objective_k = count("aggregation.objective_k")(v); }),
        // eval, output, run
        make_field("eval.k_min", K::INT, [=](C& c, const V& v) { c.k_min = count("eval.k_min")(v); }),
        make_field("eval.k_max", K::INT, [=](C& c, const V& v) { c.k_max = count("eval.k_max")(v); }),
        make_field("output.dir", K::STRING, [=](C& c, const V& v) { c.output_dir = str(v); }),
        make_field("run.threads", K::INT, [=](C& c, const V& v) { c.threads = static_cast<unsigned>(count("run.threads")(v)); }),
        make_field("run.seed", K::INT, [=](C& c, const V& v) { c.seed = count("run.seed")(v); }),
    };
    return fields;
}

inline const FieldDef* find_field(std::string_view path) {
    for (const auto& f : config_fields())
        if (f.path == path) return &f;
    return nullptr;
}

inline ConfigValue value_from_toml(const FieldDef& f, const toml::node& node) {
    switch (f.kind) {
        case ValueKind::BOOL:
            if (auto v = node.value_exact<bool>()) return *v;
            break;
        case ValueKind::INT:
            if (auto v = node.value_exact<std::int64_t>()) return *v;
            break;
        case ValueKind::DOUBLE:
            if (node.is_integer() || node.is_floating_point()) return *node.value<double>();
            break;
        case ValueKind::STRING:
            if (auto v = node.value_exact<std::string>()) return *v;
            break;
        case ValueKind::STRING_LIST:
            if (const auto* arr = node.as_array()) {
                std::vector<std::string> out;
                for (const auto& el : *arr) {
                    auto s = el.value_exact<std::string>();
                    if (!s) throw ConfigError(f.path, "expected " + kind_name(f.kind));
                    out.push_back(*s);
                }
                return out;
            }
            break;
    }
    throw ConfigError(f.path, "expected " + kind_name(f.kind));
}

inline ConfigValue value_from_text(const FieldDef& f, const std::string& text) {
    auto fail = [&]() -> ConfigError { return ConfigError(f.path, "cannot parse '" + text + "' as " + kind_name(f.kind)); };
    switch (f.kind) {
        case ValueKind::BOOL:
            if (text == "true" || text == "1") return true;
            if (text == "false" || text == "0") return false;
            throw fail();
        case ValueKind::INT: {
            std::int64_t v = 0;
            const auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
            if (ec != std::errc() || p != text.data() + text.size()) throw fail();
            return v;
        }
        case ValueKind::DOUBLE: {
            char* end = nullptr;
            const double v = std::strtod(text.c_str(), &end);
            if (text.empty() || end != text.c_str() + text.size()) throw fail();
            return v;
        }
        case ValueKind::STRING: return text;
        case ValueKind::STRING_LIST: {
            std::vector<std::string> out;
            std::string item;
            std::istringstream in(text);
            while (std::getline(in, item, ','))
                if (auto t = trim(item); !t.empty()) out.emplace_back(t);
            return out;
        }
    }
    throw fail();
}

}  // namespace detail

/// Applies one dotted-path override given as text (environment or command line).
inline void set_config_value(PipelineConfig& config, std::string_view path, const std::string& text) {
    const auto* f = detail::find_field(path);
    if (!f) throw ConfigError(std::string(path), "unknown key");
    f->set(config, detail::value_from_text(*f, text));
}

/// Overlays a TOML document. Unknown sections and keys are errors.
inline void apply_toml(PipelineConfig& config, std::string_view text, const std::string& origin = "<config>") {
    toml::table doc;
    try {
        doc = toml::parse(text, origin);
    } catch (const toml::parse_error& e) {
        throw ConfigError("<config>", std::string("TOML syntax error: ") + std::string(e.description()) + " at line " +
                                          std::to_string(e.source().begin.line));
    }
    for (const auto& [section, node] : doc) {
        const auto* table = node.as_table();
        if (!table) throw ConfigError(std::string(section.str()), "expected a table");
        for (const auto& [key, value] : *table) {
            const std::string path = std::string(section.str()) + "." + std::string(key.str());
            const auto* f = detail::find_field(path);
            if (!f) throw ConfigError(path, "unknown key");
            f->set(config, detail::value_from_toml(*f, value));
        }
    }
}

/// LEIBI_<SECTION>__<KEY>=value, e.g. LEIBI_RANKER__K1=0.9. `environ_entries`
/// holds NAME=VALUE strings.
inline void apply_env_overrides(PipelineConfig& config, const std::vector<std::string>& environ_entries) {
    static constexpr std::string_view prefix = "LEIBI_";
    for (const auto& entry : environ_entries) {
        if (entry.rfind(prefix, 0) != 0) continue;
        const auto eq = entry.find('=');
        if (eq == std::string::npos) continue;
        const std::string name = entry.substr(prefix.size(), eq - prefix.size());
        const auto sep = name.find("__");
        if (sep == std::string::npos) throw ConfigError("env." + name, "expected LEIBI_<SECTION>__<KEY>");
        std::string path = name.substr(0, sep) + "." + name.substr(sep + 2);
        for (auto& ch : path) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
        set_config_value(config, path, entry.substr(eq + 1));
    }
}

inline std::vector<std::string> process_environment() {
    std::vector<std::string> out;
    for (char** e = ::environ; e && *e; ++e) out.emplace_back(*e);
    return out;
}

/// Defaults, then `toml_text`, then the LEIBI_* entries.
inline PipelineConfig load_config(std::string_view toml_text, const std::vector<std::string>& env,
                                  const std::string& origin = "<config>") {
    PipelineConfig c;
    apply_toml(c, toml_text, origin);
    apply_env_overrides(c, env);
    return c;
}

/// A single seed drives every stochastic choice: k-means seeding and the
/// synthetic generator.
inline void apply_seed(PipelineConfig& c) {
    if (!c.seed) return;
    c.rerank.kmeans_seed = *c.seed;
    c.corpus.synthetic.seed = *c.seed;
}

inline nlohmann::json to_json(const PipelineConfig& c) {
    nlohmann::json j;
    j["corpus"] = {{"layout", c.corpus.layout},
                   {"case_dir", c.corpus.case_dir},
                   {"labels", c.corpus.labels},
                   {"jsonl", c.corpus.jsonl},
                   {"qrels", c.corpus.qrels},
                   {"validation_last", c.corpus.validation_last},
                   {"synthetic_candidates", c.corpus.synthetic.num_candidates},
                   {"synthetic_queries", c.corpus.synthetic.num_queries},
                   {"synthetic_seed", c.corpus.synthetic.seed}};
    j["tokenizer"] = {{"lowercase", c.tokenizer.lowercase},
                      {"min_token_length", c.tokenizer.min_token_length},
                      {"remove_stopwords", c.tokenizer.remove_stopwords},
                      {"strip_suppressed_fragments", c.tokenizer.strip_suppressed_fragments}};
    j["reformulation"] = {{"method", method_name(c.reformulation.method)},
                          {"proportion", c.reformulation.proportion},
                          {"plm_lambda", c.reformulation.plm_lambda},
                          {"plm_max_iters", c.reformulation.plm_max_iters},
                          {"plm_tol", c.reformulation.plm_tol},
                          {"summaries", c.summaries}};
    const auto& kx = c.reformulation.keyex;
    j["keyex"] = {{"ngram_min", kx.ngram_min}, {"ngram_max", kx.ngram_max},   {"top_n", kx.top_n},
                  {"diversifier", to_string(kx.diversifier)}, {"diversity", kx.diversity}, {"pool_mult", kx.pool_mult}};
    j["ranker"] = {{"model", to_string(c.ranker.model)},
                   {"k1", c.ranker.k1},
                   {"b", c.ranker.b},
                   {"lambda", c.ranker.lambda},
                   {"c", c.ranker.c},
                   {"tune", c.tune_ranker},
                   {"objective", c.ranker_objective == Objective::F1 ? "f1" : "p_at_k"},
                   {"objective_k", c.ranker_objective_k}};
    j["provider"] = {{"kind", to_string(c.provider.kind)}, {"dim", c.provider.dim}, {"file", c.provider.file},
                     {"command", c.provider.command},      {"url", c.provider.url}};
    j["rerank"] = {{"k", c.rerank.k},
                   {"depth", c.rerank.depth},
                   {"kmeans_seed", c.rerank.kmeans_seed},
                   {"kmeans_restarts", c.rerank.kmeans_restarts},
                   {"kmeans_max_iters", c.rerank.kmeans_max_iters}};
    j["aggregation"] = {{"alpha", c.aggregation.alpha},
                        {"beta", c.aggregation.beta},
                        {"normalize", c.aggregation.normalize},
                        {"tune", c.tune_fusion},
                        {"objective_k", c.fusion_objective_k}};
    j["eval"] = {{"k_min", c.k_min}, {"k_max", c.k_max}};
    return j;
}

}  // namespace qbd
