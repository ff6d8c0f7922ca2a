#pragma once

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "error.hpp"
#include "util.hpp"

namespace qbd {

inline constexpr std::string_view kSuppressedMarker = "FRAGMENT_SUPPRESSED";

inline const std::set<std::string>& english_stopwords() {
    static const std::set<std::string> words = {
        "a",       "about",   "above",  "after",   "again",  "against", "all",     "am",      "an",
        "and",     "any",     "are",    "as",      "at",     "be",      "because", "been",    "before",
        "being",   "below",   "between", "both",   "but",    "by",      "can",     "could",   "did",
        "do",      "does",    "doing",  "down",    "during", "each",    "few",     "for",     "from",
        "further", "had",     "has",    "have",    "having", "he",      "her",     "here",    "hers",
        "herself", "him",     "himself", "his",    "how",    "i",       "if",      "in",      "into",
        "is",      "it",      "its",    "itself",  "just",   "may",     "me",      "might",   "more",
        "most",    "must",    "my",     "myself",  "no",     "nor",     "not",     "now",     "of",
        "off",     "on",      "once",   "only",    "or",     "other",   "our",     "ours",    "ourselves",
        "out",     "over",    "own",    "same",    "shall",  "she",     "should",  "so",      "some",
        "such",    "than",    "that",   "the",     "their",  "theirs",  "them",    "themselves",
        "then",    "there",   "these",  "they",    "this",   "those",   "through", "to",      "too",
        "under",   "until",   "up",     "upon",    "very",   "was",     "we",      "were",    "what",
        "when",    "where",   "which",  "while",   "who",    "whom",    "why",     "will",    "with",
        "would",   "you",     "your",   "yours",   "yourself", "yourselves"};
    return words;
}

struct TokenizerConfig {
    bool lowercase = true;
    int min_token_length = 2;
    bool remove_stopwords = false;
    std::set<std::string> stopwords = english_stopwords();
    bool strip_suppressed_fragments = true;

    void validate() const {
        if (min_token_length < 1) throw ConfigError("tokenizer.min_token_length", "must be >= 1");
    }

    /// Index-side defaults: full text, stopwords kept.
    static TokenizerConfig for_indexing() { return {}; }

    /// Term-extraction defaults: extractors never elect stopwords.
    static TokenizerConfig for_extraction() {
        TokenizerConfig c;
        c.remove_stopwords = true;
        return c;
    }
};

namespace detail {

// Bytes >= 0x80 are kept inside tokens so UTF-8 words (e.g. French passages)
// are not shredded; only ASCII punctuation and whitespace separate tokens.
inline bool is_token_char(unsigned char c) noexcept { return std::isalnum(c) != 0 || c >= 0x80; }

inline bool is_space(unsigned char c) noexcept { return std::isspace(c) != 0; }

inline std::string_view trim(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

/// Trims and collapses every whitespace run to one space.
inline std::string squeeze(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending = false;
    for (unsigned char c : trim(s)) {
        if (is_space(c)) {
            pending = true;
            continue;
        }
        if (pending) out.push_back(' ');
        pending = false;
        out.push_back(static_cast<char>(c));
    }
    return out;
}

}  // namespace detail

/// Removes citation-suppression markers when configured to.
inline std::string clean_text(std::string_view text, const TokenizerConfig& config) {
    std::string out(text);
    if (!config.strip_suppressed_fragments) return out;
    for (auto pos = out.find(kSuppressedMarker); pos != std::string::npos; pos = out.find(kSuppressedMarker, pos))
        out.replace(pos, kSuppressedMarker.size(), " ");
    return out;
}

inline std::vector<std::string> tokenize(std::string_view text, const TokenizerConfig& config) {
    const std::string cleaned = clean_text(text, config);
    std::vector<std::string> tokens;
    std::string current;
    auto flush = [&] {
        if (current.empty()) return;
        if (static_cast<int>(current.size()) >= config.min_token_length &&
            !(config.remove_stopwords && config.stopwords.count(current) != 0))
            tokens.push_back(current);
        current.clear();
    };
    for (unsigned char c : cleaned) {
        if (detail::is_token_char(c)) {
            current.push_back(config.lowercase ? static_cast<char>(std::tolower(c)) : static_cast<char>(c));
        } else {
            flush();
        }
    }
    flush();
    return tokens;
}

inline const std::set<std::string>& sentence_abbreviations() {
    static const std::set<std::string> words = {
        "v",    "vs",  "No",   "Nos", "no",  "Mr",   "Mrs", "Ms",  "Dr",    "St",  "Jr",  "Sr",
        "Co",   "Inc", "Ltd",  "Corp", "J",  "JJ",   "CJ",  "para", "paras", "s",  "ss",  "art",
        "Art",  "e.g", "i.e",  "etc", "cf",  "al",   "Fig", "p",   "pp",    "Rev", "Hon", "Reg",
        "Sch",  "Ch",  "ch",   "c",   "sec", "Sec",  "Ont", "Que", "Sask",  "Man", "Alta", "Nfld",
        "Cst",  "Bros", "Dept", "Gov", "Stat", "R.S.C", "S.C", "S.C.R", "F.C", "F.C.R", "Supp"};
    return words;
}

/// Rule-based splitter: a boundary is sentence-final punctuation followed by
/// whitespace and then an uppercase letter or digit. A period that closes a
/// known abbreviation or a single-letter initial never ends a sentence.
inline std::vector<std::string> split_sentences(std::string_view text) {
    std::vector<std::string> out;
    const auto& abbreviations = sentence_abbreviations();
    std::size_t start = 0;
    const std::size_t n = text.size();
    auto emit = [&](std::size_t end) {
        auto s = detail::squeeze(text.substr(start, end - start));
        if (!s.empty()) out.push_back(std::move(s));
    };
    for (std::size_t i = 0; i < n; ++i) {
        const char c = text[i];
        if (c != '.' && c != '!' && c != '?') continue;
        std::size_t j = i + 1;
        // closing quotes/brackets stay with the sentence they end
        while (j < n && (text[j] == '"' || text[j] == '\'' || text[j] == ')' || text[j] == ']')) ++j;
        if (j >= n || !detail::is_space(static_cast<unsigned char>(text[j]))) continue;
        std::size_t k = j;
        while (k < n && detail::is_space(static_cast<unsigned char>(text[k]))) ++k;
        if (k >= n) continue;
        const auto next = static_cast<unsigned char>(text[k]);
        if (!(std::isupper(next) || std::isdigit(next))) continue;
        if (c == '.') {
            std::size_t w = i;
            while (w > start && !detail::is_space(static_cast<unsigned char>(text[w - 1])) && text[w - 1] != '(' &&
                   text[w - 1] != '[')
                --w;
            const std::string_view word = text.substr(w, i - w);
            if (abbreviations.count(std::string(word)) != 0) continue;
            if (word.size() == 1 && std::isalpha(static_cast<unsigned char>(word[0]))) continue;
        }
        emit(j);
        start = j;
    }
    if (start < n) emit(n);
    return out;
}

namespace detail {

// "[12]" (optionally indented) at the start of a line.
inline bool starts_with_marker(std::string_view line) {
    line = trim(line);
    if (line.size() < 3 || line[0] != '[') return false;
    std::size_t i = 1;
    while (i < line.size() && std::isdigit(static_cast<unsigned char>(line[i]))) ++i;
    return i > 1 && i < line.size() && line[i] == ']';
}

}  // namespace detail

/// Splits on blank lines; with `marker_breaks`, a line opening with a bracketed
/// number also starts a new paragraph.
inline std::vector<std::string> split_paragraphs(std::string_view text, bool marker_breaks = true) {
    std::vector<std::string> out;
    std::string current;
    auto flush = [&] {
        auto p = detail::squeeze(current);
        if (!p.empty()) out.push_back(std::move(p));
        current.clear();
    };
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const std::string_view line = text.substr(pos, nl - pos);
        if (detail::trim(line).empty()) {
            flush();
        } else {
            if (marker_breaks && detail::starts_with_marker(line)) flush();
            current.append(line);
            current.push_back('\n');
        }
        pos = nl + 1;
    }
    flush();
    return out;
}

struct CaseDocument {
    std::string id;
    std::string raw_text;
    std::vector<std::string> tokens;
    std::vector<std::string> sentences;
    std::vector<std::string> paragraphs;
};

/// Derives every segmentation of `text`. Sentences never straddle paragraphs.
inline CaseDocument make_document(std::string id, std::string text, const TokenizerConfig& config) {
    if (id.empty()) throw ValidationError("document id must be non-empty");
    CaseDocument doc;
    doc.id = std::move(id);
    doc.tokens = tokenize(text, config);
    const std::string cleaned = clean_text(text, config);
    doc.paragraphs = split_paragraphs(cleaned);
    for (const auto& p : doc.paragraphs)
        for (auto& s : split_sentences(p)) doc.sentences.push_back(std::move(s));
    doc.raw_text = std::move(text);
    return doc;
}

struct Corpus {
    std::map<std::string, CaseDocument> documents;
    /// In source order (labels file order for the COLIEE layout).
    std::vector<std::string> query_ids;

    bool is_query(const std::string& id) const {
        return std::find(query_ids.begin(), query_ids.end(), id) != query_ids.end();
    }

    const CaseDocument& at(const std::string& id) const {
        auto it = documents.find(id);
        if (it == documents.end()) throw LookupError("unknown document id '" + id + "'");
        return it->second;
    }

    /// Every document that is not a query, in id order.
    Corpus candidates() const {
        Corpus c;
        const std::set<std::string> queries(query_ids.begin(), query_ids.end());
        for (const auto& [id, doc] : documents)
            if (queries.count(id) == 0) c.documents.emplace(id, doc);
        return c;
    }
};

struct Qrels {
    std::map<std::string, std::set<std::string>> judgments;

    const std::set<std::string>& relevant(const std::string& query_id) const {
        static const std::set<std::string> empty;
        auto it = judgments.find(query_id);
        return it == judgments.end() ? empty : it->second;
    }
};

/// Throws ValidationError listing every judged id missing from the corpus.
inline void validate_qrels(const Corpus& corpus, const Qrels& qrels) {
    std::set<std::string> orphans;
    for (const auto& [q, rel] : qrels.judgments) {
        if (rel.empty()) throw ValidationError("empty relevant set for query", {q});
        if (!corpus.documents.count(q)) orphans.insert(q);
        for (const auto& d : rel)
            if (!corpus.documents.count(d)) orphans.insert(d);
    }
    if (!orphans.empty())
        throw ValidationError("qrels reference unknown documents", {orphans.begin(), orphans.end()});
}

namespace detail {

inline std::string stem_of(const std::string& filename) { return std::filesystem::path(filename).stem().string(); }

}  // namespace detail

/// Reads a directory of `<id>.txt` cases plus a labels JSON object mapping a
/// query filename to the filenames of its noticed cases.
inline std::pair<Corpus, Qrels> load_coliee_layout(const std::filesystem::path& case_dir,
                                                   const std::filesystem::path& labels_file,
                                                   const TokenizerConfig& config = TokenizerConfig::for_indexing()) {
    namespace fs = std::filesystem;
    std::error_code ec;
    if (!fs::is_directory(case_dir, ec)) throw IngestionError(case_dir.string(), "not a directory");

    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(case_dir))
        if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
    std::sort(files.begin(), files.end());

    Corpus corpus;
    for (const auto& f : files) {
        auto id = f.stem().string();
        corpus.documents.emplace(id, make_document(id, read_file(f), config));
    }

    nlohmann::ordered_json labels;
    try {
        labels = nlohmann::ordered_json::parse(read_file(labels_file));
    } catch (const nlohmann::json::exception& e) {
        throw IngestionError(labels_file.string(), e.what());
    }
    if (!labels.is_object()) throw IngestionError(labels_file.string(), "labels must be a JSON object");

    Qrels qrels;
    std::vector<std::string> orphans;
    for (const auto& [query_file, relevant] : labels.items()) {
        if (!relevant.is_array()) throw IngestionError(labels_file.string(), "labels of '" + query_file + "' must be a list");
        const auto qid = detail::stem_of(query_file);
        if (!corpus.documents.count(qid)) orphans.push_back(query_file);
        auto& rel = qrels.judgments[qid];
        for (const auto& d : relevant) {
            const auto name = d.get<std::string>();
            const auto did = detail::stem_of(name);
            if (!corpus.documents.count(did)) orphans.push_back(name);
            rel.insert(did);
        }
        if (rel.empty()) throw ValidationError("empty relevant set for query", {query_file});
        corpus.query_ids.push_back(qid);
    }
    if (!orphans.empty()) throw ValidationError("labels reference missing files", orphans);
    return {std::move(corpus), std::move(qrels)};
}

/// One {"id": ..., "text": ...} object per line; an optional boolean "query"
/// marks query documents.
inline Corpus load_jsonl_corpus(const std::filesystem::path& path,
                                const TokenizerConfig& config = TokenizerConfig::for_indexing()) {
    Corpus corpus;
    std::istringstream in(read_file(path));
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        nlohmann::json obj;
        try {
            obj = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw IngestionError(path.string(), "line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!obj.contains("id") || !obj.contains("text"))
            throw IngestionError(path.string(), "line " + std::to_string(lineno) + ": missing id or text");
        auto id = obj["id"].get<std::string>();
        if (corpus.documents.count(id)) throw ValidationError("duplicate document id", {id});
        if (obj.value("query", false)) corpus.query_ids.push_back(id);
        corpus.documents.emplace(id, make_document(id, obj["text"].get<std::string>(), config));
    }
    return corpus;
}

/// TREC qrels: `qid 0 docid rel`, rel > 0 meaning relevant. Queries whose
/// judgments are all non-relevant are not kept.
inline Qrels parse_trec_qrels(std::string_view text, const std::string& origin = "<qrels>") {
    Qrels qrels;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (detail::trim(line).empty()) continue;
        std::istringstream fields(line);
        std::string qid, iter, docid;
        int rel = 0;
        if (!(fields >> qid >> iter >> docid >> rel))
            throw IngestionError(origin, "malformed qrels line " + std::to_string(lineno));
        if (rel > 0) qrels.judgments[qid].insert(docid);
    }
    return qrels;
}

inline Qrels load_trec_qrels(const std::filesystem::path& path) { return parse_trec_qrels(read_file(path), path.string()); }

inline std::string format_trec_qrels(const Qrels& qrels) {
    std::string out;
    for (const auto& [q, rel] : qrels.judgments)
        for (const auto& d : rel) out += q + " 0 " + d + " 1\n";
    return out;
}

/// Sets the corpus query list from the judged queries, keeping any already
/// declared order first.
inline void assign_queries(Corpus& corpus, const Qrels& qrels) {
    std::set<std::string> seen(corpus.query_ids.begin(), corpus.query_ids.end());
    for (const auto& [q, rel] : qrels.judgments)
        if (seen.insert(q).second) corpus.query_ids.push_back(q);
}

/// Splits an ordered query list into (train, validation) with the last
/// `validation_size` queries held out.
inline std::pair<std::vector<std::string>, std::vector<std::string>> split_last(std::span<const std::string> query_ids,
                                                                                std::size_t validation_size) {
    const std::size_t cut = query_ids.size() > validation_size ? query_ids.size() - validation_size : 0;
    return {{query_ids.begin(), query_ids.begin() + static_cast<std::ptrdiff_t>(cut)},
            {query_ids.begin() + static_cast<std::ptrdiff_t>(cut), query_ids.end()}};
}

}  // namespace qbd
