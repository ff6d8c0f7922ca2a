#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "error.hpp"

namespace qbd {

struct Posting {
    std::uint32_t doc;  // index into InvertedIndex::doc_ids
    std::uint32_t tf;

    friend bool operator==(const Posting&, const Posting&) = default;
};

struct TermStats {
    std::vector<Posting> postings;  // ascending doc
    std::uint64_t cf = 0;

    std::size_t df() const noexcept { return postings.size(); }
};

/// Write-once collection statistics. Documents are numbered in ascending id
/// order, so the numbering is independent of how the corpus was enumerated.
class InvertedIndex {
public:
    std::size_t num_docs() const noexcept { return doc_ids_.size(); }
    double avg_len() const noexcept { return avg_len_; }
    std::uint64_t total_tokens() const noexcept { return total_tokens_; }
    const std::vector<std::string>& doc_ids() const noexcept { return doc_ids_; }
    const std::vector<std::uint32_t>& doc_lengths() const noexcept { return doc_len_; }
    std::uint32_t doc_len(std::uint32_t doc) const { return doc_len_.at(doc); }
    const std::string& doc_id(std::uint32_t doc) const { return doc_ids_.at(doc); }
    const std::unordered_map<std::string, TermStats>& terms() const noexcept { return terms_; }
    const TokenizerConfig& tokenizer() const noexcept { return tokenizer_; }

    const TermStats* find(const std::string& term) const {
        auto it = terms_.find(term);
        return it == terms_.end() ? nullptr : &it->second;
    }
    std::size_t df(const std::string& term) const {
        const auto* s = find(term);
        return s ? s->df() : 0;
    }
    std::uint64_t cf(const std::string& term) const {
        const auto* s = find(term);
        return s ? s->cf : 0;
    }

    /// P(t|C) = cf / total_tokens.
    double collection_probability(const std::string& term) const {
        return total_tokens_ == 0 ? 0.0 : static_cast<double>(cf(term)) / static_cast<double>(total_tokens_);
    }

    /// Builds from already-tokenized documents keyed by id.
    static InvertedIndex from_tokens(const std::map<std::string, std::vector<std::string>>& docs,
                                     TokenizerConfig tokenizer = TokenizerConfig::for_indexing()) {
        if (docs.empty()) throw ValidationError("cannot index an empty corpus");
        InvertedIndex idx;
        idx.tokenizer_ = std::move(tokenizer);
        idx.doc_ids_.reserve(docs.size());
        idx.doc_len_.reserve(docs.size());
        std::uint32_t doc = 0;
        for (const auto& [id, tokens] : docs) {
            idx.doc_ids_.push_back(id);
            idx.doc_len_.push_back(static_cast<std::uint32_t>(tokens.size()));
            idx.total_tokens_ += tokens.size();
            std::map<std::string_view, std::uint32_t> counts;
            for (const auto& t : tokens) ++counts[t];
            for (const auto& [term, tf] : counts) {
                auto& stats = idx.terms_[std::string(term)];
                stats.postings.push_back({doc, tf});
                stats.cf += tf;
            }
            ++doc;
        }
        idx.avg_len_ = static_cast<double>(idx.total_tokens_) / static_cast<double>(idx.doc_ids_.size());
        return idx;
    }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["format"] = "qbd-index-1";
        j["tokenizer"] = {{"lowercase", tokenizer_.lowercase},
                          {"min_token_length", tokenizer_.min_token_length},
                          {"remove_stopwords", tokenizer_.remove_stopwords},
                          {"strip_suppressed_fragments", tokenizer_.strip_suppressed_fragments},
                          {"stopwords", tokenizer_.stopwords}};
        j["doc_ids"] = doc_ids_;
        j["doc_len"] = doc_len_;
        std::map<std::string, const TermStats*> sorted;
        for (const auto& [t, s] : terms_) sorted.emplace(t, &s);
        auto& postings = j["postings"] = nlohmann::json::object();
        for (const auto& [t, s] : sorted) {
            auto arr = nlohmann::json::array();
            for (const auto& p : s->postings) arr.push_back({p.doc, p.tf});
            postings[t] = std::move(arr);
        }
        return j;
    }

    static InvertedIndex from_json(const nlohmann::json& j) {
        if (j.value("format", "") != "qbd-index-1") throw ValidationError("unsupported index format");
        InvertedIndex idx;
        const auto& tok = j.at("tokenizer");
        idx.tokenizer_.lowercase = tok.at("lowercase").get<bool>();
        idx.tokenizer_.min_token_length = tok.at("min_token_length").get<int>();
        idx.tokenizer_.remove_stopwords = tok.at("remove_stopwords").get<bool>();
        idx.tokenizer_.strip_suppressed_fragments = tok.at("strip_suppressed_fragments").get<bool>();
        idx.tokenizer_.stopwords = tok.at("stopwords").get<std::set<std::string>>();
        idx.doc_ids_ = j.at("doc_ids").get<std::vector<std::string>>();
        idx.doc_len_ = j.at("doc_len").get<std::vector<std::uint32_t>>();
        if (idx.doc_ids_.empty() || idx.doc_ids_.size() != idx.doc_len_.size())
            throw ValidationError("index document tables are inconsistent");
        for (auto len : idx.doc_len_) idx.total_tokens_ += len;
        for (const auto& [t, arr] : j.at("postings").items()) {
            auto& s = idx.terms_[t];
            for (const auto& p : arr) {
                const Posting posting{p.at(0).get<std::uint32_t>(), p.at(1).get<std::uint32_t>()};
                if (posting.doc >= idx.doc_ids_.size() || posting.tf == 0)
                    throw ValidationError("index posting out of range", {t});
                s.postings.push_back(posting);
                s.cf += posting.tf;
            }
        }
        idx.avg_len_ = static_cast<double>(idx.total_tokens_) / static_cast<double>(idx.doc_ids_.size());
        return idx;
    }

private:
    std::vector<std::string> doc_ids_;
    std::vector<std::uint32_t> doc_len_;
    std::unordered_map<std::string, TermStats> terms_;
    std::uint64_t total_tokens_ = 0;
    double avg_len_ = 0.0;
    TokenizerConfig tokenizer_;
};

/// Indexes every document of `corpus` as-is; pass `corpus.candidates()` to
/// keep query cases out of the posting space.
inline InvertedIndex build_index(const Corpus& corpus, const TokenizerConfig& config) {
    config.validate();
    if (corpus.documents.empty()) throw ValidationError("cannot index an empty corpus");
    std::map<std::string, std::vector<std::string>> docs;
    for (const auto& [id, doc] : corpus.documents) docs.emplace(id, tokenize(doc.raw_text, config));
    return InvertedIndex::from_tokens(docs, config);
}

}  // namespace qbd
