#pragma once

// Desk-scale stand-in for a case-law collection. Every query case has its own
// "fact" vocabulary and belongs to a broader topic. Noticed (relevant) cases
// restate some of the query's facts; hard negatives share only the topic.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <numeric>
#include <sstream>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "corpus.hpp"
#include "util.hpp"

namespace qbd {

struct SyntheticSpec {
    std::size_t num_candidates = 200;
    std::size_t num_queries = 20;
    std::size_t extra_topics = 10;  // topics no query is about
    std::size_t hard_negatives_per_query = 3;
    std::uint64_t seed = 2022;
};

struct SyntheticCollection {
    Corpus corpus;
    Qrels qrels;
};

namespace detail {

class SyntheticWriter {
public:
    explicit SyntheticWriter(std::uint64_t seed) : rng_(seed) {
        static const char* const syllables[] = {"ba", "ce", "di", "fo", "gu", "ha", "je", "ki", "lo", "mu", "na",
                                                "pe", "qui", "ra", "so", "tu", "ve", "wa", "xo", "ze", "bri", "cla",
                                                "dro", "fle", "gri", "pla", "sti", "tro", "ven", "mor"};
        used_.insert(english_stopwords().begin(), english_stopwords().end());
        fresh_word_ = [this] {
            for (;;) {
                std::string w;
                const auto parts = 2 + rng_.index(2);
                for (std::size_t i = 0; i < parts; ++i) w += syllables[rng_.index(std::size(syllables))];
                if (used_.insert(w).second) return w;
            }
        };
        for (int i = 0; i < 300; ++i) general_.push_back(fresh_word_());
    }

    std::vector<std::string> make_vocab(std::size_t n) {
        std::vector<std::string> v;
        for (std::size_t i = 0; i < n; ++i) v.push_back(fresh_word_());
        return v;
    }

    const std::string& pick(const std::vector<std::string>& v) { return v[rng_.index(v.size())]; }

    /// A sentence drawing content words from `focus` with probability `share`.
    std::string sentence(const std::vector<std::string>* focus, double share) {
        static const std::vector<std::string> glue = {"the", "of", "and", "to", "in", "that", "by", "was", "for", "on"};
        const auto len = 8 + rng_.index(9);
        std::string s;
        for (std::size_t i = 0; i < len; ++i) {
            const double u = rng_.uniform();
            std::string w;
            if (u < 0.3) w = pick(glue);
            else if (focus && u < 0.3 + 0.7 * share) w = pick(*focus);
            else w = pick(general_);
            if (i == 0) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
            if (!s.empty()) s += ' ';
            s += w;
        }
        return s + ".";
    }

    /// Rewrites a sentence, swapping each word for a `focus` word with
    /// probability `noise`.
    std::string paraphrase(const std::string& sentence, const std::vector<std::string>& focus, double noise) {
        std::istringstream in(sentence.substr(0, sentence.size() - 1));
        std::string w, out;
        bool first = true;
        while (in >> w) {
            if (rng_.uniform() < noise) w = pick(focus);
            if (first) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
            if (!out.empty()) out += ' ';
            out += w;
            first = false;
        }
        return out + ".";
    }

    static std::string layout(const std::vector<std::string>& sentences, Rng& rng) {
        std::string text;
        std::size_t para = 1, i = 0;
        while (i < sentences.size()) {
            const auto take = std::min<std::size_t>(3 + rng.index(3), sentences.size() - i);
            text += "[" + std::to_string(para++) + "]";
            for (std::size_t j = 0; j < take; ++j) text += " " + sentences[i++];
            text += "\n\n";
        }
        return text;
    }

    Rng& rng() { return rng_; }
    const std::vector<std::string>& general() const { return general_; }

private:
    Rng rng_;
    std::vector<std::string> general_;
    std::set<std::string> used_;
    std::function<std::string()> fresh_word_;
};

}  // namespace detail

/// Generates the collection; identical spec => identical bytes.
inline SyntheticCollection generate_synthetic(const SyntheticSpec& spec = {}) {
    detail::SyntheticWriter w(spec.seed);
    auto& rng = w.rng();
    const std::size_t topics = spec.num_queries + spec.extra_topics;
    std::vector<std::vector<std::string>> topic_vocab, fact_vocab;
    for (std::size_t t = 0; t < topics; ++t) topic_vocab.push_back(w.make_vocab(25));
    for (std::size_t q = 0; q < spec.num_queries; ++q) fact_vocab.push_back(w.make_vocab(12));

    struct Draft {
        std::string text;
        bool query = false;
        std::size_t owner = 0;  // query index for queries and relevant docs
        bool relevant = false;
    };
    std::vector<Draft> drafts;

    // queries: fact, topic and boilerplate sentences, so clustering has three
    // natural groups
    std::vector<std::vector<std::string>> query_facts(spec.num_queries);
    for (std::size_t q = 0; q < spec.num_queries; ++q) {
        std::vector<std::string> sentences;
        const auto n = 24 + rng.index(10);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = rng.uniform();
            if (u < 0.3) {
                sentences.push_back(w.sentence(&fact_vocab[q], 0.6));
                query_facts[q].push_back(sentences.back());
            } else if (u < 0.65) {
                sentences.push_back(w.sentence(&topic_vocab[q], 0.45));
            } else {
                sentences.push_back(w.sentence(nullptr, 0.0));
            }
        }
        if (query_facts[q].empty()) {
            sentences.push_back(w.sentence(&fact_vocab[q], 0.6));
            query_facts[q].push_back(sentences.back());
        }
        drafts.push_back({detail::SyntheticWriter::layout(sentences, rng), true, q, false});
    }

    static const std::size_t relevant_counts[] = {1, 1, 2, 2, 2, 3, 3, 4, 5, 6};
    auto body = [&](std::size_t topic, double topic_rate) {
        std::vector<std::string> s;
        const auto n = 14 + rng.index(16);
        for (std::size_t i = 0; i < n; ++i)
            s.push_back(rng.uniform() < topic_rate ? w.sentence(&topic_vocab[topic], 0.4) : w.sentence(nullptr, 0.0));
        return s;
    };
    auto insert_at_random = [&](std::vector<std::string>& s, std::string sentence) {
        s.insert(s.begin() + static_cast<std::ptrdiff_t>(rng.index(s.size() + 1)), std::move(sentence));
    };

    std::size_t candidates = 0;
    for (std::size_t q = 0; q < spec.num_queries && candidates < spec.num_candidates; ++q) {
        const auto nrel = relevant_counts[rng.index(std::size(relevant_counts))];
        for (std::size_t r = 0; r < nrel && candidates < spec.num_candidates; ++r, ++candidates) {
            // relevant: the topic plus restated facts, some faint and some strong
            auto s = body(q, 0.2 + 0.3 * rng.uniform());
            const auto restated = 1 + rng.index(4);
            const double noise = 0.2 + 0.35 * rng.uniform();
            for (std::size_t i = 0; i < restated; ++i)
                insert_at_random(s, w.paraphrase(w.pick(query_facts[q]), fact_vocab[q], noise));
            drafts.push_back({detail::SyntheticWriter::layout(s, rng), false, q, true});
        }
        for (std::size_t h = 0; h < spec.hard_negatives_per_query && candidates < spec.num_candidates; ++h, ++candidates) {
            // hard negative: topic-heavy, occasionally one stray fact word
            auto s = body(q, 0.35 + 0.3 * rng.uniform());
            if (rng.uniform() < 0.5) insert_at_random(s, w.sentence(&fact_vocab[q], 0.15));
            drafts.push_back({detail::SyntheticWriter::layout(s, rng), false, q, false});
        }
    }
    while (candidates < spec.num_candidates) {
        const auto topic = rng.index(topics);
        drafts.push_back({detail::SyntheticWriter::layout(body(topic, 0.3 + 0.3 * rng.uniform()), rng), false, 0, false});
        ++candidates;
    }

    // shuffled ids so that id order carries no relevance signal
    std::vector<std::size_t> perm(drafts.size());
    std::iota(perm.begin(), perm.end(), 0);
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.index(i)]);

    SyntheticCollection out;
    std::vector<std::string> ids(drafts.size());
    for (std::size_t i = 0; i < drafts.size(); ++i) {
        char buf[16];
        std::snprintf(buf, sizeof buf, "%06zu", perm[i] + 1);
        ids[i] = buf;
    }
    const auto config = TokenizerConfig::for_indexing();
    std::vector<std::string> query_ids(spec.num_queries);
    for (std::size_t i = 0; i < drafts.size(); ++i) {
        out.corpus.documents.emplace(ids[i], make_document(ids[i], drafts[i].text, config));
        if (drafts[i].query) query_ids[drafts[i].owner] = ids[i];
    }
    out.corpus.query_ids = query_ids;
    for (std::size_t i = 0; i < drafts.size(); ++i)
        if (drafts[i].relevant) out.qrels.judgments[query_ids[drafts[i].owner]].insert(ids[i]);
    return out;
}

/// Writes `<dir>/<id>.txt` per case and `labels` as {"<q>.txt": ["<d>.txt", ...]}.
inline void write_coliee_layout(const SyntheticCollection& c, const std::filesystem::path& dir,
                                const std::filesystem::path& labels) {
    for (const auto& [id, doc] : c.corpus.documents) write_file_atomic(dir / (id + ".txt"), doc.raw_text);
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& q : c.corpus.query_ids) {
        auto arr = nlohmann::ordered_json::array();
        for (const auto& d : c.qrels.relevant(q)) arr.push_back(d + ".txt");
        j[q + ".txt"] = std::move(arr);
    }
    write_file_atomic(labels, j.dump(2) + "\n");
}

}  // namespace qbd
