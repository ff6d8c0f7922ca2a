#pragma once

// Naive reference implementations shared by the unit tests and the
// acceptance binary. They work from raw token lists and ranked lists with no
// postings, prefix sums or caching.

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <qbd/pipeline.hpp>
#include <qbd/rankers.hpp>

namespace qbd::oracle {

using Docs = std::map<std::string, std::vector<std::string>>;

inline Docs random_docs(std::mt19937& gen, int n_docs, int vocab, int max_len) {
    Docs docs;
    for (int d = 0; d < n_docs; ++d) {
        std::vector<std::string> toks;
        const int len = 1 + static_cast<int>(gen() % static_cast<unsigned>(max_len));
        for (int i = 0; i < len; ++i) toks.push_back("t" + std::to_string(gen() % static_cast<unsigned>(vocab)));
        docs.emplace("doc" + std::to_string(d), std::move(toks));
    }
    return docs;
}

// Straight from the raw token lists, no postings involved.
inline std::map<std::string, double> naive_scores(const Docs& docs, const std::vector<std::string>& query, const RankerParams& p) {
    const double n = static_cast<double>(docs.size());
    double total = 0;
    for (const auto& [id, toks] : docs) total += static_cast<double>(toks.size());
    const double avg = total / n;
    auto tf = [](const std::vector<std::string>& toks, const std::string& t) {
        return static_cast<double>(std::count(toks.begin(), toks.end(), t));
    };
    std::set<std::string> unique(query.begin(), query.end());
    std::map<std::string, double> out;
    for (const auto& [id, toks] : docs) {
        double s = 0;
        bool any = false;
        for (const auto& t : unique) {
            const double qtf = static_cast<double>(std::count(query.begin(), query.end(), t));
            double df = 0, cf = 0;
            for (const auto& [id2, toks2] : docs) {
                const double f = tf(toks2, t);
                cf += f;
                df += f > 0 ? 1 : 0;
            }
            if (df == 0) continue;
            const double f = tf(toks, t);
            const double len = static_cast<double>(toks.size());
            if (p.model == RankerModel::BM25) {
                if (f == 0) continue;
                any = true;
                s += qtf * std::log(1 + (n - df + 0.5) / (df + 0.5)) * f * (p.k1 + 1) /
                     (f + p.k1 * (1 - p.b + p.b * len / avg));
            } else if (p.model == RankerModel::LMJM) {
                any = true;
                s += qtf * std::log((1 - p.lambda) * f / len + p.lambda * cf / total);
            } else {
                if (f == 0) continue;
                any = true;
                const double ne = n * (1 - std::pow((n - 1) / n, cf));
                const double tfn = f * std::log2(1 + p.c * avg / len);
                s += qtf * (cf + 1) / (df * (tfn + 1)) * tfn * std::log2((n + 1) / (ne + 0.5));
            }
        }
        if (any) out[id] = s;
    }
    return out;
}

inline RankedList list_of(const std::string& qid, std::vector<std::pair<std::string, double>> entries) {
    RankedList l;
    l.query_id = qid;
    for (auto& [d, s] : entries) l.entries.push_back({d, s});
    l.sort();
    return l;
}

struct RandomTask {
    Run run;
    Qrels qrels;
};

inline RandomTask random_task(std::mt19937& gen, int queries, int docs) {
    RandomTask t;
    std::uniform_real_distribution<double> u(0, 1);
    for (int q = 0; q < queries; ++q) {
        const auto qid = "q" + std::to_string(q);
        auto& rel = t.qrels.judgments[qid];
        while (rel.empty())
            for (int d = 0; d < docs; ++d)
                if (u(gen) < 0.1) rel.insert("d" + std::to_string(d));
        std::vector<std::pair<std::string, double>> entries;
        const int len = static_cast<int>(gen() % static_cast<unsigned>(docs));
        for (int d = 0; d < len; ++d) entries.emplace_back("d" + std::to_string(d), std::floor(u(gen) * 5));
        t.run[qid] = list_of(qid, entries);
    }
    return t;
}

// Set metrics counted straight from the lists.
inline EvalResult naive_evaluate(const Run& run, const Qrels& qrels, std::size_t k) {
    EvalResult r;
    r.cutoff = k;
    double ret = 0, rel = 0, hit = 0, mp = 0, mr = 0;
    for (const auto& [q, list] : run) {
        const auto& relevant = qrels.relevant(q);
        double h = 0;
        const auto n = std::min(k, list.entries.size());
        for (std::size_t i = 0; i < n; ++i) h += relevant.count(list.entries[i].doc_id);
        ret += static_cast<double>(n);
        rel += static_cast<double>(relevant.size());
        hit += h;
        mp += n ? h / static_cast<double>(n) : 0;
        mr += h / static_cast<double>(relevant.size());
    }
    r.precision = ret ? hit / ret : 0;
    r.recall = rel ? hit / rel : 0;
    r.f1 = r.precision + r.recall > 0 ? 2 * r.precision * r.recall / (r.precision + r.recall) : 0;
    r.macro_precision = mp / static_cast<double>(run.size());
    r.macro_recall = mr / static_cast<double>(run.size());
    return r;
}

}  // namespace qbd::oracle
