#include <random>

#include <gtest/gtest.h>

#include <qbd/kmeans.hpp>
#include <qbd/rerank.hpp>

using namespace qbd;

namespace {

using Points = std::vector<std::vector<double>>;

Points planted_blobs(std::mt19937& gen, const Points& centers, std::size_t per_blob, double spread) {
    std::normal_distribution<double> n(0.0, spread);
    Points out;
    for (std::size_t i = 0; i < per_blob; ++i)
        for (const auto& c : centers) {
            auto p = c;
            for (auto& x : p) x += n(gen);
            out.push_back(p);
        }
    return out;
}

double inertia_of(const Points& pts, const std::vector<std::size_t>& assign, std::size_t k) {
    const std::size_t dim = pts.front().size();
    Points mean(k, std::vector<double>(dim, 0.0));
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < pts.size(); ++i) {
        ++count[assign[i]];
        for (std::size_t j = 0; j < dim; ++j) mean[assign[i]][j] += pts[i][j];
    }
    for (std::size_t c = 0; c < k; ++c)
        for (auto& x : mean[c]) x /= static_cast<double>(std::max<std::size_t>(count[c], 1));
    double s = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) s += squared_distance(pts[i], mean[assign[i]]);
    return s;
}

// Best inertia over every assignment of the points to k labels.
double exhaustive_inertia(const Points& pts, std::size_t k) {
    std::vector<std::size_t> assign(pts.size(), 0);
    double best = std::numeric_limits<double>::infinity();
    for (;;) {
        best = std::min(best, inertia_of(pts, assign, k));
        std::size_t i = 0;
        while (i < assign.size() && ++assign[i] == k) assign[i++] = 0;
        if (i == assign.size()) break;
    }
    return best;
}

// Serves fixed vectors by text; pairs score as (cos + 1) / 2.
class MapProvider final : public EmbeddingProvider {
public:
    explicit MapProvider(std::size_t dim) { handle_.dim = dim; }
    const ProviderHandle& handle() const override { return handle_; }
    std::vector<EmbeddingVector> embed(std::span<const std::string> texts, EmbedRole) override {
        std::vector<EmbeddingVector> out;
        for (const auto& t : texts) out.push_back(vectors.at(t));
        return out;
    }
    std::vector<double> score(std::span<const std::pair<std::string, std::string>> pairs) override {
        std::vector<double> out;
        for (const auto& [a, b] : pairs) out.push_back(cosine_pair_score(vectors.at(a), vectors.at(b)));
        return out;
    }
    std::map<std::string, EmbeddingVector> vectors;

private:
    ProviderHandle handle_;
};

CaseDocument doc_with_sentences(const std::string& id, std::vector<std::string> sentences) {
    CaseDocument d;
    d.id = id;
    d.sentences = std::move(sentences);
    for (const auto& s : d.sentences) d.raw_text += s + " ";
    d.paragraphs = {d.raw_text};
    return d;
}

EmbeddingVector random_unit(std::mt19937& gen, std::size_t dim) {
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> v(dim);
    for (auto& x : v) x = n(gen);
    return normalized(v);
}

// Three planted topics along the first three axes.
struct PlantedQuery {
    MapProvider provider{6};
    CaseDocument query;
    std::vector<std::size_t> topic;  // per query sentence
};

PlantedQuery planted_query(std::mt19937& gen) {
    PlantedQuery pq;
    std::normal_distribution<double> n(0.0, 0.05);
    std::vector<std::string> sentences;
    for (std::size_t i = 0; i < 12; ++i) {
        const std::size_t t = (i * 7) % 3;
        std::vector<double> v(6, 0.0);
        v[t] = 1.0;
        for (auto& x : v) x += n(gen);
        const auto s = "query sentence " + std::to_string(i);
        pq.provider.vectors[s] = normalized(v);
        sentences.push_back(s);
        pq.topic.push_back(t);
    }
    pq.query = doc_with_sentences("q", sentences);
    return pq;
}

}  // namespace

TEST(KMeans, RecoversPlantedBlobs) {
    std::mt19937 gen(31);
    const Points centers = {{0, 0}, {10, 0}, {0, 10}};
    const auto pts = planted_blobs(gen, centers, 20, 0.5);
    const auto r = kmeans(pts, {3, 42, 4, 100});
    for (std::size_t i = 0; i < pts.size(); ++i) EXPECT_EQ(r.assignment[i], r.assignment[i % 3]);
    EXPECT_NE(r.assignment[0], r.assignment[1]);
    EXPECT_NE(r.assignment[1], r.assignment[2]);
    EXPECT_NE(r.assignment[0], r.assignment[2]);
    EXPECT_NEAR(r.inertia, inertia_of(pts, r.assignment, 3), 1e-9);
}

TEST(KMeans, MatchesExhaustiveOptimumOnSmallSets) {
    std::mt19937 gen(32);
    for (int trial = 0; trial < 5; ++trial) {
        const Points centers = {{0, 0, 0}, {6, 1, 0}, {1, 7, 3}};
        const auto pts = planted_blobs(gen, centers, 3, 1.0);
        const auto r = kmeans(pts, {3, 42, 4, 100});
        EXPECT_NEAR(r.inertia, exhaustive_inertia(pts, 3), 1e-9);
    }
}

TEST(KMeans, TraceNonIncreasingAndDeterministic) {
    std::mt19937 gen(33);
    std::uniform_real_distribution<double> u(0, 1);
    Points pts(80, std::vector<double>(5));
    for (auto& p : pts)
        for (auto& x : p) x = u(gen);
    const auto a = kmeans(pts, {4, 7, 3, 100});
    const auto b = kmeans(pts, {4, 7, 3, 100});
    EXPECT_EQ(a.assignment, b.assignment);
    EXPECT_EQ(a.inertia, b.inertia);
    ASSERT_FALSE(a.inertia_trace.empty());
    for (std::size_t i = 1; i < a.inertia_trace.size(); ++i) EXPECT_LE(a.inertia_trace[i], a.inertia_trace[i - 1] + 1e-12);
    EXPECT_EQ(std::set<std::size_t>(a.assignment.begin(), a.assignment.end()).size(), 4u);
}

TEST(KMeans, InvalidArguments) {
    const Points pts = {{0.0}, {1.0}};
    EXPECT_THROW(kmeans(pts, {3, 42, 4, 100}), std::invalid_argument);
    EXPECT_THROW(kmeans(pts, {0, 42, 4, 100}), std::invalid_argument);
    EXPECT_THROW(kmeans(pts, {1, 42, 0, 100}), std::invalid_argument);
}

TEST(Representatives, OnePerPlantedTopicClosestToMean) {
    std::mt19937 gen(34);
    auto pq = planted_query(gen);
    const auto reps = representative_sentences(pq.query, pq.provider, RerankParams{});
    ASSERT_EQ(reps.sentences.size(), 3u);
    std::set<std::size_t> topics;
    for (std::size_t r = 0; r < reps.sentences.size(); ++r) {
        const auto& rep = reps.sentences[r];
        if (r > 0) {
            EXPECT_LT(reps.sentences[r - 1].index, rep.index);
        }
        EXPECT_EQ(rep.text, pq.query.sentences[rep.index]);
        const auto t = pq.topic[rep.index];
        topics.insert(t);
        // brute force: the member nearest its topic mean
        std::vector<double> mean(6, 0.0);
        std::size_t members = 0;
        for (std::size_t i = 0; i < pq.topic.size(); ++i) {
            if (pq.topic[i] != t) continue;
            ++members;
            const auto& v = pq.provider.vectors.at(pq.query.sentences[i]).values;
            for (std::size_t j = 0; j < 6; ++j) mean[j] += v[j];
        }
        for (auto& x : mean) x /= static_cast<double>(members);
        std::size_t best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < pq.topic.size(); ++i) {
            if (pq.topic[i] != t) continue;
            const auto& v = pq.provider.vectors.at(pq.query.sentences[i]).values;
            const std::vector<double> p(v.begin(), v.end());
            if (const double d = squared_distance(p, mean); d < best_d) {
                best_d = d;
                best = i;
            }
        }
        EXPECT_EQ(rep.index, best);
    }
    EXPECT_EQ(topics.size(), 3u);
}

TEST(Representatives, ShortQueryKeepsEverySentence) {
    MapProvider p(4);
    p.vectors["a"] = normalized(std::vector<double>{1, 0, 0, 0});
    p.vectors["b"] = EmbeddingVector::sentinel(4);
    p.vectors["c"] = normalized(std::vector<double>{0, 1, 0, 0});
    const auto reps = representative_sentences(doc_with_sentences("q", {"a", "b", "c"}), p, RerankParams{});
    EXPECT_EQ(reps.texts(), (std::vector<std::string>{"a", "c"}));
    p.vectors["z"] = EmbeddingVector::sentinel(4);
    EXPECT_THROW(representative_sentences(doc_with_sentences("q", {"z"}), p, RerankParams{}), ValidationError);
}

TEST(MatchSentences, BruteForceArgmax) {
    std::mt19937 gen(35);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<EmbeddingVector> reps, docs;
        for (std::size_t i = 0; i < 1 + gen() % 4; ++i) reps.push_back(random_unit(gen, 10));
        for (std::size_t i = 0; i < 1 + gen() % 25; ++i) docs.push_back(random_unit(gen, 10));
        const auto m = match_sentences(reps, docs);
        ASSERT_EQ(m.size(), reps.size());
        for (const auto& match : m) {
            for (std::size_t d = 0; d < docs.size(); ++d) EXPECT_LE(cosine(reps[match.query_sentence], docs[d]), match.cosine);
            EXPECT_DOUBLE_EQ(match.cosine, cosine(reps[match.query_sentence], docs[match.doc_sentence]));
        }
    }
}

TEST(MatchSentences, TiesGoToLowestIndex) {
    const std::vector<EmbeddingVector> reps = {normalized(std::vector<double>{1, 0})};
    const std::vector<EmbeddingVector> docs = {normalized(std::vector<double>{0, 1}), normalized(std::vector<double>{1, 0}),
                                               normalized(std::vector<double>{1, 0})};
    EXPECT_EQ(match_sentences(reps, docs).front().doc_sentence, 1u);
}

namespace {

struct RerankFixture {
    MapProvider provider{6};
    Corpus corpus;
    RankedList first_stage;
};

RerankFixture rerank_fixture(std::uint32_t seed) {
    std::mt19937 gen(seed);
    auto pq = planted_query(gen);
    RerankFixture f;
    f.provider = pq.provider;
    f.corpus.documents.emplace("q", pq.query);
    f.corpus.query_ids = {"q"};
    f.first_stage.query_id = "q";
    for (int d = 0; d < 15; ++d) {
        std::vector<std::string> sentences;
        for (std::size_t s = 0; s < 2 + gen() % 6; ++s) {
            const auto text = "doc " + std::to_string(d) + " sentence " + std::to_string(s);
            f.provider.vectors[text] = random_unit(gen, 6);
            sentences.push_back(text);
        }
        const auto id = "d" + std::to_string(100 + d);
        f.corpus.documents.emplace(id, doc_with_sentences(id, sentences));
        f.first_stage.entries.push_back({id, 20.0 - d});
    }
    return f;
}

}  // namespace

TEST(Rerank, ScoresBoundedByRepresentativeCount) {
    auto f = rerank_fixture(36);
    RerankParams p;
    p.depth = 10;
    const auto out = rerank_topk(f.first_stage, f.corpus, f.provider, p);
    ASSERT_EQ(out.entries.size(), 10u);
    std::set<std::string> top10;
    for (std::size_t i = 0; i < 10; ++i) top10.insert(f.first_stage.entries[i].doc_id);
    for (const auto& e : out.entries) {
        EXPECT_TRUE(top10.count(e.doc_id));
        EXPECT_GE(e.score, 0.0);
        EXPECT_LE(e.score, 3.0);
    }
    for (std::size_t i = 1; i < out.entries.size(); ++i) EXPECT_GE(out.entries[i - 1].score, out.entries[i].score);
}

TEST(Rerank, ScoreIsSumOfMatchedPairRelevance) {
    auto f = rerank_fixture(37);
    const auto reps = representative_sentences(f.corpus.at("q"), f.provider, RerankParams{});
    const auto& doc = f.corpus.at("d103");
    auto matches = match_sentences(reps, doc, f.provider);
    const double s = cluster_driven_score(reps, matches, doc, f.provider);
    double want = 0;
    for (const auto& rep : reps.sentences) {
        double best = -2;
        std::size_t best_d = 0;
        for (std::size_t d = 0; d < doc.sentences.size(); ++d) {
            const double c = cosine(f.provider.vectors.at(rep.text), f.provider.vectors.at(doc.sentences[d]));
            if (c > best) {
                best = c;
                best_d = d;
            }
        }
        want += (cosine(f.provider.vectors.at(rep.text), f.provider.vectors.at(doc.sentences[best_d])) + 1) / 2;
    }
    EXPECT_NEAR(s, want, 1e-12);
    for (const auto& m : matches) EXPECT_GE(m.pair_relevance, 0.0);
}

TEST(Rerank, InvariantToDocSentenceOrderAndFirstStageScores) {
    auto f = rerank_fixture(38);
    RerankParams p;
    p.depth = 15;
    const auto base = rerank_topk(f.first_stage, f.corpus, f.provider, p);
    auto shuffled = f.corpus;
    std::mt19937 gen(1);
    for (auto& [id, doc] : shuffled.documents)
        if (id != "q") std::shuffle(doc.sentences.begin(), doc.sentences.end(), gen);
    auto flat = f.first_stage;
    for (auto& e : flat.entries) e.score = 1.0;
    flat.sort();
    const auto other = rerank_topk(flat, shuffled, f.provider, p);
    ASSERT_EQ(base.entries.size(), other.entries.size());
    for (std::size_t i = 0; i < base.entries.size(); ++i) {
        EXPECT_EQ(base.entries[i].doc_id, other.entries[i].doc_id);
        EXPECT_NEAR(base.entries[i].score, other.entries[i].score, 1e-12);
    }
}

TEST(Rerank, DeterministicAcrossThreadCounts) {
    auto f = rerank_fixture(39);
    RerankParams p;
    p.threads = 1;
    const auto one = rerank_topk(f.first_stage, f.corpus, f.provider, p);
    p.threads = 4;
    const auto four = rerank_topk(f.first_stage, f.corpus, f.provider, p);
    ASSERT_EQ(one.entries.size(), four.entries.size());
    for (std::size_t i = 0; i < one.entries.size(); ++i) {
        EXPECT_EQ(one.entries[i].doc_id, four.entries[i].doc_id);
        EXPECT_EQ(one.entries[i].score, four.entries[i].score);
    }
}

TEST(Rerank, InvalidInputs) {
    auto f = rerank_fixture(40);
    RerankParams p;
    p.k = 0;
    EXPECT_THROW(rerank_topk(f.first_stage, f.corpus, f.provider, p), ConfigError);
    RankedList empty;
    empty.query_id = "q";
    EXPECT_THROW(rerank_topk(empty, f.corpus, f.provider, RerankParams{}), std::invalid_argument);
}
