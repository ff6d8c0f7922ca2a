#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include <qbd/index.hpp>
#include <qbd/termex.hpp>

using namespace qbd;

namespace {

TokenizerConfig single_char_tokens() {
    TokenizerConfig c;
    c.min_token_length = 1;
    return c;
}

double score_of(const std::vector<TermScore>& scores, const std::string& term) {
    for (const auto& s : scores)
        if (s.term == term) return s.score;
    return std::nan("");
}

std::vector<std::string> random_tokens(std::mt19937& gen, int n, int vocab) {
    std::vector<std::string> out;
    for (int i = 0; i < n; ++i) out.push_back("w" + std::to_string(gen() % static_cast<unsigned>(vocab)));
    return out;
}

InvertedIndex random_index(std::mt19937& gen, int docs, int vocab) {
    std::map<std::string, std::vector<std::string>> d;
    for (int i = 0; i < docs; ++i) d["d" + std::to_string(i)] = random_tokens(gen, 5 + static_cast<int>(gen() % 20), vocab);
    return InvertedIndex::from_tokens(d);
}

}  // namespace

TEST(Kli, HandFixture) {
    // P(a|C) = 1/4; "b" is out of vocabulary
    const auto idx = InvertedIndex::from_tokens({{"d", {"a", "x", "y", "z"}}}, single_char_tokens());
    const std::vector<std::string> q = {"a", "b", "a"};
    const auto s = kli_scores(q, idx);
    EXPECT_NEAR(score_of(s, "a"), 0.6538861686744841, 1e-12);
    const double pb = 1.0 / 3.0;
    EXPECT_NEAR(score_of(s, "b"), pb * std::log(pb / 0.2), 1e-12);
    EXPECT_DOUBLE_EQ(background_probability(idx, "b"), 0.2);
}

TEST(Kli, SortedAndUniqueTerms) {
    std::mt19937 gen(1);
    const auto idx = random_index(gen, 20, 30);
    const auto q = random_tokens(gen, 60, 40);
    const auto s = kli_scores(q, idx);
    EXPECT_EQ(s.size(), std::set<std::string>(q.begin(), q.end()).size());
    for (std::size_t i = 1; i < s.size(); ++i)
        EXPECT_TRUE(s[i - 1].score > s[i].score || (s[i - 1].score == s[i].score && s[i - 1].term < s[i].term));
    EXPECT_THROW(kli_scores(std::vector<std::string>{}, idx), std::invalid_argument);
}

TEST(Plm, OneStepHandFixture) {
    const auto idx = InvertedIndex::from_tokens({{"d", {"a", "b"}}}, single_char_tokens());
    const std::vector<std::string> q = {"a", "b", "a"};
    auto s = plm_init(q, idx, 0.5);
    plm_step(s);
    EXPECT_NEAR(s.e.at("a"), 8.0 / 7.0, 1e-12);
    EXPECT_NEAR(s.e.at("b"), 0.4, 1e-12);
    EXPECT_NEAR(s.p_fg.at("a"), 0.7407407407407407, 1e-12);
    EXPECT_NEAR(s.p_fg.at("b"), 0.25925925925925924, 1e-12);
    EXPECT_EQ(s.iterations, 1);
}

TEST(Plm, DistributionInvariants) {
    std::mt19937 gen(2);
    for (int trial = 0; trial < 20; ++trial) {
        const auto idx = random_index(gen, 15, 25);
        const auto q = random_tokens(gen, 40, 35);
        const auto s = plm_estimate(q, idx, 0.1, 50, 1e-6);
        double sum = 0;
        for (const auto& [t, p] : s.p_fg) {
            EXPECT_GE(p, 0.0);
            sum += p;
        }
        EXPECT_NEAR(sum, 1.0, 1e-9);
        for (const auto& [t, e] : s.e) {
            EXPECT_GE(e, 0.0);
            EXPECT_LE(e, s.tf.at(t));
        }
        EXPECT_LE(s.iterations, 50);
        EXPECT_GE(s.iterations, 1);
    }
}

TEST(Plm, LambdaOneKeepsMaximumLikelihood) {
    std::mt19937 gen(3);
    const auto idx = random_index(gen, 10, 20);
    const auto q = random_tokens(gen, 30, 20);
    const auto s = plm_estimate(q, idx, 1.0, 10, 1e-12);
    for (const auto& [t, count] : s.tf) EXPECT_NEAR(s.p_fg.at(t), count / 30.0, 1e-12);
    EXPECT_EQ(s.iterations, 1);
}

TEST(Plm, ConvergenceStopsEarly) {
    std::mt19937 gen(4);
    const auto idx = random_index(gen, 10, 20);
    const auto q = random_tokens(gen, 30, 20);
    const auto s = plm_estimate(q, idx, 0.1, 10000, 1e-6);
    EXPECT_LT(s.iterations, 10000);
    auto next = s;
    EXPECT_LT(plm_step(next), 1e-6);
}

TEST(Plm, CommonTermsLoseMass) {
    // equal query tf; "rare" is rare in the collection
    const auto idx = InvertedIndex::from_tokens(
        {{"d1", {"common", "common", "common", "rare"}}, {"d2", {"common", "common", "other", "other"}}});
    const std::vector<std::string> q = {"common", "rare", "common", "rare"};
    const auto s = plm_scores(q, idx, 0.1, 50, 1e-6);
    EXPECT_EQ(s.front().term, "rare");
    EXPECT_GT(score_of(s, "rare"), 0.5);
}

TEST(Plm, InvalidParameters) {
    const auto idx = InvertedIndex::from_tokens({{"d", {"ab"}}});
    const std::vector<std::string> q = {"ab"};
    EXPECT_THROW(plm_estimate(q, idx, 0.0, 10, 1e-6), std::invalid_argument);
    EXPECT_THROW(plm_estimate(q, idx, 0.5, 0, 1e-6), std::invalid_argument);
    EXPECT_THROW(plm_estimate(std::vector<std::string>{}, idx, 0.5, 10, 1e-6), std::invalid_argument);
}

TEST(IdfSelect, HandFixture) {
    // df(a) = 3, df(b) = 1, df(c) = 2 over N = 3
    const auto idx = InvertedIndex::from_tokens({{"d1", {"a", "b", "c"}}, {"d2", {"a", "c"}}, {"d3", {"a"}}}, single_char_tokens());
    const std::vector<std::string> q = {"a", "b", "c", "b"};
    const auto r = idf_select(q, idx, 1.0 / 3.0, "q");
    EXPECT_EQ(r.terms, (std::vector<std::string>{"b", "b"}));
    EXPECT_EQ(r.source, QuerySource::IDF);
    const auto scores = idf_scores(q, idx);
    EXPECT_DOUBLE_EQ(score_of(scores, "a"), 0.0);
    EXPECT_DOUBLE_EQ(score_of(scores, "c"), std::log(1.5));
}

TEST(IdfSelect, UnseenTermsRankFirst) {
    const auto idx = InvertedIndex::from_tokens({{"d1", {"a", "b"}}, {"d2", {"b"}}}, single_char_tokens());
    const std::vector<std::string> q = {"b", "zz", "a"};
    const auto scores = idf_scores(q, idx);
    EXPECT_EQ(scores.front().term, "zz");
    EXPECT_DOUBLE_EQ(scores.front().score, std::log(3.0));
}

TEST(SelectProportion, KeepsCeilingOfUniqueTerms) {
    std::mt19937 gen(5);
    const auto idx = random_index(gen, 20, 50);
    const auto q = random_tokens(gen, 80, 60);
    const std::size_t unique = std::set<std::string>(q.begin(), q.end()).size();
    std::size_t previous = 0;
    for (double p : {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0}) {
        const auto r = select_proportion(kli_scores(q, idx), q, p);
        const std::set<std::string> kept(r.terms.begin(), r.terms.end());
        EXPECT_EQ(kept.size(), static_cast<std::size_t>(std::ceil(p * static_cast<double>(unique) - 1e-9)));
        EXPECT_GE(r.terms.size(), previous);
        previous = r.terms.size();
        // order and multiplicity follow the source query
        std::vector<std::string> filtered;
        for (const auto& t : q)
            if (kept.count(t)) filtered.push_back(t);
        EXPECT_EQ(r.terms, filtered);
    }
    EXPECT_EQ(select_proportion(kli_scores(q, idx), q, 1.0).terms, q);
}

TEST(SelectProportion, FloatingProductGuard) {
    EXPECT_EQ(detail::proportion_count(0.7, 10), 7u);
    EXPECT_EQ(detail::proportion_count(0.1, 3), 1u);
    EXPECT_EQ(detail::proportion_count(1.0, 5), 5u);
    EXPECT_EQ(detail::proportion_count(0.3, 10), 3u);
}

TEST(SelectProportion, InvalidProportion) {
    std::vector<TermScore> s = {{"a", 1.0}};
    const std::vector<std::string> q = {"a"};
    EXPECT_THROW(select_proportion(s, q, 0.0), std::invalid_argument);
    EXPECT_THROW(select_proportion(s, q, 1.5), std::invalid_argument);
    EXPECT_THROW(select_proportion({}, q, 0.5), std::invalid_argument);
}

TEST(QueriesJsonl, RoundTrip) {
    std::vector<ReformulatedQuery> qs = {{"q1", {"a", "b", "a"}, QuerySource::KLI, 0.4},
                                         {"q2", {}, QuerySource::PLM, 0.2},
                                         {"q3", {"x"}, QuerySource::ORIGINAL, 1.0}};
    EXPECT_EQ(parse_queries_jsonl(format_queries_jsonl(qs)), qs);
    EXPECT_THROW(parse_queries_jsonl("{not json}\n"), IngestionError);
}
