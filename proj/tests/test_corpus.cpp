#include <filesystem>
#include <random>

#include <unistd.h>

#include <gtest/gtest.h>

#include <qbd/corpus.hpp>
#include <qbd/util.hpp>

namespace fs = std::filesystem;
using namespace qbd;

namespace {

fs::path scratch_dir(const std::string& name) {
    auto dir = fs::temp_directory_path() / ("qbd_corpus_" + name + "_" + std::to_string(::getpid()));
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string join(const std::vector<std::string>& v) {
    std::string out;
    for (const auto& s : v) out += (out.empty() ? "" : " ") + s;
    return out;
}

}  // namespace

TEST(Tokenize, DefaultRules) {
    const std::vector<std::string> want = {"the", "court", "order", "2019"};
    EXPECT_EQ(tokenize("The Court's order (2019)", TokenizerConfig{}), want);
}

TEST(Tokenize, EmptyInput) { EXPECT_TRUE(tokenize("", TokenizerConfig{}).empty()); }

TEST(Tokenize, MarkerAndStopwordRemoval) {
    TokenizerConfig c;
    c.remove_stopwords = true;
    c.stopwords = {"the"};
    EXPECT_EQ(tokenize("FRAGMENT_SUPPRESSED the act", c), std::vector<std::string>{"act"});
}

TEST(Tokenize, MarkerKeptWhenStrippingOff) {
    TokenizerConfig c;
    c.strip_suppressed_fragments = false;
    const auto t = tokenize("FRAGMENT_SUPPRESSED act", c);
    EXPECT_EQ(t, (std::vector<std::string>{"fragment", "suppressed", "act"}));
}

TEST(Tokenize, MinLengthAndCase) {
    TokenizerConfig c;
    c.min_token_length = 3;
    c.lowercase = false;
    EXPECT_EQ(tokenize("A Bc Def ghij", c), (std::vector<std::string>{"Def", "ghij"}));
}

TEST(Tokenize, InvalidConfig) {
    TokenizerConfig c;
    c.min_token_length = 0;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Tokenize, IdempotentOnJoinedOutput) {
    std::mt19937 gen(7);
    const std::string alphabet = "abcXYZ019 .,;'()-\n\tFRAGMENT_SUPPRESSED";
    TokenizerConfig c;
    for (int trial = 0; trial < 200; ++trial) {
        std::string text;
        const int len = static_cast<int>(gen() % 200);
        for (int i = 0; i < len; ++i) text.push_back(alphabet[gen() % alphabet.size()]);
        const auto once = tokenize(text, c);
        EXPECT_EQ(tokenize(join(once), c), once) << text;
    }
}

TEST(Tokenize, NoWhitespaceOrUppercaseInTokens) {
    for (const auto& t : tokenize("Mixed CASE words,\tand\nbreaks — déjà vu", TokenizerConfig{})) {
        EXPECT_FALSE(t.empty());
        for (unsigned char ch : t) {
            EXPECT_FALSE(std::isspace(ch));
            EXPECT_FALSE(std::isupper(ch));
        }
    }
}

TEST(SplitSentences, TwoSentences) {
    EXPECT_EQ(split_sentences("It was denied. The appeal follows."),
              (std::vector<std::string>{"It was denied.", "The appeal follows."}));
}

TEST(SplitSentences, AbbreviationGuard) { EXPECT_EQ(split_sentences("See Smith v. Jones. Next point.").size(), 2u); }

TEST(SplitSentences, NoTerminalPunctuation) {
    EXPECT_EQ(split_sentences("  no terminal punctuation here  "),
              std::vector<std::string>{"no terminal punctuation here"});
}

TEST(SplitSentences, InitialsAndNumbers) {
    const auto s = split_sentences("J. Smith wrote it. 2019 was the year! Was it? Yes.");
    EXPECT_EQ(s, (std::vector<std::string>{"J. Smith wrote it.", "2019 was the year!", "Was it?", "Yes."}));
}

TEST(SplitSentences, LowercaseContinuationDoesNotSplit) {
    EXPECT_EQ(split_sentences("Costs are fixed at 5.5 percent. and so on.").size(), 1u);
}

TEST(SplitSentences, ClosingQuoteStaysWithSentence) {
    EXPECT_EQ(split_sentences("He said \"no.\" Then left."),
              (std::vector<std::string>{"He said \"no.\"", "Then left."}));
}

TEST(SplitParagraphs, BlankLines) { EXPECT_EQ(split_paragraphs("A\n\nB"), (std::vector<std::string>{"A", "B"})); }

TEST(SplitParagraphs, MarkerSplit) {
    EXPECT_EQ(split_paragraphs("[1] First.\n[2] Second."), (std::vector<std::string>{"[1] First.", "[2] Second."}));
    EXPECT_EQ(split_paragraphs("[1] First.\n[2] Second.", false).size(), 1u);
}

TEST(SplitParagraphs, SingleParagraph) {
    EXPECT_EQ(split_paragraphs("one line\nanother line"), std::vector<std::string>{"one line another line"});
}

TEST(SplitParagraphs, NeverEmptyNorEmptySentences) {
    std::mt19937 gen(11);
    const std::string alphabet = "Ab. \n\n[1]?!x";
    for (int trial = 0; trial < 300; ++trial) {
        std::string text;
        const int len = static_cast<int>(gen() % 120);
        for (int i = 0; i < len; ++i) text.push_back(alphabet[gen() % alphabet.size()]);
        for (const auto& p : split_paragraphs(text)) {
            EXPECT_FALSE(p.empty());
            for (const auto& s : split_sentences(p)) EXPECT_FALSE(s.empty());
        }
    }
}

TEST(SplitSentences, CoversCleanedText) {
    const std::string text = "[1] The court. It held FRAGMENT_SUPPRESSED that.\n\n[2] Mr. Smith v. Jones applies! Fine.";
    const auto doc = make_document("x", text, TokenizerConfig{});
    auto strip = [](const std::string& s) {
        std::string out;
        for (char c : s)
            if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
        return out;
    };
    std::string sentences, paragraphs;
    for (const auto& s : doc.sentences) sentences += s;
    for (const auto& p : doc.paragraphs) paragraphs += p;
    const auto cleaned = strip(clean_text(text, TokenizerConfig{}));
    EXPECT_EQ(strip(sentences), cleaned);
    EXPECT_EQ(strip(paragraphs), cleaned);
}

TEST(LoadColiee, DirectMapping) {
    const auto dir = scratch_dir("direct");
    write_file_atomic(dir / "cases" / "q1.txt", "Query text. Second sentence.");
    write_file_atomic(dir / "cases" / "d1.txt", "First candidate.");
    write_file_atomic(dir / "cases" / "d2.txt", "Second candidate.");
    write_file_atomic(dir / "labels.json", R"({"q1.txt": ["d2.txt"]})");
    const auto [corpus, qrels] = load_coliee_layout(dir / "cases", dir / "labels.json");
    EXPECT_EQ(corpus.documents.size(), 3u);
    EXPECT_EQ(corpus.query_ids, std::vector<std::string>{"q1"});
    EXPECT_EQ(qrels.judgments.size(), 1u);
    EXPECT_EQ(qrels.relevant("q1"), std::set<std::string>{"d2"});
    EXPECT_EQ(corpus.at("q1").sentences.size(), 2u);
    EXPECT_EQ(corpus.candidates().documents.size(), 2u);
    EXPECT_NO_THROW(validate_qrels(corpus, qrels));
    fs::remove_all(dir);
}

TEST(LoadColiee, OrphanLabels) {
    const auto dir = scratch_dir("orphan");
    write_file_atomic(dir / "cases" / "q1.txt", "Query.");
    write_file_atomic(dir / "labels.json", R"({"q1.txt": ["missing.txt"]})");
    try {
        load_coliee_layout(dir / "cases", dir / "labels.json");
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        ASSERT_EQ(e.offenders().size(), 1u);
        EXPECT_EQ(e.offenders()[0], "missing.txt");
    }
    fs::remove_all(dir);
}

TEST(LoadColiee, MissingDirectoryNamesPath) {
    const auto dir = scratch_dir("missing");
    try {
        load_coliee_layout(dir / "nope", dir / "labels.json");
        FAIL() << "expected IngestionError";
    } catch (const IngestionError& e) {
        EXPECT_NE(e.path().find("nope"), std::string::npos);
    }
    fs::remove_all(dir);
}

TEST(LoadColiee, EnumerationOrderIndependent) {
    // same bytes written in two different creation orders
    const auto a = scratch_dir("order_a"), b = scratch_dir("order_b");
    const std::vector<std::pair<std::string, std::string>> files = {
        {"q1.txt", "Alpha beta. Gamma."}, {"d1.txt", "Delta."}, {"d2.txt", "Epsilon zeta."}, {"d3.txt", "Eta."}};
    for (const auto& [f, t] : files) write_file_atomic(a / "cases" / f, t);
    for (auto it = files.rbegin(); it != files.rend(); ++it) write_file_atomic(b / "cases" / it->first, it->second);
    write_file_atomic(a / "labels.json", R"({"q1.txt": ["d1.txt", "d3.txt"]})");
    write_file_atomic(b / "labels.json", R"({"q1.txt": ["d3.txt", "d1.txt"]})");
    const auto [ca, qa] = load_coliee_layout(a / "cases", a / "labels.json");
    const auto [cb, qb] = load_coliee_layout(b / "cases", b / "labels.json");
    ASSERT_EQ(ca.documents.size(), cb.documents.size());
    for (const auto& [id, doc] : ca.documents) {
        EXPECT_EQ(doc.tokens, cb.at(id).tokens);
        EXPECT_EQ(doc.sentences, cb.at(id).sentences);
    }
    EXPECT_EQ(qa.judgments, qb.judgments);
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST(LoadJsonl, QueriesAndQrels) {
    const auto dir = scratch_dir("jsonl");
    write_file_atomic(dir / "c.jsonl", "{\"id\":\"q\",\"text\":\"Query.\",\"query\":true}\n"
                                       "{\"id\":\"a\",\"text\":\"Doc a.\"}\n\n"
                                       "{\"id\":\"b\",\"text\":\"Doc b.\"}\n");
    write_file_atomic(dir / "qrels.txt", "q 0 a 1\nq 0 b 0\n");
    auto corpus = load_jsonl_corpus(dir / "c.jsonl");
    const auto qrels = load_trec_qrels(dir / "qrels.txt");
    EXPECT_EQ(corpus.documents.size(), 3u);
    EXPECT_EQ(corpus.query_ids, std::vector<std::string>{"q"});
    EXPECT_EQ(qrels.relevant("q"), std::set<std::string>{"a"});
    assign_queries(corpus, qrels);
    EXPECT_EQ(corpus.query_ids, std::vector<std::string>{"q"});
    EXPECT_EQ(parse_trec_qrels(format_trec_qrels(qrels)).judgments, qrels.judgments);
    fs::remove_all(dir);
}

TEST(LoadJsonl, DuplicateIdRejected) {
    const auto dir = scratch_dir("dup");
    write_file_atomic(dir / "c.jsonl", "{\"id\":\"a\",\"text\":\"x\"}\n{\"id\":\"a\",\"text\":\"y\"}\n");
    EXPECT_THROW(load_jsonl_corpus(dir / "c.jsonl"), ValidationError);
    fs::remove_all(dir);
}

TEST(Qrels, ValidationListsUnknownIds) {
    Corpus c;
    c.documents.emplace("q", make_document("q", "x", TokenizerConfig{}));
    Qrels q;
    q.judgments["q"] = {"ghost"};
    EXPECT_THROW(validate_qrels(c, q), ValidationError);
}

TEST(SplitLast, HoldsOutTail) {
    const std::vector<std::string> ids = {"a", "b", "c", "d"};
    const auto [train, val] = split_last(ids, 3);
    EXPECT_EQ(train, std::vector<std::string>{"a"});
    EXPECT_EQ(val, (std::vector<std::string>{"b", "c", "d"}));
    const auto [t2, v2] = split_last(ids, 10);
    EXPECT_TRUE(t2.empty());
    EXPECT_EQ(v2.size(), 4u);
}
