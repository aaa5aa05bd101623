#include <gtest/gtest.h>

#include <cmath>

#include "pcwi/lexicon.hpp"
#include "test_support.hpp"

using namespace pcwi;

namespace {

const char* kHeader = "word\tfrequency\tfamiliarity\tconcreteness\timageability\tvotes\n";

std::string small_pool() {
    return std::string(kHeader) +
           "cat\t120.5\t600\t610\t620\t0\n"
           "Dog\t98\t590\tNA\t600\t0\n"
           "ubiquitous\t2.1\t300\t250\t260\t6\n"
           "ephemeral\t1.4\tNA\t220\t240\t9\n"
           "house\t300\t620\t590\t610\t0\n";
}

}  // namespace

TEST(Ingest, NormalizedColumnsHaveZeroMeanUnitStd) {
    const Pool pool = ingest_pool_text(small_pool());
    ASSERT_EQ(pool.size(), 5u);
    ASSERT_EQ(pool.dim(), 5u);
    for (std::size_t j = 0; j < pool.dim(); ++j) {
        double sum = 0, sq = 0;
        for (const auto& e : pool.entries) sum += e.features[j];
        const double mean = sum / 5.0;
        for (const auto& e : pool.entries) sq += (e.features[j] - mean) * (e.features[j] - mean);
        EXPECT_LT(std::abs(mean), 1e-9);
        EXPECT_LT(std::abs(std::sqrt(sq / 5.0) - 1.0), 1e-9);
    }
}

TEST(Ingest, WordsLowercasedAndLengthsCounted) {
    const Pool pool = ingest_pool_text(small_pool());
    ASSERT_TRUE(pool.find("dog"));
    EXPECT_EQ(pool.raw[*pool.find("ubiquitous")].length, 10);
    EXPECT_EQ(pool.raw[*pool.find("cat")].votes, 0);
}

TEST(Ingest, MissingValueImputedToZeroScore) {
    const Pool pool = ingest_pool_text(small_pool());
    const auto& dog = pool.entries[*pool.find("dog")];
    EXPECT_NEAR(dog.features[3], 0.0, 1e-12);
    bool flagged = false;
    for (const auto& d : pool.diagnostics)
        if (d.kind == "imputed" && d.word == "dog" && d.column == "concreteness") flagged = true;
    EXPECT_TRUE(flagged);
}

TEST(Ingest, FeatureOrderAndLogFrequency) {
    RawLexiconRecord r;
    r.word = "x";
    r.length = 1;
    r.frequency = std::exp(2.0) - 1.0;
    const auto raw = canonical_features(r);
    EXPECT_NEAR(raw[0], 2.0, 1e-12);
    EXPECT_DOUBLE_EQ(raw[1], 1.0);
    EXPECT_TRUE(std::isnan(raw[2]));
}

TEST(Ingest, MalformedRowNamesLine) {
    const std::string text = std::string(kHeader) + "cat\t12\t600\t610\t620\t0\nbroken\t3\n";
    try {
        ingest_pool_text(text);
        FAIL() << "expected an ingest error";
    } catch (const IngestError& e) {
        EXPECT_EQ(e.line(), 3u);
    }
}

TEST(Ingest, RowErrors) {
    EXPECT_THROW(ingest_pool_text(std::string(kHeader) + "a\t0\t1\t1\t1\t0\nb\t2\t2\t2\t2\t0\n"), IngestError);
    EXPECT_THROW(ingest_pool_text(std::string(kHeader) + "a\t1\t1\t1\t1\t0\na\t2\t2\t2\t2\t0\n"), IngestError);
    EXPECT_THROW(ingest_pool_text(std::string(kHeader) + "a\t1\t1\t1\t1\t0\n"), IngestError);
    EXPECT_THROW(ingest_pool_text(std::string(kHeader) + "a\t1\t1\t1\t1\t21\nb\t2\t2\t2\t2\t0\n"), IngestError);
}

TEST(Ingest, IdenticalRowsRejected) {
    const std::string text = std::string(kHeader) + "ab\t5\t300\t300\t300\t0\ncd\t5\t300\t300\t300\t0\n";
    EXPECT_THROW(ingest_pool_text(text), IngestError);
}

TEST(Ingest, ConstantColumnDropped) {
    const std::string text = std::string(kHeader) +
                             "cat\t120\t600\t500\t620\t0\n"
                             "horse\t20\t500\t500\t600\t1\n"
                             "ox\t2\t300\t500\t200\t3\n";
    const Pool pool = ingest_pool_text(text);
    EXPECT_EQ(pool.dim(), 4u);
    EXPECT_EQ(pool.stats.feature_names,
              (std::vector<std::string>{"log_frequency", "length", "familiarity", "imageability"}));
}

TEST(Ingest, DeterministicAcrossRuns) {
    const Pool a = ingest_pool_text(small_pool());
    const Pool b = ingest_pool_text(small_pool());
    EXPECT_EQ(a.stats.content_hash, b.stats.content_hash);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(a.entries[i].features, b.entries[i].features);
}

TEST(Ingest, SaveAndLoadRoundTrip) {
    const Pool a = ingest_pool_text(small_pool());
    const std::string dir = test_support::make_temp_dir("ingest");
    save_ingested(a, dir);
    const Pool b = load_pool(dir);
    ASSERT_EQ(a.size(), b.size());
    EXPECT_EQ(a.stats.content_hash, b.stats.content_hash);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a.entries[i].word, b.entries[i].word);
        for (std::size_t j = 0; j < a.dim(); ++j) EXPECT_EQ(a.entries[i].features[j], b.entries[i].features[j]);
    }
}

TEST(Zscore, DirectArithmetic) {
    PoolStatistics s;
    s.mean = {1.0};
    s.stddev = {2.0};
    EXPECT_DOUBLE_EQ(zscore(std::vector<double>{3.0}, s)[0], 1.0);
    EXPECT_DOUBLE_EQ(zscore(std::vector<double>{1.0}, s)[0], 0.0);
    EXPECT_THROW(zscore(std::vector<double>{1.0, 2.0}, s), DimensionError);
}

TEST(SeedLabel, Binarization) {
    EXPECT_EQ(binarize_seed_label(0), 0);
    EXPECT_EQ(binarize_seed_label(1, 1), 1);
    EXPECT_EQ(binarize_seed_label(3, 5), 0);
    EXPECT_THROW(binarize_seed_label(-1), Error);
}

TEST(Graded, ParseAndArgmax) {
    const GradedLexicon g = parse_graded_lexicon("word\tA1\tA2\tB1\tB2\tC1\nhello\t10\t5\t0\t0\t0\nrare\t0\t0\t1\t1\t3\n");
    EXPECT_EQ(GradedLexicon::argmax_level(g.entries.at("hello")), CefrLevel::A1);
    EXPECT_EQ(GradedLexicon::argmax_level(g.entries.at("rare")), CefrLevel::C1);
    EXPECT_EQ(GradedLexicon::argmax_level({1, 1, 0, 0, 0}), CefrLevel::A1);
    EXPECT_THROW(parse_graded_lexicon("word\tA1\tA2\tB1\tB2\tC1\nnone\t0\t0\t0\t0\t0\n"), IngestError);
}
