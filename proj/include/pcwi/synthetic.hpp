#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pcwi/lexicon.hpp"

namespace pcwi {

// Parameters of the generated lexical world. Each word has a latent
// difficulty; frequency, length, ratings, corpus votes and graded-level
// frequencies are noisy functions of it.
struct SyntheticWorldConfig {
    std::uint64_t seed = 20240611;
    std::size_t vocabulary_size = 12000;
    std::size_t pool_size = 7500;
    std::size_t graded_size = 10000;
    std::size_t seed_size = 150;
    std::size_t test_size = 22;
};

struct SyntheticWord {
    RawLexiconRecord record;
    double difficulty = 0.0;
    std::array<double, 5> graded{};   // A1..C1 frequencies, all zero if not graded
    bool graded_present = false;
    bool in_pool = false;
};

struct SyntheticWorld {
    std::vector<SyntheticWord> words;   // whole vocabulary
    std::vector<std::size_t> pool;      // indices into words
    std::vector<std::size_t> seed;      // subset of pool
    std::vector<std::size_t> test;      // subset of pool, disjoint from seed
    std::vector<std::string> test_levels;

    // pool.tsv, lexicon.tsv, graded.tsv, seed.tsv, test_words.tsv
    void write(const std::string& dir) const;
};

SyntheticWorld generate_world(const SyntheticWorldConfig& config);

}  // namespace pcwi
