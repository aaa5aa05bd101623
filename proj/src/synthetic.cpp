#include "pcwi/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <unordered_set>

namespace pcwi {

namespace {

constexpr const char* kOnsets[] = {"b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "r", "s", "t",
                                   "v", "w", "z", "br", "cl", "dr", "gr", "pl", "st", "tr", "sh", "ch", "th"};
constexpr const char* kVowels[] = {"a", "e", "i", "o", "u", "ai", "ea", "ou", "io"};
constexpr const char* kCodas[] = {"", "", "", "n", "r", "s", "t", "l", "m", "nd", "st", "ck"};

template <std::size_t N>
const char* pick(Rng& rng, const char* const (&table)[N]) {
    return table[rng.below(N)];
}

std::string make_word(Rng& rng, int syllables) {
    std::string w;
    for (int s = 0; s < syllables; ++s) {
        w += pick(rng, kOnsets);
        w += pick(rng, kVowels);
        if (s + 1 == syllables || rng.uniform() < 0.3) w += pick(rng, kCodas);
    }
    return w;
}

int binomial(Rng& rng, int n, double p) {
    int k = 0;
    for (int i = 0; i < n; ++i) k += rng.uniform() < p ? 1 : 0;
    return k;
}

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::string opt_cell(const std::optional<double>& v, int digits) { return v ? fixed(*v, digits) : "NA"; }

// CEFR band of a latent difficulty, A1..C2 as 0..5.
int level_of(double difficulty) {
    const double edges[] = {-1.3, -0.6, 0.0, 0.6, 1.3};
    int l = 0;
    while (l < 5 && difficulty >= edges[l]) ++l;
    return l;
}

constexpr const char* kLevelNames[] = {"A1", "A2", "B1", "B2", "C1", "C2"};

}  // namespace

SyntheticWorld generate_world(const SyntheticWorldConfig& config) {
    if (config.pool_size > config.vocabulary_size || config.graded_size > config.vocabulary_size)
        throw Error("synthetic world: pool and graded sizes must not exceed the vocabulary");
    if (config.seed_size + config.test_size > config.pool_size)
        throw Error("synthetic world: seed and test sets do not fit in the pool");

    SyntheticWorld world;
    Rng rng(mix_seed(config.seed, "words"));
    std::unordered_set<std::string> used;
    world.words.reserve(config.vocabulary_size);
    while (world.words.size() < config.vocabulary_size) {
        SyntheticWord sw;
        const double u = rng.normal();
        const int syllables = std::clamp(static_cast<int>(std::lround(1.7 + 0.7 * u + 0.7 * rng.normal())), 1, 6);
        std::string word = make_word(rng, syllables);
        if (!used.insert(word).second) continue;
        sw.difficulty = u;
        RawLexiconRecord& r = sw.record;
        r.word = std::move(word);
        r.length = static_cast<int>(r.word.size());
        r.frequency = std::exp(2.5 - 1.7 * u + 0.45 * rng.normal());
        // Rating norms cover common words better than rare ones.
        if (rng.uniform() >= sigmoid(-0.8 + u)) r.familiarity = std::clamp(500.0 - 70.0 * u + 45.0 * rng.normal(), 100.0, 700.0);
        if (rng.uniform() >= sigmoid(-0.8 + u)) {
            const double concrete = 420.0 - 25.0 * u + 100.0 * rng.normal();
            r.concreteness = std::clamp(concrete, 100.0, 700.0);
            r.imageability = std::clamp(0.7 * concrete + 140.0 - 20.0 * u + 45.0 * rng.normal(), 100.0, 700.0);
        }
        world.words.push_back(std::move(sw));
    }

    // Graded-level frequencies peak at the word's level.
    Rng graded_rng(mix_seed(config.seed, "graded"));
    std::vector<std::size_t> order(world.words.size());
    std::iota(order.begin(), order.end(), 0);
    graded_rng.shuffle(order);
    for (std::size_t i = 0; i < config.graded_size; ++i) {
        SyntheticWord& sw = world.words[order[i]];
        const int level = std::min(level_of(sw.difficulty + 0.35 * graded_rng.normal()), 4);
        const double base = 8.0 * std::pow(sw.record.frequency, 0.6);
        for (int l = 0; l < 5; ++l) {
            const double decay = l < level ? 1.6 * (level - l) : 0.5 * (l - level);
            const double f = base * std::exp(-decay + 0.25 * graded_rng.normal());
            sw.graded[static_cast<std::size_t>(l)] = l + 1 < level ? 0.0 : std::round(f * 100.0) / 100.0;
        }
        if (sw.graded[static_cast<std::size_t>(level)] <= 0.0) sw.graded[static_cast<std::size_t>(level)] = 0.01;
        sw.graded_present = true;
    }

    // Pool words carry corpus votes: complex by at least one of 20 readers.
    Rng pool_rng(mix_seed(config.seed, "pool"));
    std::iota(order.begin(), order.end(), 0);
    pool_rng.shuffle(order);
    world.pool.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(config.pool_size));
    std::sort(world.pool.begin(), world.pool.end());
    for (std::size_t i : world.pool) {
        SyntheticWord& sw = world.words[i];
        sw.in_pool = true;
        sw.record.votes = binomial(pool_rng, 20, sigmoid(3.0 * sw.difficulty - 4.6));
    }

    // Test words sit at evenly spaced difficulty quantiles of the pool.
    std::vector<std::size_t> by_difficulty = world.pool;
    std::sort(by_difficulty.begin(), by_difficulty.end(), [&](std::size_t a, std::size_t b) {
        return world.words[a].difficulty < world.words[b].difficulty;
    });
    std::unordered_set<std::size_t> taken;
    for (std::size_t t = 0; t < config.test_size; ++t) {
        std::size_t pos = static_cast<std::size_t>((static_cast<double>(t) + 0.5) / static_cast<double>(config.test_size) *
                                                   static_cast<double>(by_difficulty.size()));
        while (taken.count(by_difficulty[pos])) ++pos;
        taken.insert(by_difficulty[pos]);
        world.test.push_back(by_difficulty[pos]);
        world.test_levels.emplace_back(kLevelNames[level_of(world.words[by_difficulty[pos]].difficulty)]);
    }

    Rng seed_rng(mix_seed(config.seed, "seed"));
    std::vector<std::size_t> candidates;
    for (std::size_t i : world.pool)
        if (!taken.count(i)) candidates.push_back(i);
    seed_rng.shuffle(candidates);
    world.seed.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(config.seed_size));
    std::sort(world.seed.begin(), world.seed.end());
    return world;
}

void SyntheticWorld::write(const std::string& dir) const {
    std::filesystem::create_directories(dir);
    auto record_line = [](const RawLexiconRecord& r, bool with_votes) {
        std::string line = r.word + '\t' + fixed(r.frequency, 4) + '\t' + opt_cell(r.familiarity, 0) + '\t' +
                           opt_cell(r.concreteness, 0) + '\t' + opt_cell(r.imageability, 0);
        if (with_votes) line += '\t' + (r.votes ? std::to_string(*r.votes) : std::string("NA"));
        return line + '\n';
    };

    std::string pool_tsv = "word\tfrequency\tfamiliarity\tconcreteness\timageability\tvotes\n";
    for (std::size_t i : pool) pool_tsv += record_line(words[i].record, true);
    write_file(dir + "/pool.tsv", pool_tsv);

    std::string lexicon_tsv = "word\tfrequency\tfamiliarity\tconcreteness\timageability\n";
    for (const auto& w : words) lexicon_tsv += record_line(w.record, false);
    write_file(dir + "/lexicon.tsv", lexicon_tsv);

    std::string graded_tsv = "word\tA1\tA2\tB1\tB2\tC1\n";
    for (const auto& w : words) {
        if (!w.graded_present) continue;
        graded_tsv += w.record.word;
        for (double f : w.graded) graded_tsv += '\t' + fixed(f, 2);
        graded_tsv += '\n';
    }
    write_file(dir + "/graded.tsv", graded_tsv);

    std::string seed_tsv = "word\tvotes\n";
    for (std::size_t i : seed) seed_tsv += words[i].record.word + '\t' + std::to_string(*words[i].record.votes) + '\n';
    write_file(dir + "/seed.tsv", seed_tsv);

    std::string test_tsv = "word\tlevel\n";
    for (std::size_t t = 0; t < test.size(); ++t) test_tsv += words[test[t]].record.word + '\t' + test_levels[t] + '\n';
    write_file(dir + "/test_words.tsv", test_tsv);
}

}  // namespace pcwi
