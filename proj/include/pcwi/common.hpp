#pragma once

#include <cstdint>
#include <cmath>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace pcwi {

// Base for every recoverable failure raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input file. line == 0 when the error is not tied to a line.
class IngestError : public Error {
public:
    IngestError(std::size_t line, const std::string& message)
        : Error(line ? "line " + std::to_string(line) + ": " + message : message),
          line_(line) {}
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class DimensionError : public Error {
public:
    using Error::Error;
};

// Seeded generator with distributions implemented here rather than via
// <random> distributions, whose output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t n);

    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// FNV-1a 64 bit, rendered as 16 lowercase hex digits.
std::string content_digest(std::string_view bytes);

// Derive an independent seed from a base seed and a stream label.
std::uint64_t mix_seed(std::uint64_t seed, std::string_view stream);

// Deterministic uniform in [0,1) for (seed, key); order independent.
double hash_uniform(std::uint64_t seed, std::string_view key);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view contents);

std::vector<std::string> split(std::string_view line, char sep);
std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

double sigmoid(double z);
// log(1 + exp(z)) without overflow.
double softplus(double z);

double dot(std::span<const double> a, std::span<const double> b);
double squared_distance(std::span<const double> a, std::span<const double> b);

// Tab-separated file with a header row. Lines are numbered from 1 (the header).
struct TsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;

    // -1 when absent.
    int column(std::string_view name) const;
};

TsvTable parse_tsv(std::string_view text);

}  // namespace pcwi
