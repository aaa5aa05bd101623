#pragma once

#include <array>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pcwi/lexicon.hpp"

namespace pcwi {

enum class PropagationScope { same_cluster, whole_pool };

std::string_view to_string(PropagationScope s);
PropagationScope scope_from_string(std::string_view s);

inline constexpr int kClusterFormatVersion = 1;

// Partition of a pool into k clusters. Cluster ids are numbered in order of
// first appearance in pool order; member lists follow pool order.
struct ClusterIndex {
    int k = 0;
    std::string linkage = "ward";
    std::string pool_hash;
    std::vector<std::string> words;      // pool order
    std::vector<int> assignment;         // parallel to words
    std::vector<std::vector<std::size_t>> members;

    int cluster_of(std::size_t pool_index) const { return assignment.at(pool_index); }
};

// Bottom-up Ward agglomeration on Euclidean distance, cut at k clusters.
ClusterIndex build_clusters(std::span<const WordEntry> pool, int k, const std::string& pool_hash);

// Writes the cluster ids into the pool entries; throws if the index belongs
// to a different pool.
void assign_clusters(Pool& pool, const ClusterIndex& index);

std::string serialize_clusters(const ClusterIndex& index);
ClusterIndex parse_clusters(std::string_view text);

// Loads a cached index if it exists and matches (pool hash, k, linkage);
// otherwise builds and writes it. `cache_hit` reports which happened.
ClusterIndex load_or_build_clusters(const Pool& pool, int k, const std::string& cache_path, bool* cache_hit = nullptr);
ClusterIndex load_clusters(const std::string& path, const Pool& pool);

// As nearest_in_pool, but an empty scope yields an empty list.
std::vector<std::size_t> nearest_neighbours(const WordEntry& anchor, std::span<const WordEntry> pool, std::size_t m,
                                            PropagationScope scope,
                                            const std::function<bool(std::size_t)>& eligible = {});

// The m words closest to `anchor` (anchor excluded by word), ascending by
// distance with lexicographic tie-break. Candidates failing `eligible` are
// skipped. Returns pool indices.
std::vector<std::size_t> nearest_in_pool(const WordEntry& anchor, std::span<const WordEntry> pool, std::size_t m,
                                         PropagationScope scope,
                                         const std::function<bool(std::size_t)>& eligible = {});

struct ClusterStats {
    int cluster_id = 0;
    std::size_t size = 0;
    std::size_t graded_count = 0;
    std::array<double, 5> mean_level_frequency{};
    std::size_t vote_count = 0;
    std::array<std::size_t, 11> vote_histogram{};   // votes 0..10; larger counts land in the last bin
    std::size_t votes_clipped = 0;
    double mean_votes = 0.0;
};

struct ClusterDiagnostics {
    std::vector<ClusterStats> clusters;
    std::size_t graded_overlap = 0;
    std::size_t missing_graded = 0;
    std::size_t missing_votes = 0;
    bool empty_intersection = false;
};

ClusterDiagnostics cluster_diagnostics(const ClusterIndex& index, const GradedLexicon& graded,
                                       const std::map<std::string, int>& votes);

// CSV shaped for plotting level frequencies per cluster and vote densities.
std::string level_frequency_csv(const ClusterDiagnostics& d);
std::string vote_histogram_csv(const ClusterDiagnostics& d);

}  // namespace pcwi
