#include "pcwi/clustering.hpp"

#include <algorithm>
#include <filesystem>
#include <limits>
#include <numeric>
#include <sstream>

namespace pcwi {

std::string_view to_string(PropagationScope s) {
    return s == PropagationScope::same_cluster ? "same_cluster" : "whole_pool";
}

PropagationScope scope_from_string(std::string_view s) {
    if (s == "same_cluster") return PropagationScope::same_cluster;
    if (s == "whole_pool") return PropagationScope::whole_pool;
    throw Error("unknown propagation scope: " + std::string(s));
}

namespace {

struct Node {
    std::vector<double> centroid;
    double size = 0;
    std::string key;   // smallest member word
    std::size_t leaf;  // any member, for the union-find cut
};

struct Merge {
    double cost;
    std::size_t order;
    std::size_t leaf_a, leaf_b;
};

double ward_cost(const Node& a, const Node& b) {
    return (a.size * b.size) / (a.size + b.size) * squared_distance(a.centroid, b.centroid);
}

struct DisjointSet {
    std::vector<std::size_t> parent;
    explicit DisjointSet(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

ClusterIndex build_clusters(std::span<const WordEntry> pool, int k, const std::string& pool_hash) {
    if (k < 2) throw Error("k must be at least 2");
    const std::size_t n = pool.size();
    if (static_cast<std::size_t>(k) > n) throw Error("k exceeds pool size");
    for (const auto& e : pool)
        for (double v : e.features)
            if (!std::isfinite(v)) throw Error("non-finite feature for '" + e.word + "'");

    // Nearest-neighbour chain. Ward linkage is reducible, so the chain
    // yields the same hierarchy as greedy closest-pair merging.
    std::vector<Node> nodes;
    nodes.reserve(2 * n);
    std::vector<std::size_t> active;
    active.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        nodes.push_back({pool[i].features, 1.0, pool[i].word, i});
        active.push_back(i);
    }
    std::vector<std::size_t> position(2 * n, SIZE_MAX);  // node -> slot in `active`
    for (std::size_t i = 0; i < n; ++i) position[i] = i;

    auto deactivate = [&](std::size_t node) {
        const std::size_t slot = position[node];
        const std::size_t last = active.back();
        active[slot] = last;
        position[last] = slot;
        active.pop_back();
        position[node] = SIZE_MAX;
    };

    std::vector<Merge> merges;
    merges.reserve(n);
    std::vector<std::size_t> chain;
    while (active.size() > 1) {
        if (chain.empty()) chain.push_back(active.front());
        const std::size_t a = chain.back();
        const std::size_t prev = chain.size() >= 2 ? chain[chain.size() - 2] : SIZE_MAX;

        std::size_t best = SIZE_MAX;
        double best_cost = std::numeric_limits<double>::infinity();
        for (std::size_t c : active) {
            if (c == a) continue;
            const double cost = ward_cost(nodes[a], nodes[c]);
            bool better = cost < best_cost;
            if (!better && cost == best_cost) {
                // The chain predecessor wins ties so the chain terminates.
                if (best != prev)
                    better = c == prev || nodes[c].key < nodes[best].key;
            }
            if (better) {
                best = c;
                best_cost = cost;
            }
        }

        if (best == prev) {
            chain.pop_back();
            chain.pop_back();
            Node merged;
            const Node& x = nodes[a];
            const Node& y = nodes[best];
            merged.size = x.size + y.size;
            merged.centroid.resize(x.centroid.size());
            for (std::size_t j = 0; j < merged.centroid.size(); ++j)
                merged.centroid[j] = (x.size * x.centroid[j] + y.size * y.centroid[j]) / merged.size;
            merged.key = std::min(x.key, y.key);
            merged.leaf = std::min(x.leaf, y.leaf);
            merges.push_back({best_cost, merges.size(), x.leaf, y.leaf});
            deactivate(a);
            deactivate(best);
            nodes.push_back(std::move(merged));
            const std::size_t id = nodes.size() - 1;
            position[id] = active.size();
            active.push_back(id);
        } else {
            chain.push_back(best);
        }
    }

    std::stable_sort(merges.begin(), merges.end(),
                     [](const Merge& l, const Merge& r) { return l.cost < r.cost; });
    DisjointSet ds(n);
    for (std::size_t i = 0; i < n - static_cast<std::size_t>(k); ++i) ds.unite(merges[i].leaf_a, merges[i].leaf_b);

    ClusterIndex idx;
    idx.k = k;
    idx.pool_hash = pool_hash;
    idx.words.reserve(n);
    idx.assignment.assign(n, -1);
    std::vector<int> root_to_id(n, -1);
    for (std::size_t i = 0; i < n; ++i) {
        idx.words.push_back(pool[i].word);
        const std::size_t root = ds.find(i);
        if (root_to_id[root] < 0) {
            root_to_id[root] = static_cast<int>(idx.members.size());
            idx.members.emplace_back();
        }
        idx.assignment[i] = root_to_id[root];
        idx.members[static_cast<std::size_t>(root_to_id[root])].push_back(i);
    }
    return idx;
}

void assign_clusters(Pool& pool, const ClusterIndex& index) {
    if (index.pool_hash != pool.stats.content_hash)
        throw Error("cluster index was built for a different pool (hash " + index.pool_hash + ")");
    if (index.words.size() != pool.size()) throw Error("cluster index size does not match pool");
    for (std::size_t i = 0; i < pool.size(); ++i) {
        if (index.words[i] != pool.entries[i].word) throw Error("cluster index word order does not match pool");
        pool.entries[i].cluster_id = index.assignment[i];
    }
}

std::string serialize_clusters(const ClusterIndex& index) {
    std::ostringstream out;
    out << "#pcwi-clusters\n";
    out << "format_version\t" << kClusterFormatVersion << '\n';
    out << "pool_hash\t" << index.pool_hash << '\n';
    out << "k\t" << index.k << '\n';
    out << "linkage\t" << index.linkage << '\n';
    out << "n\t" << index.words.size() << '\n';
    out << "word\tcluster_id\n";
    for (std::size_t i = 0; i < index.words.size(); ++i) out << index.words[i] << '\t' << index.assignment[i] << '\n';
    return out.str();
}

ClusterIndex parse_clusters(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    auto next = [&]() -> std::vector<std::string> {
        if (!std::getline(in, line)) throw IngestError(line_no, "truncated cluster file");
        ++line_no;
        return split(line, '\t');
    };
    if (!std::getline(in, line) || line != "#pcwi-clusters") throw IngestError(1, "not a cluster cache file");
    ++line_no;
    auto header_field = [&](std::string_view name) {
        auto f = next();
        if (f.size() != 2 || f[0] != name) throw IngestError(line_no, "expected header field " + std::string(name));
        return f[1];
    };
    const int version = std::stoi(header_field("format_version"));
    if (version != kClusterFormatVersion) throw IngestError(line_no, "unsupported cluster format version");
    ClusterIndex idx;
    idx.pool_hash = header_field("pool_hash");
    idx.k = std::stoi(header_field("k"));
    idx.linkage = header_field("linkage");
    const std::size_t n = std::stoul(header_field("n"));
    next();  // column header
    idx.words.reserve(n);
    idx.members.resize(static_cast<std::size_t>(idx.k));
    for (std::size_t i = 0; i < n; ++i) {
        auto f = next();
        if (f.size() != 2) throw IngestError(line_no, "expected word<TAB>cluster_id");
        const int c = std::stoi(f[1]);
        if (c < 0 || c >= idx.k) throw IngestError(line_no, "cluster id out of range");
        idx.words.push_back(f[0]);
        idx.assignment.push_back(c);
        idx.members[static_cast<std::size_t>(c)].push_back(i);
    }
    for (const auto& m : idx.members)
        if (m.empty()) throw IngestError(0, "cluster file contains an empty cluster");
    return idx;
}

ClusterIndex load_clusters(const std::string& path, const Pool& pool) {
    ClusterIndex idx = parse_clusters(read_file(path));
    if (idx.pool_hash != pool.stats.content_hash)
        throw Error("cluster cache " + path + " was built for a different pool");
    return idx;
}

ClusterIndex load_or_build_clusters(const Pool& pool, int k, const std::string& cache_path, bool* cache_hit) {
    if (cache_hit) *cache_hit = false;
    if (!cache_path.empty() && std::filesystem::exists(cache_path)) {
        try {
            ClusterIndex idx = parse_clusters(read_file(cache_path));
            if (idx.pool_hash == pool.stats.content_hash && idx.k == k && idx.linkage == "ward" &&
                idx.words.size() == pool.size()) {
                if (cache_hit) *cache_hit = true;
                return idx;
            }
        } catch (const IngestError&) {
            // stale or foreign file; rebuild below
        }
    }
    ClusterIndex idx = build_clusters(pool.entries, k, pool.stats.content_hash);
    if (!cache_path.empty()) write_file(cache_path, serialize_clusters(idx));
    return idx;
}

std::vector<std::size_t> nearest_in_pool(const WordEntry& anchor, std::span<const WordEntry> pool, std::size_t m,
                                         PropagationScope scope, const std::function<bool(std::size_t)>& eligible) {
    auto out = nearest_neighbours(anchor, pool, m, scope, eligible);
    if (out.empty()) throw Error("nearest_in_pool: empty scope for '" + anchor.word + "'");
    return out;
}

std::vector<std::size_t> nearest_neighbours(const WordEntry& anchor, std::span<const WordEntry> pool, std::size_t m,
                                            PropagationScope scope, const std::function<bool(std::size_t)>& eligible) {
    if (m < 1) throw Error("nearest_in_pool: m must be >= 1");
    if (scope == PropagationScope::same_cluster && anchor.cluster_id < 0)
        throw Error("nearest_in_pool: anchor '" + anchor.word + "' has no cluster");

    struct Candidate {
        double dist;
        std::size_t index;
    };
    std::vector<Candidate> cands;
    for (std::size_t i = 0; i < pool.size(); ++i) {
        const WordEntry& e = pool[i];
        if (e.word == anchor.word) continue;
        if (scope == PropagationScope::same_cluster && e.cluster_id != anchor.cluster_id) continue;
        if (eligible && !eligible(i)) continue;
        if (e.features.size() != anchor.features.size()) throw DimensionError("nearest_in_pool: dimension mismatch");
        cands.push_back({squared_distance(anchor.features, e.features), i});
    }

    auto less = [&](const Candidate& a, const Candidate& b) {
        if (a.dist != b.dist) return a.dist < b.dist;
        return pool[a.index].word < pool[b.index].word;
    };
    const std::size_t take = std::min(m, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(take), cands.end(), less);
    std::vector<std::size_t> out(take);
    for (std::size_t i = 0; i < take; ++i) out[i] = cands[i].index;
    return out;
}

ClusterDiagnostics cluster_diagnostics(const ClusterIndex& index, const GradedLexicon& graded,
                                       const std::map<std::string, int>& votes) {
    ClusterDiagnostics d;
    d.clusters.resize(index.members.size());
    std::vector<std::size_t> vote_sum(index.members.size(), 0);
    for (std::size_t c = 0; c < index.members.size(); ++c) {
        ClusterStats& s = d.clusters[c];
        s.cluster_id = static_cast<int>(c);
        s.size = index.members[c].size();
        for (std::size_t i : index.members[c]) {
            const std::string& w = index.words[i];
            if (auto g = graded.entries.find(w); g != graded.entries.end()) {
                ++s.graded_count;
                for (std::size_t l = 0; l < 5; ++l) s.mean_level_frequency[l] += g->second[l];
            } else {
                ++d.missing_graded;
            }
            if (auto v = votes.find(w); v != votes.end()) {
                ++s.vote_count;
                vote_sum[c] += static_cast<std::size_t>(v->second);
                if (v->second > 10) ++s.votes_clipped;
                ++s.vote_histogram[static_cast<std::size_t>(std::clamp(v->second, 0, 10))];
            } else {
                ++d.missing_votes;
            }
        }
        if (s.graded_count)
            for (auto& f : s.mean_level_frequency) f /= static_cast<double>(s.graded_count);
        if (s.vote_count) s.mean_votes = static_cast<double>(vote_sum[c]) / static_cast<double>(s.vote_count);
        d.graded_overlap += s.graded_count;
    }
    std::size_t voted = 0;
    for (const auto& s : d.clusters) voted += s.vote_count;
    d.empty_intersection = d.graded_overlap == 0 || voted == 0;
    return d;
}

std::string level_frequency_csv(const ClusterDiagnostics& d) {
    std::string out = "cluster,size,graded_count,A1,A2,B1,B2,C1\n";
    for (const auto& s : d.clusters) {
        out += std::to_string(s.cluster_id) + ',' + std::to_string(s.size) + ',' + std::to_string(s.graded_count);
        for (double f : s.mean_level_frequency) out += ',' + format_double(f);
        out += '\n';
    }
    return out;
}

std::string vote_histogram_csv(const ClusterDiagnostics& d) {
    std::string out = "cluster,n,mean_votes";
    for (int v = 0; v <= 10; ++v) out += ",votes_" + std::to_string(v);
    out += '\n';
    for (const auto& s : d.clusters) {
        out += std::to_string(s.cluster_id) + ',' + std::to_string(s.vote_count) + ',' + format_double(s.mean_votes);
        for (std::size_t c : s.vote_histogram) out += ',' + std::to_string(c);
        out += '\n';
    }
    return out;
}

}  // namespace pcwi
