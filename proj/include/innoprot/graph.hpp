#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <set>
#include <span>
#include <utility>
#include <vector>

namespace innoprot {

using NodeId = std::size_t;

/// Directed communication topology. Every node is its own neighbor.
///
/// out_neighbors(i) are the nodes that receive from i; in_neighbors(i) are
/// the nodes i receives from (the set whose states enter node i's update).
class DirectedGraph {
public:
    DirectedGraph() = default;

    /// Builds a graph from directed (from, to) pairs; self-loops are added for
    /// every node. Throws std::invalid_argument on n == 0 or out-of-range ids.
    DirectedGraph(std::size_t n, std::span<const std::pair<NodeId, NodeId>> edges);

    std::size_t size() const { return out_.size(); }
    const std::set<NodeId>& out_neighbors(NodeId i) const { return out_.at(i); }
    const std::set<NodeId>& in_neighbors(NodeId i) const { return in_.at(i); }
    bool has_edge(NodeId from, NodeId to) const { return out_.at(from).contains(to); }

    /// True when every edge (i, j) has its reverse (j, i).
    bool is_symmetric() const;

    /// Directed edges excluding self-loops, in (from, to) lexicographic order.
    std::vector<std::pair<NodeId, NodeId>> edges() const;

    friend bool operator==(const DirectedGraph&, const DirectedGraph&) = default;

private:
    std::vector<std::set<NodeId>> out_;
    std::vector<std::set<NodeId>> in_;
};

/// Dense row-major n x n consensus weights.
class WeightMatrix {
public:
    WeightMatrix() = default;
    explicit WeightMatrix(std::size_t n) : n_(n), w_(n * n, 0.0) {}

    std::size_t size() const { return n_; }
    double operator()(NodeId i, NodeId j) const { return w_[i * n_ + j]; }
    double& operator()(NodeId i, NodeId j) { return w_[i * n_ + j]; }
    std::span<const double> row(NodeId i) const { return {w_.data() + i * n_, n_}; }

    double max_row_sum_error() const;
    double max_col_sum_error() const;

private:
    std::size_t n_ = 0;
    std::vector<double> w_;
};

/// Symmetric ring backbone, plus each remaining undirected pair with
/// probability extra_edge_prob, plus self-loops. Deterministic in the seed.
DirectedGraph generate_random_strongly_connected(std::size_t n, double extra_edge_prob,
                                                 std::uint64_t seed);

/// Metropolis-Hastings weights w_ij = 1 / (1 + max(deg_i, deg_j)) on edges,
/// diagonal takes the remainder. Requires a symmetric edge set.
WeightMatrix metropolis_weights(const DirectedGraph& g);

bool is_strongly_connected(const DirectedGraph& g);

/// "from,to" lines with a header; self-loops omitted.
void write_edge_list(std::ostream& os, const DirectedGraph& g);
/// One CSV row per matrix row, full round-trip precision.
void write_weights(std::ostream& os, const WeightMatrix& w);

}  // namespace innoprot
