#include "innoprot/graph.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <ostream>
#include <queue>
#include <random>
#include <stdexcept>

namespace innoprot {

DirectedGraph::DirectedGraph(std::size_t n, std::span<const std::pair<NodeId, NodeId>> edges)
    : out_(n), in_(n) {
    if (n == 0) throw std::invalid_argument("graph needs at least one node");
    for (NodeId i = 0; i < n; ++i) {
        out_[i].insert(i);
        in_[i].insert(i);
    }
    for (const auto& [from, to] : edges) {
        if (from >= n || to >= n) {
            throw std::invalid_argument(fmt::format("edge ({}, {}) out of range for n={}", from, to, n));
        }
        out_[from].insert(to);
        in_[to].insert(from);
    }
}

bool DirectedGraph::is_symmetric() const {
    for (NodeId i = 0; i < size(); ++i) {
        for (NodeId j : out_[i]) {
            if (!out_[j].contains(i)) return false;
        }
    }
    return true;
}

std::vector<std::pair<NodeId, NodeId>> DirectedGraph::edges() const {
    std::vector<std::pair<NodeId, NodeId>> out;
    for (NodeId i = 0; i < size(); ++i) {
        for (NodeId j : out_[i]) {
            if (j != i) out.emplace_back(i, j);
        }
    }
    return out;
}

double WeightMatrix::max_row_sum_error() const {
    double worst = 0.0;
    for (NodeId i = 0; i < n_; ++i) {
        double s = 0.0;
        for (NodeId j = 0; j < n_; ++j) s += (*this)(i, j);
        worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
}

double WeightMatrix::max_col_sum_error() const {
    double worst = 0.0;
    for (NodeId j = 0; j < n_; ++j) {
        double s = 0.0;
        for (NodeId i = 0; i < n_; ++i) s += (*this)(i, j);
        worst = std::max(worst, std::abs(s - 1.0));
    }
    return worst;
}

DirectedGraph generate_random_strongly_connected(std::size_t n, double extra_edge_prob,
                                                 std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("random graph needs n >= 2");
    if (!(extra_edge_prob >= 0.0 && extra_edge_prob <= 1.0)) {
        throw std::invalid_argument("extra_edge_prob must lie in [0, 1]");
    }
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution coin(extra_edge_prob);

    std::vector<std::pair<NodeId, NodeId>> edges;
    auto link = [&](NodeId a, NodeId b) {
        edges.emplace_back(a, b);
        edges.emplace_back(b, a);
    };
    for (NodeId i = 0; i < n; ++i) link(i, (i + 1) % n);
    for (NodeId i = 0; i < n; ++i) {
        for (NodeId j = i + 2; j < n; ++j) {
            if (i == 0 && j == n - 1) continue;  // ring edge
            if (coin(rng)) link(i, j);
        }
    }
    return DirectedGraph(n, edges);
}

WeightMatrix metropolis_weights(const DirectedGraph& g) {
    if (!g.is_symmetric()) {
        throw std::invalid_argument("Metropolis weights need a symmetric edge set");
    }
    const std::size_t n = g.size();
    std::vector<std::size_t> degree(n);
    for (NodeId i = 0; i < n; ++i) degree[i] = g.out_neighbors(i).size() - 1;

    WeightMatrix w(n);
    for (NodeId i = 0; i < n; ++i) {
        double off = 0.0;
        for (NodeId j : g.in_neighbors(i)) {
            if (j == i) continue;
            w(i, j) = 1.0 / (1.0 + static_cast<double>(std::max(degree[i], degree[j])));
            off += w(i, j);
        }
        w(i, i) = 1.0 - off;
    }
    return w;
}

namespace {

std::size_t reachable_count(const DirectedGraph& g, NodeId start, bool forward) {
    std::vector<bool> seen(g.size(), false);
    std::queue<NodeId> frontier;
    frontier.push(start);
    seen[start] = true;
    std::size_t count = 1;
    while (!frontier.empty()) {
        const NodeId u = frontier.front();
        frontier.pop();
        for (NodeId v : forward ? g.out_neighbors(u) : g.in_neighbors(u)) {
            if (!seen[v]) {
                seen[v] = true;
                ++count;
                frontier.push(v);
            }
        }
    }
    return count;
}

}  // namespace

bool is_strongly_connected(const DirectedGraph& g) {
    if (g.size() == 0) return false;
    // Node 0 reaches everyone and everyone reaches node 0.
    return reachable_count(g, 0, true) == g.size() && reachable_count(g, 0, false) == g.size();
}

void write_edge_list(std::ostream& os, const DirectedGraph& g) {
    os << "from,to\n";
    for (const auto& [from, to] : g.edges()) os << from << ',' << to << '\n';
}

void write_weights(std::ostream& os, const WeightMatrix& w) {
    for (NodeId i = 0; i < w.size(); ++i) {
        for (NodeId j = 0; j < w.size(); ++j) {
            if (j) os << ',';
            os << fmt::format("{:.17g}", w(i, j));
        }
        os << '\n';
    }
}

}  // namespace innoprot
