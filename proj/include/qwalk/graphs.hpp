#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "qwalk/errors.hpp"
#include "qwalk/rng.hpp"
#include "qwalk/types.hpp"

namespace qwalk {

enum class GraphKind { Line, Cycle, Hypercube, GluedTrees, Custom };

inline const char* to_string(GraphKind kind) {
  switch (kind) {
    case GraphKind::Line: return "line";
    case GraphKind::Cycle: return "cycle";
    case GraphKind::Hypercube: return "hypercube";
    case GraphKind::GluedTrees: return "glued_trees";
    case GraphKind::Custom: return "custom";
  }
  return "custom";
}

/// One end of an edge: vertex x together with the port (coin label) c used there.
struct PortRef {
  std::size_t vertex = 0;
  std::size_t port = 0;
  friend bool operator==(const PortRef&, const PortRef&) = default;
};

/// Undirected simple graph with a fixed port labelling.
///
/// The port map pairs (x, c) with (x', c') at the two ends of every edge and is
/// an involution. Ports are stored in a dense N x d table (d = max degree);
/// slots that do not label an edge are unused and carry no partner.
///
/// Conventions:
///  - line / cycle: port 0 steps to x - 1, port 1 steps to x + 1.
///  - hypercube: port j flips bit j (bit j has value 2^j).
///  - loaded graphs and glued trees: ports at x sorted by neighbour index.
class Graph {
 public:
  static constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

  Graph(GraphKind kind, std::size_t vertex_count, std::size_t max_degree, std::vector<PortRef> ports,
        std::vector<std::int64_t> labels)
      : kind_(kind), n_(vertex_count), d_(max_degree), ports_(std::move(ports)), labels_(std::move(labels)) {
    degree_.assign(n_, 0);
    for (std::size_t x = 0; x < n_; ++x)
      for (std::size_t c = 0; c < d_; ++c)
        if (ports_[x * d_ + c].vertex != kNone) ++degree_[x];
    validate();
  }

  [[nodiscard]] GraphKind kind() const noexcept { return kind_; }
  [[nodiscard]] std::size_t vertex_count() const noexcept { return n_; }
  [[nodiscard]] std::size_t max_degree() const noexcept { return d_; }
  [[nodiscard]] std::size_t degree(std::size_t x) const { return degree_.at(x); }
  [[nodiscard]] std::size_t basis_size() const noexcept { return n_ * d_; }
  [[nodiscard]] std::size_t basis_index(std::size_t x, std::size_t c) const noexcept { return x * d_ + c; }

  [[nodiscard]] bool port_used(std::size_t x, std::size_t c) const {
    return c < d_ && ports_[x * d_ + c].vertex != kNone;
  }

  /// The port map. Empty for unused ports.
  [[nodiscard]] std::optional<PortRef> partner(std::size_t x, std::size_t c) const {
    if (!port_used(x, c)) return std::nullopt;
    return ports_[x * d_ + c];
  }

  [[nodiscard]] std::vector<std::size_t> neighbours(std::size_t x) const {
    std::vector<std::size_t> out;
    for (std::size_t c = 0; c < d_; ++c)
      if (port_used(x, c)) out.push_back(ports_[x * d_ + c].vertex);
    return out;
  }

  [[nodiscard]] bool adjacent(std::size_t x, std::size_t y) const {
    for (std::size_t c = 0; c < d_; ++c)
      if (port_used(x, c) && ports_[x * d_ + c].vertex == y) return true;
    return false;
  }

  /// Per-vertex metadata: signed coordinate (line), index (cycle), bit string
  /// (hypercube), column 1..2*depth+2 (glued trees), index (custom).
  [[nodiscard]] std::int64_t label(std::size_t x) const { return labels_.at(x); }
  [[nodiscard]] const std::vector<std::int64_t>& labels() const noexcept { return labels_; }

  /// Whether labels are signed positions on which moments make sense.
  [[nodiscard]] bool has_coordinates() const noexcept {
    return kind_ == GraphKind::Line || kind_ == GraphKind::Cycle;
  }

  [[nodiscard]] std::size_t edge_count() const {
    std::size_t total = 0;
    for (auto d : degree_) total += d;
    return total / 2;
  }

  /// Dense 0/1 adjacency; refuses graphs above 8192 vertices.
  [[nodiscard]] RMatrix adjacency_matrix() const {
    require(n_ <= 8192, ErrorKind::Size, "dense adjacency requested for " + std::to_string(n_) + " vertices");
    RMatrix a = RMatrix::Zero(static_cast<Eigen::Index>(n_), static_cast<Eigen::Index>(n_));
    for (std::size_t x = 0; x < n_; ++x)
      for (std::size_t c = 0; c < d_; ++c)
        if (port_used(x, c)) a(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(ports_[x * d_ + c].vertex)) = 1.0;
    return a;
  }

  /// Vertex index of a signed line coordinate (line only).
  [[nodiscard]] std::size_t vertex_at(std::int64_t coordinate) const {
    require(kind_ == GraphKind::Line, ErrorKind::Unsupported, "vertex_at needs a line graph");
    const auto half = static_cast<std::int64_t>((n_ - 1) / 2);
    require(coordinate >= -half && coordinate <= half, ErrorKind::Validation,
            "coordinate " + std::to_string(coordinate) + " outside line window");
    return static_cast<std::size_t>(coordinate + half);
  }

  [[nodiscard]] std::size_t halfwidth() const {
    require(kind_ == GraphKind::Line, ErrorKind::Unsupported, "halfwidth needs a line graph");
    return (n_ - 1) / 2;
  }

  /// Hypercube dimension n (2^n vertices).
  [[nodiscard]] std::size_t dimension() const {
    require(kind_ == GraphKind::Hypercube, ErrorKind::Unsupported, "dimension needs a hypercube");
    return d_;
  }

 private:
  void validate() const {
    require(n_ >= 1, ErrorKind::Contract, "graph has no vertices");
    require(ports_.size() == n_ * d_, ErrorKind::Contract, "port table size mismatch");
    require(labels_.size() == n_, ErrorKind::Contract, "label table size mismatch");
    // Port pairs per undirected edge; only the two-vertex cycle doubles its edge.
    const std::size_t allowed = (kind_ == GraphKind::Cycle && n_ == 2) ? 2 : 1;
    for (std::size_t x = 0; x < n_; ++x) {
      std::vector<std::size_t> seen;
      for (std::size_t c = 0; c < d_; ++c) {
        const PortRef& p = ports_[x * d_ + c];
        if (p.vertex == kNone) continue;
        require(p.vertex < n_ && p.port < d_, ErrorKind::Contract, "port points outside graph");
        require(p.vertex != x, ErrorKind::Contract, "self-loop in port map");
        const PortRef& back = ports_[p.vertex * d_ + p.port];
        require(back.vertex == x && back.port == c, ErrorKind::Contract,
                "port map is not an involution at vertex " + std::to_string(x));
        seen.push_back(p.vertex);
      }
      std::sort(seen.begin(), seen.end());
      for (std::size_t i = 0; i < seen.size();) {
        std::size_t j = i;
        while (j < seen.size() && seen[j] == seen[i]) ++j;
        require(j - i <= allowed, ErrorKind::Contract, "parallel edge at vertex " + std::to_string(x));
        i = j;
      }
    }
  }

  GraphKind kind_;
  std::size_t n_;
  std::size_t d_;
  std::vector<PortRef> ports_;
  std::vector<std::int64_t> labels_;
  std::vector<std::size_t> degree_;
};

namespace detail {

// Canonical port numbering: ports at x sorted by neighbour index.
inline Graph graph_from_edges(GraphKind kind, std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges,
                              std::vector<std::int64_t> labels) {
  std::vector<std::vector<std::size_t>> adj(n);
  for (auto [u, v] : edges) {
    adj[u].push_back(v);
    adj[v].push_back(u);
  }
  std::size_t d = 0;
  for (auto& row : adj) {
    std::sort(row.begin(), row.end());
    d = std::max(d, row.size());
  }
  d = std::max<std::size_t>(d, 1);
  std::vector<PortRef> ports(n * d, PortRef{Graph::kNone, Graph::kNone});
  for (std::size_t x = 0; x < n; ++x) {
    for (std::size_t c = 0; c < adj[x].size(); ++c) {
      const std::size_t y = adj[x][c];
      const auto it = std::lower_bound(adj[y].begin(), adj[y].end(), x);
      ports[x * d + c] = PortRef{y, static_cast<std::size_t>(it - adj[y].begin())};
    }
  }
  return Graph(kind, n, d, std::move(ports), std::move(labels));
}

}  // namespace detail

/// Path on 2*halfwidth + 1 vertices labelled -halfwidth..+halfwidth.
inline Graph build_line(std::size_t halfwidth) {
  require(halfwidth >= 1, ErrorKind::Validation, "line halfwidth must be >= 1");
  const std::size_t n = 2 * halfwidth + 1;
  std::vector<PortRef> ports(n * 2, PortRef{Graph::kNone, Graph::kNone});
  std::vector<std::int64_t> labels(n);
  for (std::size_t x = 0; x < n; ++x) {
    labels[x] = static_cast<std::int64_t>(x) - static_cast<std::int64_t>(halfwidth);
    if (x > 0) ports[x * 2 + 0] = PortRef{x - 1, 1};
    if (x + 1 < n) ports[x * 2 + 1] = PortRef{x + 1, 0};
  }
  return Graph(GraphKind::Line, n, 2, std::move(ports), std::move(labels));
}

/// N-cycle; port 1 always means +1 mod N. N = 2 has both ports on the single edge.
inline Graph build_cycle(std::size_t n) {
  require(n >= 2, ErrorKind::Validation, "cycle needs N >= 2");
  std::vector<PortRef> ports(n * 2);
  std::vector<std::int64_t> labels(n);
  for (std::size_t x = 0; x < n; ++x) {
    labels[x] = static_cast<std::int64_t>(x);
    ports[x * 2 + 0] = PortRef{(x + n - 1) % n, 1};
    ports[x * 2 + 1] = PortRef{(x + 1) % n, 0};
  }
  return Graph(GraphKind::Cycle, n, 2, std::move(ports), std::move(labels));
}

inline Graph build_hypercube(std::size_t dim) {
  require(dim >= 1 && dim <= 20, ErrorKind::Size, "hypercube dimension must be in [1, 20], got " + std::to_string(dim));
  const std::size_t n = std::size_t{1} << dim;
  std::vector<PortRef> ports(n * dim);
  std::vector<std::int64_t> labels(n);
  for (std::size_t x = 0; x < n; ++x) {
    labels[x] = static_cast<std::int64_t>(x);
    for (std::size_t j = 0; j < dim; ++j) ports[x * dim + j] = PortRef{x ^ (std::size_t{1} << j), j};
  }
  return Graph(GraphKind::Hypercube, n, dim, std::move(ports), std::move(labels));
}

/// Two binary trees of the given depth whose leaves are joined by a random
/// bipartite 2-regular wiring (union of two edge-disjoint perfect matchings).
///
/// Vertex 0 is the entrance (column 1); the last vertex is the exit
/// (column 2*depth + 2). Within each tree vertices are numbered breadth first;
/// the second tree is stored mirrored, leaves first. Only the middle wiring
/// depends on the seed.
inline Graph build_glued_trees(std::size_t depth, std::uint64_t seed) {
  require(depth >= 1 && depth <= 16, ErrorKind::Validation, "glued-trees depth must be in [1, 16]");
  const std::size_t tree = (std::size_t{1} << (depth + 1)) - 1;
  const std::size_t leaves = std::size_t{1} << depth;
  const std::size_t n = 2 * tree;
  std::vector<std::int64_t> labels(n);
  std::vector<std::pair<std::size_t, std::size_t>> edges;

  // Left tree: heap order, node i at column floor(log2(i+1)) + 1.
  for (std::size_t i = 0; i < tree; ++i) {
    labels[i] = static_cast<std::int64_t>(std::bit_width(i + 1));
    if (i > 0) edges.emplace_back((i - 1) / 2, i);
  }
  // Right tree mirrored: right-heap index h maps to vertex n - 1 - h.
  const auto right = [n](std::size_t h) { return n - 1 - h; };
  for (std::size_t h = 0; h < tree; ++h) {
    labels[right(h)] = static_cast<std::int64_t>(2 * depth + 3) - static_cast<std::int64_t>(std::bit_width(h + 1));
    if (h > 0) edges.emplace_back(right(h), right((h - 1) / 2));
  }

  const std::size_t left_leaf0 = leaves - 1;  // heap index of first leaf
  CounterRng rng(seed, 0x676c756564ULL, 0);
  const auto random_perm = [&](std::vector<std::size_t>& perm) {
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
    for (std::size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  };
  std::vector<std::size_t> first(leaves), second(leaves);
  random_perm(first);
  // Second matching must avoid every edge of the first.
  for (std::size_t attempt = 0;; ++attempt) {
    require(attempt < 100000, ErrorKind::Contract, "glued-trees wiring failed to find disjoint matchings");
    random_perm(second);
    bool disjoint = true;
    for (std::size_t i = 0; i < leaves && disjoint; ++i) disjoint = first[i] != second[i];
    if (disjoint) break;
  }
  for (std::size_t i = 0; i < leaves; ++i) {
    edges.emplace_back(left_leaf0 + i, right(left_leaf0 + first[i]));
    edges.emplace_back(left_leaf0 + i, right(left_leaf0 + second[i]));
  }
  return detail::graph_from_edges(GraphKind::GluedTrees, n, edges, std::move(labels));
}

/// Parse an undirected edge list.
///
/// Format: '#' starts a comment; the first content line is "N <count>";
/// every further content line is "u v" with 0 <= u, v < count.
inline Graph load_graph(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::optional<std::size_t> n;
  std::vector<std::pair<std::size_t, std::size_t>> edges;
  std::vector<std::size_t> edge_lines;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream fields(line);
    std::string first;
    if (!(fields >> first)) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (!n) {
      std::size_t count = 0;
      require(first == "N" && static_cast<bool>(fields >> count), ErrorKind::Parse,
              where + ": expected header 'N <count>'");
      require(count >= 1, ErrorKind::Parse, where + ": vertex count must be positive");
      n = count;
      continue;
    }
    std::size_t u = 0, v = 0;
    std::string rest;
    try {
      std::size_t used = 0;
      u = std::stoull(first, &used);
      require(used == first.size(), ErrorKind::Parse, where + ": bad vertex index '" + first + "'");
    } catch (const std::logic_error&) {
      fail(ErrorKind::Parse, where + ": bad vertex index '" + first + "'");
    }
    require(static_cast<bool>(fields >> v) && !(fields >> rest), ErrorKind::Parse, where + ": expected 'u v'");
    require(u < *n && v < *n, ErrorKind::Parse, where + ": dangling vertex index");
    require(u != v, ErrorKind::Parse, where + ": self-loop at vertex " + std::to_string(u));
    edges.emplace_back(std::min(u, v), std::max(u, v));
    edge_lines.push_back(line_no);
  }
  require(!edges.empty(), ErrorKind::Parse, "no edges");
  std::set<std::pair<std::size_t, std::size_t>> unique;
  for (std::size_t i = 0; i < edges.size(); ++i)
    require(unique.insert(edges[i]).second, ErrorKind::Parse,
            "line " + std::to_string(edge_lines[i]) + ": duplicate edge " + std::to_string(edges[i].first) + " " +
                std::to_string(edges[i].second));
  std::vector<std::int64_t> labels(*n);
  for (std::size_t x = 0; x < *n; ++x) labels[x] = static_cast<std::int64_t>(x);
  return detail::graph_from_edges(GraphKind::Custom, *n, edges, std::move(labels));
}

}  // namespace qwalk
