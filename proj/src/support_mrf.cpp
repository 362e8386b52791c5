#include "derain/support_mrf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <queue>
#include <stdexcept>

namespace derain {

PixelEnergy::PixelEnergy(Shape grid, std::vector<double> cost0, std::vector<double> cost1, std::vector<double> right,
                         std::vector<double> down)
    : grid_(grid), cost0_(std::move(cost0)), cost1_(std::move(cost1)), right_(std::move(right)), down_(std::move(down)) {
  const std::size_t n = grid.size();
  if (cost0_.size() != n || cost1_.size() != n || right_.size() != n || down_.size() != n)
    throw DimensionError("PixelEnergy: every term needs one entry per pixel");
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(cost0_[i]) || !std::isfinite(cost1_[i]))
      throw std::invalid_argument("PixelEnergy: unary costs must be finite");
    if (!(right_[i] >= 0.0) || !(down_[i] >= 0.0))
      throw std::invalid_argument("PixelEnergy: pairwise weights must be non-negative");
  }
}

PixelEnergy PixelEnergy::uniform(Shape grid, std::vector<double> cost0, std::vector<double> cost1, double alpha) {
  return PixelEnergy(grid, std::move(cost0), std::move(cost1), std::vector<double>(grid.size(), alpha),
                     std::vector<double>(grid.size(), alpha));
}

PixelEnergy build_energy(const Frame& x, const Frame& background, const Frame& object, const Frame& rain,
                         double sigma2, const SupportMask& previous, double alpha, double beta) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("build_energy: sigma^2 must be positive");
  if (!(alpha >= 0.0) || !(beta >= 0.0)) throw std::invalid_argument("build_energy: alpha and beta must be >= 0");
  const Shape g = x.shape();
  require_same_shape(g, background.shape(), "build_energy background");
  require_same_shape(g, object.shape(), "build_energy object layer");
  require_same_shape(g, rain.shape(), "build_energy rain layer");
  require_same_shape(g, previous.shape(), "build_energy previous mask");

  const std::size_t n = g.size();
  std::vector<double> c0(n), c1(n);
  const double inv = 1.0 / (2.0 * sigma2);
  const auto sn = static_cast<std::ptrdiff_t>(n);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t si = 0; si < sn; ++si) {
    const auto i = static_cast<std::size_t>(si);
    const double e0 = x[i] - background[i] - rain[i];
    const double e1 = x[i] - object[i] - rain[i];
    const double prev = previous[i];
    c0[i] = e0 * e0 * inv + alpha * prev;
    c1[i] = e1 * e1 * inv + beta + alpha * (1.0 - prev);
  }
  return PixelEnergy::uniform(g, std::move(c0), std::move(c1), alpha);
}

double energy_of(const PixelEnergy& energy, const SupportMask& labeling) {
  const Shape g = energy.grid();
  require_same_shape(g, labeling.shape(), "energy_of");
  double e = 0.0;
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * g.width + x;
      const auto l = labeling[i];
      e += l ? energy.cost1()[i] : energy.cost0()[i];
      if (x + 1 < g.width && l != labeling[i + 1]) e += energy.right()[i];
      if (y + 1 < g.height && l != labeling[i + g.width]) e += energy.down()[i];
    }
  }
  return e;
}

MaxFlowGraph::MaxFlowGraph(int nodes) : adj_(static_cast<std::size_t>(nodes)) {}

void MaxFlowGraph::add_edge(int from, int to, double cap, double reverse_cap) {
  auto& a = adj_[static_cast<std::size_t>(from)];
  auto& b = adj_[static_cast<std::size_t>(to)];
  a.push_back({to, static_cast<int>(b.size()), cap});
  b.push_back({from, static_cast<int>(a.size()) - 1, reverse_cap});
  eps_ = std::max(eps_, 1e-13 * std::max(cap, reverse_cap));
}

bool MaxFlowGraph::build_levels(int source, int sink) {
  level_.assign(adj_.size(), -1);
  std::queue<int> q;
  level_[static_cast<std::size_t>(source)] = 0;
  q.push(source);
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (const auto& e : adj_[static_cast<std::size_t>(v)]) {
      if (e.cap > eps_ && level_[static_cast<std::size_t>(e.to)] < 0) {
        level_[static_cast<std::size_t>(e.to)] = level_[static_cast<std::size_t>(v)] + 1;
        q.push(e.to);
      }
    }
  }
  return level_[static_cast<std::size_t>(sink)] >= 0;
}

// Iterative blocking-flow search; grid paths can be far too long to recurse.
double MaxFlowGraph::push(int source, int sink, double) {
  double total = 0.0;
  std::vector<std::pair<int, std::size_t>> path;  // (node, edge index) steps
  int v = source;
  while (true) {
    if (v == sink) {
      double bottleneck = std::numeric_limits<double>::infinity();
      for (const auto& [u, ei] : path) bottleneck = std::min(bottleneck, adj_[static_cast<std::size_t>(u)][ei].cap);
      std::size_t retreat = path.size();
      for (std::size_t k = 0; k < path.size(); ++k) {
        auto& e = adj_[static_cast<std::size_t>(path[k].first)][path[k].second];
        e.cap -= bottleneck;
        adj_[static_cast<std::size_t>(e.to)][static_cast<std::size_t>(e.rev)].cap += bottleneck;
        if (e.cap <= eps_ && retreat == path.size()) retreat = k;
      }
      total += bottleneck;
      path.resize(retreat);
      v = path.empty() ? source : adj_[static_cast<std::size_t>(path.back().first)][path.back().second].to;
      continue;
    }
    auto& edges = adj_[static_cast<std::size_t>(v)];
    auto& cur = cursor_[static_cast<std::size_t>(v)];
    bool advanced = false;
    for (; cur < edges.size(); ++cur) {
      const auto& e = edges[cur];
      if (e.cap > eps_ && level_[static_cast<std::size_t>(e.to)] == level_[static_cast<std::size_t>(v)] + 1) {
        path.emplace_back(v, cur);
        v = e.to;
        advanced = true;
        break;
      }
    }
    if (advanced) continue;
    level_[static_cast<std::size_t>(v)] = -1;  // dead end for this phase
    if (path.empty()) break;
    v = path.back().first;
    path.pop_back();
    ++cursor_[static_cast<std::size_t>(v)];
  }
  return total;
}

double MaxFlowGraph::max_flow(int source, int sink) {
  double flow = 0.0;
  while (build_levels(source, sink)) {
    cursor_.assign(adj_.size(), 0);
    const double f = push(source, sink, std::numeric_limits<double>::infinity());
    if (f <= 0.0) break;
    flow += f;
  }
  return flow;
}

std::vector<std::uint8_t> MaxFlowGraph::reaches_sink(int sink) const {
  // reverse search: u reaches sink if some residual edge u->v has v reaching sink
  std::vector<std::uint8_t> mark(adj_.size(), 0);
  std::queue<int> q;
  mark[static_cast<std::size_t>(sink)] = 1;
  q.push(sink);
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    for (const auto& e : adj_[static_cast<std::size_t>(v)]) {
      // e is v->u; its twin u->v carries the residual we need
      const auto& twin = adj_[static_cast<std::size_t>(e.to)][static_cast<std::size_t>(e.rev)];
      if (twin.cap > eps_ && !mark[static_cast<std::size_t>(e.to)]) {
        mark[static_cast<std::size_t>(e.to)] = 1;
        q.push(e.to);
      }
    }
  }
  return mark;
}

SupportMask min_cut_solve(const PixelEnergy& energy) {
  const Shape g = energy.grid();
  const int n = static_cast<int>(g.size());
  const int source = n;
  const int sink = n + 1;
  MaxFlowGraph graph(n + 2);
  for (int i = 0; i < n; ++i) {
    const auto ui = static_cast<std::size_t>(i);
    const double lo = std::min(energy.cost0()[ui], energy.cost1()[ui]);
    // source side = label 0 (pays cost0 through p->t), sink side = label 1
    const double c1 = energy.cost1()[ui] - lo;
    const double c0 = energy.cost0()[ui] - lo;
    if (c1 > 0.0) graph.add_edge(source, i, c1);
    if (c0 > 0.0) graph.add_edge(i, sink, c0);
  }
  for (int y = 0; y < g.height; ++y) {
    for (int x = 0; x < g.width; ++x) {
      const int i = y * g.width + x;
      const auto ui = static_cast<std::size_t>(i);
      if (x + 1 < g.width && energy.right()[ui] > 0.0) graph.add_edge(i, i + 1, energy.right()[ui], energy.right()[ui]);
      if (y + 1 < g.height && energy.down()[ui] > 0.0)
        graph.add_edge(i, i + g.width, energy.down()[ui], energy.down()[ui]);
    }
  }
  graph.max_flow(source, sink);
  const auto sink_side = graph.reaches_sink(sink);
  std::vector<std::uint8_t> labels(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) labels[static_cast<std::size_t>(i)] = sink_side[static_cast<std::size_t>(i)];
  return SupportMask(g.height, g.width, std::move(labels));
}

}  // namespace derain
