#pragma once

// Binary moving-object support by exact s-t min-cut.
//
//   E(H) = sum_p cost_{H_p}(p) + sum_{p~q} w_pq [H_p != H_q]
//
// over the 4-connected grid. Non-negative pairwise weights make the energy
// submodular, so one max-flow gives a global minimizer.

#include <cstdint>
#include <vector>

#include "derain/frame.hpp"

namespace derain {

class PixelEnergy {
 public:
  PixelEnergy() = default;
  /// right[p] couples p with its right neighbour, down[p] with the pixel
  /// below; entries on the last column / row are ignored. Negative weights
  /// are rejected.
  PixelEnergy(Shape grid, std::vector<double> cost0, std::vector<double> cost1, std::vector<double> right,
              std::vector<double> down);

  /// Uniform edge weight alpha on every 4-neighbour pair.
  static PixelEnergy uniform(Shape grid, std::vector<double> cost0, std::vector<double> cost1, double alpha);

  Shape grid() const { return grid_; }
  const std::vector<double>& cost0() const { return cost0_; }
  const std::vector<double>& cost1() const { return cost1_; }
  const std::vector<double>& right() const { return right_; }
  const std::vector<double>& down() const { return down_; }

 private:
  Shape grid_;
  std::vector<double> cost0_, cost1_, right_, down_;
};

/// Data costs of the two labelings plus beta on label 1, spatial weight
/// alpha, and a temporal disagreement cost alpha * |label - H_prev| folded
/// into the unaries.
PixelEnergy build_energy(const Frame& x, const Frame& background, const Frame& object, const Frame& rain,
                         double sigma2, const SupportMask& previous, double alpha, double beta);

/// Global minimizer. Among minimizers the one with the fewest 1-labels is
/// returned, so exact ties resolve to background.
SupportMask min_cut_solve(const PixelEnergy& energy);

double energy_of(const PixelEnergy& energy, const SupportMask& labeling);

/// Dinic max-flow on real capacities; exposed for testing.
class MaxFlowGraph {
 public:
  explicit MaxFlowGraph(int nodes);
  void add_edge(int from, int to, double cap, double reverse_cap = 0.0);
  double max_flow(int source, int sink);
  /// Nodes that still reach `sink` through residual capacity.
  std::vector<std::uint8_t> reaches_sink(int sink) const;

 private:
  struct Edge {
    int to;
    int rev;
    double cap;
  };
  bool build_levels(int source, int sink);
  double push(int v, int sink, double limit);

  std::vector<std::vector<Edge>> adj_;
  std::vector<int> level_;
  std::vector<std::size_t> cursor_;
  double eps_ = 0.0;
};

}  // namespace derain
