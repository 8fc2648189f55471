#pragma once

#include <utility>
#include <vector>

#include "phasesync/phase.hpp"
#include "phasesync/types.hpp"

namespace phasesync {

/// Directed edge from -> to with positive weight. In Laplacian terms the
/// weight of edge (i, j) enters row j: a_{ji} = w.
struct GraphEdge {
  int from = 0;
  int to = 0;
  double w = 1.0;
};

struct WeightedDigraph {
  int n = 0;
  std::vector<GraphEdge> edges;

  void validate() const;
  bool is_symmetric(double rel_tol = 1e-12) const;
};

struct Connectivity {
  bool has_spanning_tree = false;
  bool strongly_connected = false;
  bool weight_balanced = false;
};

struct LaplacianBlock {
  int offset = 0;
  int size = 0;
  RMat Lkk;                 ///< diagonal block of the permuted Laplacian
  RMat Ltilde;              ///< Laplacian of the component-induced subgraph
  std::vector<int> nodes;   ///< original node ids (0-based)
};

/// Frobenius normal form of the Laplacian: lower block triangular with the
/// root component first.
struct LaplacianDecomposition {
  RMat L;                        ///< permuted Laplacian
  std::vector<int> permutation;  ///< new index -> original node
  std::vector<LaplacianBlock> blocks;
  bool roots_first = true;
};

struct IncidenceFactorization {
  RMat E;                                     ///< n x l, one +1/-1 per column
  RVec weights;                               ///< undirected edge weights
  std::vector<std::pair<int, int>> edge_order;  ///< (tail, head) per column
};

RMat laplacian(const WeightedDigraph& G);

Connectivity connectivity(const WeightedDigraph& G);

/// Strongly connected components of G in topological order (source first
/// when unique). Throws ErrorCode::Domain when G has no spanning tree.
LaplacianDecomposition frobenius_form(const WeightedDigraph& G);

/// Exact essential phase of the Laplacian of a strongly connected graph via
/// the Perron left eigenvector: phi_ess(L) = phi_max(V L) computed on the
/// complement of the consensus direction.
EssentialPhaseResult essential_phase_laplacian(const RMat& L);

/// Per-block essential phase bounds: exact for the root block, the
/// component-subgraph bound for the others, optionally tightened by the
/// generic diagonal-scaling optimizer.
std::vector<double> component_phase_bounds(const LaplacianDecomposition& dec,
                                           bool refine = false);

/// Incidence factorization L = E diag(w) E' of an undirected graph.
IncidenceFactorization incidence(const WeightedDigraph& G);

}  // namespace phasesync
