#include "phasesync/graph.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <stack>

namespace phasesync {

namespace {

std::vector<std::vector<int>> out_adjacency(const WeightedDigraph& G) {
  std::vector<std::vector<int>> adj(G.n);
  for (const auto& e : G.edges) adj[e.from].push_back(e.to);
  return adj;
}

/// Iterative Tarjan SCC; returns component id per node, ids unordered.
std::vector<int> tarjan_scc(const WeightedDigraph& G, int& n_comp) {
  const int n = G.n;
  auto adj = out_adjacency(G);
  std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
  std::vector<bool> on_stack(n, false);
  std::stack<int> st;
  int next_index = 0;
  n_comp = 0;

  struct Frame {
    int v;
    size_t child;
  };
  for (int root = 0; root < n; ++root) {
    if (index[root] != -1) continue;
    std::stack<Frame> call;
    call.push({root, 0});
    while (!call.empty()) {
      auto& fr = call.top();
      int v = fr.v;
      if (fr.child == 0) {
        index[v] = low[v] = next_index++;
        st.push(v);
        on_stack[v] = true;
      }
      bool descended = false;
      while (fr.child < adj[v].size()) {
        int w = adj[v][fr.child++];
        if (index[w] == -1) {
          call.push({w, 0});
          descended = true;
          break;
        }
        if (on_stack[w]) low[v] = std::min(low[v], index[w]);
      }
      if (descended) continue;
      if (low[v] == index[v]) {
        for (;;) {
          int w = st.top();
          st.pop();
          on_stack[w] = false;
          comp[w] = n_comp;
          if (w == v) break;
        }
        ++n_comp;
      }
      call.pop();
      if (!call.empty()) {
        int parent = call.top().v;
        low[parent] = std::min(low[parent], low[v]);
      }
    }
  }
  return comp;
}

RMat induced_laplacian(const WeightedDigraph& G, const std::vector<int>& nodes) {
  const int k = static_cast<int>(nodes.size());
  std::vector<int> pos(G.n, -1);
  for (int i = 0; i < k; ++i) pos[nodes[i]] = i;
  RMat L = RMat::Zero(k, k);
  for (const auto& e : G.edges) {
    int pf = pos[e.from], pt = pos[e.to];
    if (pf < 0 || pt < 0) continue;
    L(pt, pf) -= e.w;
    L(pt, pt) += e.w;
  }
  return L;
}

WeightedDigraph graph_from_laplacian(const RMat& L) {
  const int n = static_cast<int>(L.rows());
  double scale = std::max(L.cwiseAbs().maxCoeff(), 1e-300);
  WeightedDigraph G;
  G.n = n;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      double a = -L(i, j);
      if (a > 1e-12 * scale) G.edges.push_back({j, i, a});
    }
  return G;
}

}  // namespace

void WeightedDigraph::validate() const {
  require(n >= 1, ErrorCode::Input, "graph: need at least one node");
  for (const auto& e : edges) {
    require(e.from >= 0 && e.from < n && e.to >= 0 && e.to < n,
            ErrorCode::Input, "graph: edge endpoint out of range");
    require(e.from != e.to, ErrorCode::Input, "graph: self-loops not allowed");
    require(e.w > 0.0, ErrorCode::Input, "graph: edge weights must be positive");
  }
}

bool WeightedDigraph::is_symmetric(double rel_tol) const {
  std::map<std::pair<int, int>, double> w;
  for (const auto& e : edges) w[{e.from, e.to}] += e.w;
  double scale = 0.0;
  for (const auto& [k, v] : w) scale = std::max(scale, v);
  for (const auto& [k, v] : w) {
    auto it = w.find({k.second, k.first});
    if (it == w.end()) return false;
    if (std::abs(it->second - v) > rel_tol * std::max(scale, 1.0)) return false;
  }
  return true;
}

RMat laplacian(const WeightedDigraph& G) {
  G.validate();
  RMat L = RMat::Zero(G.n, G.n);
  for (const auto& e : G.edges) {
    L(e.to, e.from) -= e.w;
    L(e.to, e.to) += e.w;
  }
  return L;
}

Connectivity connectivity(const WeightedDigraph& G) {
  G.validate();
  Connectivity out;

  int n_comp = 0;
  auto comp = tarjan_scc(G, n_comp);
  out.strongly_connected = (n_comp == 1);

  // A spanning tree exists iff the condensation has a unique source.
  std::vector<bool> has_incoming(n_comp, false);
  for (const auto& e : G.edges)
    if (comp[e.from] != comp[e.to]) has_incoming[comp[e.to]] = true;
  int sources = 0;
  for (int c = 0; c < n_comp; ++c)
    if (!has_incoming[c]) ++sources;
  out.has_spanning_tree = (sources == 1);

  RVec din = RVec::Zero(G.n), dout = RVec::Zero(G.n);
  for (const auto& e : G.edges) {
    din(e.to) += e.w;
    dout(e.from) += e.w;
  }
  double scale = std::max({din.maxCoeff(), dout.maxCoeff(), 1.0});
  out.weight_balanced = ((din - dout).cwiseAbs().maxCoeff() <= 1e-9 * scale);
  return out;
}

LaplacianDecomposition frobenius_form(const WeightedDigraph& G) {
  G.validate();
  int n_comp = 0;
  auto comp = tarjan_scc(G, n_comp);

  std::vector<std::vector<int>> members(n_comp);
  for (int v = 0; v < G.n; ++v) members[comp[v]].push_back(v);

  // Condensation adjacency and in-degrees for the topological order.
  std::vector<std::vector<int>> cadj(n_comp);
  std::vector<int> indeg(n_comp, 0);
  {
    std::map<std::pair<int, int>, bool> seen;
    for (const auto& e : G.edges) {
      int a = comp[e.from], b = comp[e.to];
      if (a == b || seen[{a, b}]) continue;
      seen[{a, b}] = true;
      cadj[a].push_back(b);
      ++indeg[b];
    }
  }
  int sources = 0;
  for (int c = 0; c < n_comp; ++c)
    if (indeg[c] == 0) ++sources;
  require(sources == 1, ErrorCode::Domain,
          "frobenius_form: graph has no spanning tree (" +
              std::to_string(sources) + " source components)");

  // Kahn order; ties resolved by the smallest original node id so the output
  // is deterministic.
  auto min_node = [&](int c) { return *std::min_element(members[c].begin(), members[c].end()); };
  std::vector<int> order;
  std::vector<int> ready;
  for (int c = 0; c < n_comp; ++c)
    if (indeg[c] == 0) ready.push_back(c);
  while (!ready.empty()) {
    auto it = std::min_element(ready.begin(), ready.end(), [&](int a, int b) {
      return min_node(a) < min_node(b);
    });
    int c = *it;
    ready.erase(it);
    order.push_back(c);
    for (int b : cadj[c])
      if (--indeg[b] == 0) ready.push_back(b);
  }

  LaplacianDecomposition dec;
  dec.permutation.reserve(G.n);
  for (int c : order) {
    std::sort(members[c].begin(), members[c].end());
    for (int v : members[c]) dec.permutation.push_back(v);
  }

  RMat L = laplacian(G);
  dec.L = RMat::Zero(G.n, G.n);
  for (int i = 0; i < G.n; ++i)
    for (int j = 0; j < G.n; ++j)
      dec.L(i, j) = L(dec.permutation[i], dec.permutation[j]);

  int offset = 0;
  for (int c : order) {
    LaplacianBlock blk;
    blk.offset = offset;
    blk.size = static_cast<int>(members[c].size());
    blk.nodes = members[c];
    blk.Lkk = dec.L.block(offset, offset, blk.size, blk.size);
    blk.Ltilde = induced_laplacian(G, members[c]);
    dec.blocks.push_back(std::move(blk));
    offset += static_cast<int>(members[c].size());
  }
  return dec;
}

EssentialPhaseResult essential_phase_laplacian(const RMat& L) {
  const int n = static_cast<int>(L.rows());
  require(n >= 1 && L.cols() == n, ErrorCode::Input,
          "essential_phase_laplacian: L must be square");
  double scale = std::max(L.cwiseAbs().maxCoeff(), 1e-300);
  require((L * RVec::Ones(n)).cwiseAbs().maxCoeff() <= 1e-9 * scale,
          ErrorCode::Input, "essential_phase_laplacian: row sums must vanish");

  EssentialPhaseResult out;
  out.exact = true;
  if (n == 1) {
    out.value = 0.0;
    out.scaling = RVec::Ones(1);
    return out;
  }

  WeightedDigraph G = graph_from_laplacian(L);
  int n_comp = 0;
  tarjan_scc(G, n_comp);
  require(n_comp == 1, ErrorCode::Precondition,
          "essential_phase_laplacian: graph is not strongly connected");

  // Positive left null vector of L from the null space of L'.
  Eigen::JacobiSVD<RMat> svd(L.transpose(), Eigen::ComputeFullV);
  RVec v = svd.matrixV().col(n - 1);
  if (v.sum() < 0.0) v = -v;
  require(v.minCoeff() > 1e-10 * v.maxCoeff(), ErrorCode::Domain,
          "essential_phase_laplacian: left null vector is not strictly "
          "positive");
  v /= v.maxCoeff();

  RMat VL = v.asDiagonal() * L;

  // Compress onto the complement of the common null direction 1.
  RMat ones = RMat::Ones(n, 1);
  Eigen::HouseholderQR<RMat> qr(ones);
  RMat Qfull = qr.householderQ() * RMat::Identity(n, n);
  RMat Q = Qfull.rightCols(n - 1);
  CMat Chat = (Q.transpose() * VL * Q).cast<Complex>();

  PhaseProfile prof = phases(Chat);
  // Real matrices carry symmetric phase sets, so the largest phase cannot be
  // negative; clamp the floating-point zero.
  out.value = std::max(prof.phi_max(), 0.0);
  out.scaling = v;
  require(out.value < kPi / 2.0 + 1e-9, ErrorCode::Internal,
          "essential_phase_laplacian: value exceeded pi/2");
  return out;
}

std::vector<double> component_phase_bounds(const LaplacianDecomposition& dec,
                                           bool refine) {
  std::vector<double> out;
  out.reserve(dec.blocks.size());
  for (size_t k = 0; k < dec.blocks.size(); ++k) {
    const auto& blk = dec.blocks[k];
    double theta = essential_phase_laplacian(blk.Ltilde).value;
    if (refine && k > 0 && blk.size > 1) {
      try {
        auto gen = essential_phase(blk.Lkk.cast<Complex>());
        theta = std::min(theta, gen.value);
      } catch (const Error&) {
        // keep the component bound
      }
    }
    out.push_back(theta);
  }
  return out;
}

IncidenceFactorization incidence(const WeightedDigraph& G) {
  G.validate();
  require(G.is_symmetric(), ErrorCode::Precondition,
          "incidence: graph is not undirected (weights must be symmetric)");

  // Parallel edges merge; only the low-to-high direction is accumulated since
  // symmetry guarantees the mirror entries match.
  std::map<std::pair<int, int>, double> w;
  for (const auto& e : G.edges)
    if (e.from < e.to) w[{e.from, e.to}] += e.w;

  IncidenceFactorization out;
  const int l = static_cast<int>(w.size());
  out.E = RMat::Zero(G.n, l);
  out.weights = RVec::Zero(l);
  int k = 0;
  for (const auto& [key, weight] : w) {
    out.E(key.second, k) = 1.0;   // head
    out.E(key.first, k) = -1.0;   // tail
    out.weights(k) = weight;
    out.edge_order.emplace_back(key.first, key.second);
    ++k;
  }
  return out;
}

}  // namespace phasesync
