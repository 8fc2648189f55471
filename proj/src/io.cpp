#include "phasesync/io.hpp"

#include <nlohmann/json.hpp>

#include <cstdio>

namespace phasesync {

using nlohmann::json;

namespace {

constexpr Complex kJ{0.0, 1.0};

[[noreturn]] void schema_fail(const std::string& what) {
  fail(ErrorCode::Input, "schema: " + what);
}

double number_at(const json& j, const char* key, double fallback,
                 bool required = false) {
  if (!j.contains(key)) {
    if (required) schema_fail(std::string("missing field '") + key + "'");
    return fallback;
  }
  if (!j[key].is_number()) schema_fail(std::string(key) + " must be a number");
  return j[key].get<double>();
}

RMat real_matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) schema_fail("expected a matrix array");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  RMat M(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != cols)
      schema_fail("ragged matrix rows");
    for (int k = 0; k < cols; ++k) {
      if (!j[i][k].is_number()) schema_fail("matrix entries must be numbers");
      M(i, k) = j[i][k].get<double>();
    }
  }
  return M;
}

std::vector<double> coeffs_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty())
    schema_fail(std::string(what) + " must be a nonempty coefficient array");
  std::vector<double> out;
  for (const auto& c : j) {
    if (!c.is_number()) schema_fail(std::string(what) + " must hold numbers");
    out.push_back(c.get<double>());
  }
  return out;
}

StateSpace state_space_from_json(const json& j) {
  StateSpace ss;
  ss.A = j.contains("A") ? real_matrix_from_json(j["A"]) : RMat::Zero(0, 0);
  ss.B = j.contains("B") ? real_matrix_from_json(j["B"])
                         : RMat::Zero(0, ss.A.cols());
  ss.C = j.contains("C") ? real_matrix_from_json(j["C"])
                         : RMat::Zero(0, ss.A.rows());
  if (!j.contains("D")) schema_fail("state space needs D");
  ss.D = real_matrix_from_json(j["D"]);
  if (ss.A.size() == 0) {
    ss.A = RMat::Zero(0, 0);
    ss.B = RMat::Zero(0, ss.D.cols());
    ss.C = RMat::Zero(ss.D.rows(), 0);
  }
  ss.check_consistent();
  return ss;
}

RationalMatrix rational_from_json(const json& j, int m) {
  if (!j.is_array() || static_cast<int>(j.size()) != m)
    schema_fail("rational matrix must have m rows");
  RationalMatrix R;
  R.rows = R.cols = m;
  R.entries.resize(m * m);
  for (int i = 0; i < m; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != m)
      schema_fail("rational matrix must be m x m");
    for (int k = 0; k < m; ++k) {
      const auto& e = j[i][k];
      if (!e.is_object() || !e.contains("num") || !e.contains("den"))
        schema_fail("rational entry needs num and den");
      R.at(i, k) = {coeffs_from_json(e["num"], "num"),
                    coeffs_from_json(e["den"], "den")};
    }
  }
  return R;
}

json rational_to_json(const RationalMatrix& R) {
  json rows = json::array();
  for (int i = 0; i < R.rows; ++i) {
    json row = json::array();
    for (int k = 0; k < R.cols; ++k) {
      row.push_back(json{{"num", R.at(i, k).num}, {"den", R.at(i, k).den}});
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

json parse_json_text(const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) schema_fail("invalid JSON");
  return j;
}

WeightedDigraph network_from_json(const json& j) {
  if (!j.is_object()) schema_fail("network must be an object");
  WeightedDigraph G;
  G.n = static_cast<int>(number_at(j, "n", 0, true));
  if (G.n < 1) schema_fail("network needs n >= 1");
  if (!j.contains("edges") || !j["edges"].is_array())
    schema_fail("network needs an edges array");
  bool undirected = j.value("undirected", false);
  for (const auto& e : j["edges"]) {
    int from = static_cast<int>(number_at(e, "from", 0, true));
    int to = static_cast<int>(number_at(e, "to", 0, true));
    double w = number_at(e, "w", 1.0);
    if (from < 1 || from > G.n || to < 1 || to > G.n)
      schema_fail("edge endpoints must be 1-based node ids");
    G.edges.push_back({from - 1, to - 1, w});
    if (undirected) G.edges.push_back({to - 1, from - 1, w});
  }
  G.validate();
  return G;
}

CMat complex_matrix_from_json(const json& j) {
  if (!j.is_array() || j.empty()) schema_fail("expected a matrix array");
  const int rows = static_cast<int>(j.size());
  const int cols = static_cast<int>(j[0].size());
  CMat M(rows, cols);
  for (int i = 0; i < rows; ++i) {
    if (!j[i].is_array() || static_cast<int>(j[i].size()) != cols)
      schema_fail("ragged matrix rows");
    for (int k = 0; k < cols; ++k) {
      const auto& e = j[i][k];
      if (e.is_number()) {
        M(i, k) = Complex(e.get<double>(), 0.0);
      } else if (e.is_array() && e.size() == 2 && e[0].is_number() &&
                 e[1].is_number()) {
        M(i, k) = Complex(e[0].get<double>(), e[1].get<double>());
      } else {
        schema_fail("complex entries must be numbers or [re, im] pairs");
      }
    }
  }
  return M;
}

json complex_matrix_to_json(const CMat& M) {
  json rows = json::array();
  for (int i = 0; i < M.rows(); ++i) {
    json row = json::array();
    for (int k = 0; k < M.cols(); ++k)
      row.push_back(json::array({M(i, k).real(), M(i, k).imag()}));
    rows.push_back(row);
  }
  return rows;
}

AgentSet agents_from_json(const json& j) {
  if (!j.is_object()) schema_fail("agent file must be an object");
  AgentSet out;
  out.m = static_cast<int>(number_at(j, "m", 0, true));
  if (out.m < 1) schema_fail("m must be >= 1");
  if (!j.contains("modes") || !j["modes"].is_array())
    schema_fail("agent file needs a modes array");
  out.modes.m = out.m;
  for (const auto& w : j["modes"]) {
    if (!w.is_number()) schema_fail("modes must be numbers");
    out.modes.omega.push_back(w.get<double>());
  }
  out.modes.validate();

  if (!j.contains("agents") || !j["agents"].is_array() || j["agents"].empty())
    schema_fail("agent file needs a nonempty agents array");

  auto nz = out.modes.nonzero();
  for (const auto& a : j["agents"]) {
    const json res = a.value("residues", json::object());
    RMat M0;
    if (out.modes.has_zero()) {
      if (!res.contains("M0")) schema_fail("residues.M0 required (0 mode)");
      M0 = real_matrix_from_json(res["M0"]);
      if (M0.rows() != out.m || M0.cols() != out.m)
        schema_fail("M0 must be m x m");
    }
    std::vector<CMat> Mk;
    if (!nz.empty()) {
      if (!res.contains("Mk") || !res["Mk"].is_array() ||
          res["Mk"].size() != nz.size())
        schema_fail("residues.Mk must list one entry per nonzero mode");
      for (size_t k = 0; k < nz.size(); ++k) {
        const auto& e = res["Mk"][k];
        if (e.is_object() && e.contains("M")) {
          Mk.push_back(complex_matrix_from_json(e["M"]));
        } else if (e.is_object() && e.contains("num_poly")) {
          // Numerator matrix polynomial over (s^2 + w^2): the residue at jw
          // is N(jw)/(2jw).
          const auto& np = e["num_poly"];
          if (!np.is_array() || np.empty())
            schema_fail("num_poly must be a nonempty list of matrices");
          CMat N = CMat::Zero(out.m, out.m);
          Complex s = kJ * nz[k];
          Complex pw = 1.0;
          for (const auto& coeff : np) {
            N += pw * real_matrix_from_json(coeff).cast<Complex>();
            pw *= s;
          }
          Mk.push_back(N / (2.0 * kJ * nz[k]));
        } else {
          schema_fail("Mk entries need either M or num_poly");
        }
        if (Mk.back().rows() != out.m || Mk.back().cols() != out.m)
          schema_fail("Mk must be m x m");
      }
    }

    StateSpace rem = StateSpace::zero(out.m, out.m);
    if (a.contains("remainder") && !a["remainder"].is_null()) {
      const auto& r = a["remainder"];
      if (r.contains("rational"))
        rem = rational_from_json(r["rational"], out.m).realize();
      else if (r.contains("ss"))
        rem = state_space_from_json(r["ss"]);
      else
        schema_fail("remainder needs 'rational' or 'ss'");
    }
    auto tm = TransferMatrix::from_partial_fraction(out.modes, M0, Mk, rem);
    tm.name = a.value("name", "P" + std::to_string(out.agents.size() + 1));
    out.agents.push_back(std::move(tm));
  }
  return out;
}

ControllerSet controllers_from_json(const json& j) {
  if (!j.is_object()) schema_fail("controller file must be an object");
  ControllerSet out;
  out.m = static_cast<int>(number_at(j, "m", 0, true));
  if (out.m < 1) schema_fail("m must be >= 1");
  out.epsilon = number_at(j, "epsilon", 1.0);
  out.uniform = j.value("uniform", true);
  if (!j.contains("controllers") || !j["controllers"].is_array() ||
      j["controllers"].empty())
    schema_fail("controller file needs a nonempty controllers array");
  for (const auto& c : j["controllers"]) {
    if (!c.contains("entries")) schema_fail("controller needs entries");
    out.controllers.push_back(rational_from_json(c["entries"], out.m));
  }
  return out;
}

json phase_report_json(const PhaseProfile& prof) {
  json out;
  out["classification"] = to_string(prof.kind.kind);
  out["phases"] = prof.phases;
  out["center"] = prof.center;
  out["margin"] = prof.kind.margin;
  out["rank"] = prof.kind.rank;
  out["boundary_detected"] = prof.boundary_detected;
  return out;
}

json laplacian_report_json(const LaplacianDecomposition& dec,
                           const std::vector<double>& thetas,
                           const Connectivity& conn) {
  json comps = json::array();
  for (size_t k = 0; k < dec.blocks.size(); ++k) {
    json c;
    c["kappa"] = k + 1;
    json nodes = json::array();
    for (int v : dec.blocks[k].nodes) nodes.push_back(v + 1);
    c["nodes"] = nodes;
    c["theta"] = thetas[k];
    c["exact"] = (k == 0 || dec.blocks[k].size == 1);
    comps.push_back(c);
  }
  json out;
  out["components"] = comps;
  out["has_spanning_tree"] = conn.has_spanning_tree;
  out["strongly_connected"] = conn.strongly_connected;
  out["weight_balanced"] = conn.weight_balanced;
  return out;
}

json verdict_to_json(const AnalysisVerdict& v) {
  json out;
  out["holds"] = v.holds;
  out["margin"] = v.margin;
  out["worst_frequency"] = v.worst_frequency;
  out["preconditions_ok"] = v.preconditions_ok;
  if (!v.preconditions_ok) out["precondition_failure"] = v.precondition_failure;
  out["summary"] = v.summary;
  out["residues_sectorial_joint"] = v.residues_sectorial_joint;
  out["residues_sectorial_each"] = v.residues_sectorial_each;
  json comps = json::array();
  for (const auto& c : v.per_component) {
    comps.push_back(json{{"kappa", c.kappa},
                         {"theta", c.theta},
                         {"interval", json::array({c.lo, c.hi})},
                         {"attained", json::array({c.attained_lo, c.attained_hi})},
                         {"margin", c.margin},
                         {"worst_frequency", c.worst_omega}});
  }
  out["components"] = comps;
  return out;
}

json design_to_json(const DesignResult& d) {
  json out;
  out["feasible"] = d.feasible;
  out["uniform"] = d.uniform;
  out["static"] = d.is_static;
  out["epsilon"] = d.epsilon;
  out["epsilon_star"] = d.epsilon_star;
  out["message"] = d.message;
  out["lmi_margins"] = d.lmi_margins;
  json ks = json::array();
  for (const auto& K : d.K) ks.push_back(complex_matrix_to_json(K));
  out["K"] = ks;
  json ctrls = json::array();
  for (const auto& c : d.controllers)
    ctrls.push_back(json{{"entries", rational_to_json(c)}});
  out["controllers"] = ctrls;
  json certs = json::array();
  for (const auto& c : d.certificates) {
    certs.push_back(json{{"omega", c.omega},
                         {"kappa", c.kappa},
                         {"theta", c.theta},
                         {"angles", c.angles},
                         {"laplacian_angles", c.lap_angles},
                         {"phase_interval", json::array({c.phi_lo, c.phi_hi})},
                         {"phase_condition_ok", c.phase_condition_ok}});
  }
  out["certificates"] = certs;
  json rep;
  rep["pass"] = d.sync_report.pass;
  rep["reason"] = d.sync_report.reason;
  rep["slowest_stable"] = d.sync_report.slowest_stable;
  out["sync_report"] = rep;
  return out;
}

ControllerSet controllers_from_design(const DesignResult& d, int m) {
  ControllerSet out;
  out.m = m;
  out.uniform = d.uniform;
  out.epsilon = d.epsilon;
  out.controllers = d.controllers;
  return out;
}

std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

std::string margins_csv(const AnalysisVerdict& v) {
  std::string out = "omega";
  for (size_t c = 0; c < v.trace.hi_sum.size(); ++c) {
    out += ",phimax_sum_" + std::to_string(c + 1) + ",phimin_sum_" +
           std::to_string(c + 1);
  }
  out += "\n";
  for (size_t i = 0; i < v.trace.omega.size(); ++i) {
    out += format_number(v.trace.omega[i]);
    for (size_t c = 0; c < v.trace.hi_sum.size(); ++c) {
      out += "," + format_number(v.trace.hi_sum[c][i]);
      out += "," + format_number(v.trace.lo_sum[c][i]);
    }
    out += "\n";
  }
  return out;
}

std::string trajectory_csv(const Trajectory& traj, int n, int m) {
  require(traj.Y.cols() == n * m, ErrorCode::Input,
          "trajectory csv: width does not equal n*m");
  std::string out = "t";
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < m; ++c)
      out += ",y" + std::to_string(i + 1) + "_" + std::to_string(c + 1);
  out += "\n";
  for (size_t r = 0; r < traj.t.size(); ++r) {
    out += format_number(traj.t[r]);
    for (int c = 0; c < n * m; ++c) out += "," + format_number(traj.Y(r, c));
    out += "\n";
  }
  return out;
}

std::string disagreement_csv(const Trajectory& traj, const Disagreement& dis,
                             int n, int m) {
  std::string out = "t";
  for (int c = 0; c < m; ++c) out += ",yave_" + std::to_string(c + 1);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < m; ++c)
      out += ",ydis_" + std::to_string(i + 1) + "_" + std::to_string(c + 1);
  out += "\n";
  for (size_t r = 0; r < traj.t.size(); ++r) {
    out += format_number(traj.t[r]);
    for (int c = 0; c < m; ++c) out += "," + format_number(dis.y_ave(r, c));
    for (int c = 0; c < n * m; ++c)
      out += "," + format_number(dis.y_dis(r, c));
    out += "\n";
  }
  return out;
}

std::string sweep_csv(const std::vector<double>& omega,
                      const std::vector<std::vector<double>>& phi_max,
                      const std::vector<std::vector<double>>& phi_min,
                      const std::vector<std::string>& labels) {
  std::string out = "omega";
  for (const auto& l : labels) out += ",phimax_" + l + ",phimin_" + l;
  out += "\n";
  for (size_t i = 0; i < omega.size(); ++i) {
    out += format_number(omega[i]);
    for (size_t s = 0; s < labels.size(); ++s) {
      out += "," + format_number(phi_max[s][i]);
      out += "," + format_number(phi_min[s][i]);
    }
    out += "\n";
  }
  return out;
}

}  // namespace phasesync
