#include "phasesync/phasesync_c.h"

#include <nlohmann/json.hpp>

#include <cstring>
#include <map>
#include <optional>
#include <random>
#include <string>

#include "phasesync/analysis.hpp"
#include "phasesync/io.hpp"
#include "phasesync/synthesis.hpp"

using namespace phasesync;
using nlohmann::json;

struct ps_session {
  std::string last_error;
  std::optional<WeightedDigraph> network;
  std::optional<AgentSet> agents;
  std::optional<ControllerSet> controllers;
  std::optional<DesignResult> last_design;
  std::map<std::string, double> opts;

  double opt(const std::string& key, double fallback) const {
    auto it = opts.find(key);
    return it == opts.end() ? fallback : it->second;
  }
};

namespace {

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

ps_status status_of(const Error& e) {
  switch (e.code()) {
    case ErrorCode::Input:
      return PS_ERR_INPUT;
    case ErrorCode::Domain:
      return PS_ERR_DOMAIN;
    case ErrorCode::Precondition:
      return PS_ERR_PRECONDITION;
    case ErrorCode::Internal:
      return PS_ERR_INTERNAL;
  }
  return PS_ERR_INTERNAL;
}

template <typename F>
ps_status guarded(ps_session* s, F&& body) {
  if (!s) return PS_ERR_INTERNAL;
  s->last_error.clear();
  try {
    return body();
  } catch (const Error& e) {
    s->last_error = e.what();
    return status_of(e);
  } catch (const std::exception& e) {
    s->last_error = e.what();
    return PS_ERR_INTERNAL;
  }
}

AnalysisOptions analysis_options(const ps_session& s) {
  AnalysisOptions out;
  out.sweep.rel_tol = s.opt("tol", 1e-9);
  out.sweep.grid_points = static_cast<int>(s.opt("grid", 400));
  out.sweep.eps_scale = s.opt("eps", 1e-3);
  out.sweep.threads = std::max(1, static_cast<int>(s.opt("threads", 1)));
  out.margin_floor = s.opt("margin_floor", 0.05);
  out.refine_theta = s.opt("refine", 0.0) != 0.0;
  return out;
}

const AgentSet& need_agents(const ps_session& s) {
  require(s.agents.has_value(), ErrorCode::Input,
          "no agent file loaded");
  return *s.agents;
}

const WeightedDigraph& need_network(const ps_session& s) {
  require(s.network.has_value(), ErrorCode::Input, "no network file loaded");
  return *s.network;
}

std::vector<TransferMatrix> controller_systems(const ControllerSet& set,
                                               double epsilon) {
  std::vector<TransferMatrix> out;
  for (const auto& c : set.controllers)
    out.push_back(TransferMatrix::stable(c.scaled(epsilon).realize(), set.m));
  return out;
}

}  // namespace

extern "C" {

const char* ps_version(void) { return "phasesync 1.0.0"; }

ps_session* ps_session_new(void) { return new ps_session(); }

void ps_session_free(ps_session* s) { delete s; }

const char* ps_last_error(const ps_session* s) {
  return s ? s->last_error.c_str() : "null session";
}

ps_status ps_set_option(ps_session* s, const char* key, double value) {
  return guarded(s, [&]() -> ps_status {
    static const char* known[] = {"tol",   "grid",   "eps",          "seed",
                                  "tfinal", "dt",    "refine",
                                  "margin_floor",    "eps_min",      "threads"};
    require(key != nullptr, ErrorCode::Input, "option key is null");
    for (const char* k : known) {
      if (std::strcmp(key, k) == 0) {
        s->opts[key] = value;
        return PS_OK;
      }
    }
    fail(ErrorCode::Input, std::string("unknown option '") + key + "'");
  });
}

ps_status ps_load_network(ps_session* s, const char* json_text) {
  return guarded(s, [&]() -> ps_status {
    require(json_text != nullptr, ErrorCode::Input, "network text is null");
    s->network = network_from_json(parse_json_text(json_text));
    return PS_OK;
  });
}

ps_status ps_load_agents(ps_session* s, const char* json_text) {
  return guarded(s, [&]() -> ps_status {
    require(json_text != nullptr, ErrorCode::Input, "agent text is null");
    s->agents = agents_from_json(parse_json_text(json_text));
    return PS_OK;
  });
}

ps_status ps_load_controllers(ps_session* s, const char* json_text) {
  return guarded(s, [&]() -> ps_status {
    require(json_text != nullptr, ErrorCode::Input,
            "controller text is null");
    s->controllers = controllers_from_json(parse_json_text(json_text));
    return PS_OK;
  });
}

ps_status ps_matrix_phases(ps_session* s, const char* matrix_json,
                           char** report_json) {
  return guarded(s, [&]() -> ps_status {
    require(matrix_json != nullptr && report_json != nullptr,
            ErrorCode::Input, "null argument");
    json j = parse_json_text(matrix_json);
    if (j.is_object() && j.contains("matrix")) j = j["matrix"];
    CMat M = complex_matrix_from_json(j);
    require(M.rows() == M.cols(), ErrorCode::Input,
            "phase analysis needs a square matrix");
    PhaseOptions popts;
    popts.rel_tol = s->opt("tol", 1e-9);
    PhaseProfile prof = phases(M, popts);  // throws Domain when unsuitable
    *report_json = dup_string(phase_report_json(prof).dump(2));
    return PS_OK;
  });
}

ps_status ps_laplacian_phases(ps_session* s, char** report_json) {
  return guarded(s, [&]() -> ps_status {
    require(report_json != nullptr, ErrorCode::Input, "null argument");
    const auto& G = need_network(*s);
    auto conn = connectivity(G);
    auto dec = frobenius_form(G);
    auto thetas = component_phase_bounds(dec, s->opt("refine", 0.0) != 0.0);
    *report_json =
        dup_string(laplacian_report_json(dec, thetas, conn).dump(2));
    return PS_OK;
  });
}

ps_status ps_analyze(ps_session* s, const char* mode, char** verdict_json,
                     char** margins_csv_out) {
  return guarded(s, [&]() -> ps_status {
    require(mode != nullptr && verdict_json != nullptr &&
                margins_csv_out != nullptr,
            ErrorCode::Input, "null argument");
    const auto& G = need_network(*s);
    const auto& agents = need_agents(*s);
    require(s->controllers.has_value(), ErrorCode::Input,
            "analysis requires a controller (or edge dynamics) file");
    auto opts = analysis_options(*s);
    std::string m(mode);

    AnalysisVerdict v;
    auto dyn = controller_systems(*s->controllers, s->controllers->epsilon);
    if (m == "edges") {
      v = check_edge_dynamics(agents.agents, dyn, G, opts);
    } else if (m == "controllers" || m == "per-agent" || m == "uniform") {
      require(dyn.size() == 1 || dyn.size() == agents.agents.size(),
              ErrorCode::Input,
              "need one controller or one per agent for this mode");
      v = check_agent_controllers(agents.agents, dyn, G, opts);
    } else {
      fail(ErrorCode::Input, "unknown analysis mode '" + m + "'");
    }
    *verdict_json = dup_string(verdict_to_json(v).dump(2));
    *margins_csv_out = dup_string(margins_csv(v));
    if (!v.preconditions_ok) {
      s->last_error = v.precondition_failure;
      return PS_ERR_PRECONDITION;
    }
    return v.holds ? PS_OK : PS_FAIL;
  });
}

ps_status ps_design(ps_session* s, const char* mode, char** design_json,
                    char** controllers_json) {
  return guarded(s, [&]() -> ps_status {
    require(mode != nullptr && design_json != nullptr, ErrorCode::Input,
            "null argument");
    const auto& G = need_network(*s);
    const auto& agents = need_agents(*s);
    DesignOptions opts;
    opts.lmi.seed = static_cast<std::uint64_t>(s->opt("seed", 0));
    opts.refine_theta = s->opt("refine", 0.0) != 0.0;
    opts.eps_min = s->opt("eps_min", 1e-8);

    std::string m(mode);
    DesignResult res;
    if (m == "uniform") {
      res = design_uniform(agents.agents, G, opts);
    } else if (m == "per-agent") {
      res = design_per_agent(agents.agents, G, opts);
    } else {
      fail(ErrorCode::Input, "unknown design mode '" + m + "'");
    }
    s->last_design = res;
    *design_json = dup_string(design_to_json(res).dump(2));
    if (controllers_json != nullptr) {
      *controllers_json = nullptr;
      if (res.feasible) {
        ControllerSet set = controllers_from_design(res, agents.m);
        json cj;
        cj["m"] = set.m;
        cj["epsilon"] = set.epsilon;
        cj["uniform"] = set.uniform;
        json list = json::array();
        for (const auto& c : set.controllers) {
          json rows = json::array();
          for (int i = 0; i < c.rows; ++i) {
            json row = json::array();
            for (int k = 0; k < c.cols; ++k)
              row.push_back(
                  json{{"num", c.at(i, k).num}, {"den", c.at(i, k).den}});
            rows.push_back(row);
          }
          list.push_back(json{{"entries", rows}});
        }
        cj["controllers"] = list;
        *controllers_json = dup_string(cj.dump(2));
      }
    }
    if (!res.feasible) {
      s->last_error = res.message;
      return PS_FAIL;
    }
    return PS_OK;
  });
}

ps_status ps_simulate(ps_session* s, const char* mode, const char* x0_json,
                      char** trajectory_csv_out, char** disagreement_csv_out,
                      char** report_json) {
  return guarded(s, [&]() -> ps_status {
    require(mode != nullptr && trajectory_csv_out != nullptr &&
                disagreement_csv_out != nullptr && report_json != nullptr,
            ErrorCode::Input, "null argument");
    const auto& G = need_network(*s);
    const auto& agents = need_agents(*s);
    std::string m(mode);

    ClosedLoop loop;
    if (m == "edges") {
      require(s->controllers.has_value(), ErrorCode::Input,
              "edge mode requires a controller file");
      auto dyn = controller_systems(*s->controllers, s->controllers->epsilon);
      loop = closed_loop_edges(agents.agents, dyn, G);
    } else if (m == "controllers" || m == "per-agent" || m == "uniform") {
      std::vector<TransferMatrix> ctrls;
      if (s->controllers.has_value()) {
        ctrls = controller_systems(*s->controllers, s->controllers->epsilon);
      } else if (s->last_design.has_value() && s->last_design->feasible) {
        ControllerSet set =
            controllers_from_design(*s->last_design, agents.m);
        ctrls = controller_systems(set, set.epsilon);
      } else {
        fail(ErrorCode::Input,
             "simulation requires a controller file or a prior design");
      }
      loop = closed_loop(agents.agents, ctrls, G);
    } else {
      fail(ErrorCode::Input, "unknown simulation mode '" + m + "'");
    }

    auto rep = verify_sync(loop);
    double slow = rep.slowest_stable < 0.0 ? rep.slowest_stable : -0.1;
    double T = s->opt("tfinal", 0.0);
    if (T <= 0.0)
      T = std::min(std::max(13.8 / std::max(1e-4, -slow), 20.0), 5000.0);
    double dt = s->opt("dt", 1e-2);

    RVec x0 = RVec::Zero(loop.sys.states());
    if (x0_json != nullptr && std::strlen(x0_json) > 0) {
      std::string spec(x0_json);
      if (spec == "random") {
        std::mt19937_64 rng(static_cast<std::uint64_t>(s->opt("seed", 0)));
        std::normal_distribution<double> gauss(0.0, 1.0);
        for (int i = 0; i < x0.size(); ++i) x0(i) = gauss(rng);
      } else {
        json j = parse_json_text(spec);
        require(j.is_array(), ErrorCode::Input,
                "x0 must be a JSON array or \"random\"");
        require(static_cast<int>(j.size()) == x0.size(), ErrorCode::Input,
                "x0 has dimension " + std::to_string(j.size()) +
                    " but the closed loop has " +
                    std::to_string(x0.size()) + " states");
        for (int i = 0; i < x0.size(); ++i) x0(i) = j[i].get<double>();
      }
    }

    auto traj = simulate(loop.sys, x0, T, dt);
    auto dis = disagreement(traj, loop.n_agents, loop.m);
    *trajectory_csv_out =
        dup_string(trajectory_csv(traj, loop.n_agents, loop.m));
    *disagreement_csv_out =
        dup_string(disagreement_csv(traj, dis, loop.n_agents, loop.m));

    json rj;
    rj["sync_pass"] = rep.pass;
    rj["reason"] = rep.reason;
    rj["tfinal"] = T;
    rj["dt"] = dt;
    rj["disagreement_tail"] = dis.tail_norm;
    rj["states"] = loop.sys.states();
    *report_json = dup_string(rj.dump(2));
    return PS_OK;
  });
}

ps_status ps_sweep(ps_session* s, char** csv) {
  return guarded(s, [&]() -> ps_status {
    require(csv != nullptr, ErrorCode::Input, "null argument");
    const auto& agents = need_agents(*s);
    auto opts = analysis_options(*s);

    std::vector<PhaseResponse> resps;
    std::vector<double> master;
    for (const auto& a : agents.agents) {
      auto r = phase_response(a, opts.sweep);
      std::vector<double> axis;
      for (const auto& smp : r.samples)
        if (smp.on_axis) axis.push_back(smp.omega);
      if (master.empty()) {
        master = axis;
      } else {
        std::vector<double> merged;
        std::merge(master.begin(), master.end(), axis.begin(), axis.end(),
                   std::back_inserter(merged));
        merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
        master = merged;
      }
      resps.push_back(std::move(r));
    }
    // Drop frequencies inside the pole indentations.
    std::vector<double> grid;
    for (double w : master) {
      bool near = false;
      for (double wk : agents.modes.omega)
        if (std::abs(w - wk) <= 1e-9 * (1.0 + wk)) near = true;
      if (!near) grid.push_back(w);
    }

    std::vector<std::vector<double>> hi, lo;
    std::vector<std::string> labels;
    for (size_t i = 0; i < agents.agents.size(); ++i) {
      auto prof = phases_along(agents.agents[i], grid,
                               center_near(resps[i], grid.front()),
                               opts.sweep.rel_tol);
      std::vector<double> h(grid.size()), l(grid.size());
      for (size_t k = 0; k < grid.size(); ++k) {
        h[k] = prof[k].phi_max();
        l[k] = prof[k].phi_min();
      }
      hi.push_back(std::move(h));
      lo.push_back(std::move(l));
      labels.push_back(agents.agents[i].name.empty()
                           ? "P" + std::to_string(i + 1)
                           : agents.agents[i].name);
    }
    *csv = dup_string(sweep_csv(grid, hi, lo, labels));
    return PS_OK;
  });
}

void ps_free(char* buf) { std::free(buf); }

}  // extern "C"
