// phasesync command line tool. Everything goes through the C API of the
// shared library; this translation unit never touches the C++ core.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>

#include "phasesync/phasesync_c.h"

namespace {

namespace fs = std::filesystem;

struct SessionDeleter {
  void operator()(ps_session* s) const { ps_session_free(s); }
};
using Session = std::unique_ptr<ps_session, SessionDeleter>;

struct Buffer {
  char* p = nullptr;
  ~Buffer() { ps_free(p); }
  std::string str() const { return p ? std::string(p) : std::string(); }
};

int exit_code(ps_status st) { return static_cast<int>(st); }

std::string read_file(const std::string& path, int& rc) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot read '" << path << "'\n";
    rc = 2;
    return {};
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    std::cerr << "error: cannot write '" << path.string() << "'\n";
    return false;
  }
  out << content;
  return true;
}

int report_error(const Session& s, ps_status st, const std::string& what) {
  std::cerr << "error (" << what << "): " << ps_last_error(s.get()) << "\n";
  return exit_code(st);
}

struct CommonOpts {
  std::string network, agents, controllers, mode = "uniform";
  std::string out_dir = ".";
  std::string x0 = "random";
  std::string matrix_file;
  double tfinal = 0.0, dt = 1e-2, eps = 1e-3, tol = 1e-9;
  double margin_floor = 0.05;
  long grid = 400, seed = 0;
  bool refine = false;
};

int load_inputs(Session& s, const CommonOpts& o, bool need_net,
                bool need_agents, bool need_ctrl) {
  int rc = 0;
  auto push = [&](const std::string& path,
                  ps_status (*fn)(ps_session*, const char*),
                  const char* what) -> int {
    std::string text = read_file(path, rc);
    if (rc != 0) return rc;
    ps_status st = fn(s.get(), text.c_str());
    if (st != PS_OK) return report_error(s, st, what);
    return 0;
  };
  if (need_net || !o.network.empty()) {
    if (o.network.empty()) {
      std::cerr << "error: --network is required\n";
      return 2;
    }
    if (int r = push(o.network, ps_load_network, "network")) return r;
  }
  if (need_agents || !o.agents.empty()) {
    if (o.agents.empty()) {
      std::cerr << "error: --agents is required\n";
      return 2;
    }
    if (int r = push(o.agents, ps_load_agents, "agents")) return r;
  }
  if (need_ctrl || !o.controllers.empty()) {
    if (o.controllers.empty()) {
      std::cerr << "error: --controllers is required\n";
      return 2;
    }
    if (int r = push(o.controllers, ps_load_controllers, "controllers"))
      return r;
  }
  return 0;
}

void apply_options(Session& s, const CommonOpts& o) {
  ps_set_option(s.get(), "tol", o.tol);
  ps_set_option(s.get(), "grid", static_cast<double>(o.grid));
  ps_set_option(s.get(), "eps", o.eps);
  ps_set_option(s.get(), "seed", static_cast<double>(o.seed));
  ps_set_option(s.get(), "dt", o.dt);
  ps_set_option(s.get(), "margin_floor", o.margin_floor);
  if (o.tfinal > 0.0) ps_set_option(s.get(), "tfinal", o.tfinal);
  ps_set_option(s.get(), "refine", o.refine ? 1.0 : 0.0);
  if (const char* env = std::getenv("PHASESYNC_THREADS"))
    ps_set_option(s.get(), "threads", std::atof(env));
}

const char* kPlotScript =
    "# gnuplot script: agent outputs and disagreement\n"
    "set datafile separator ','\n"
    "set key autotitle columnhead\n"
    "set xlabel 't'\n"
    "set terminal pngcairo size 1100,420\n"
    "set output 'outputs.png'\n"
    "set multiplot layout 1,2\n"
    "set title 'agent outputs'\n"
    "plot for [c=2:*] 'trajectories.csv' using 1:c with lines\n"
    "set title 'disagreement'\n"
    "plot for [c=2:*] 'disagreement.csv' using 1:c with lines\n"
    "unset multiplot\n";

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Matrix and LTI system phases, synchronization analysis, "
               "controller synthesis, and closed-loop simulation"};
  app.require_subcommand(1);

  CommonOpts o;
  app.add_option("--network", o.network, "Network JSON file");
  app.add_option("--agents", o.agents, "Agent set JSON file");
  app.add_option("--controllers", o.controllers,
                 "Controller / edge dynamics JSON file");
  app.add_option("--mode", o.mode,
                 "edges | controllers | per-agent | uniform");
  app.add_option("--tfinal", o.tfinal, "Simulation horizon (0 = auto)");
  app.add_option("--dt", o.dt, "Simulation step");
  app.add_option("--eps", o.eps, "Indentation radius factor");
  app.add_option("--grid", o.grid, "Frequency grid density");
  app.add_option("--tol", o.tol, "Relative sectoriality tolerance");
  app.add_option("--margin-floor", o.margin_floor,
                 "Smallest margin accepted as a positive verdict");
  app.add_option("--out", o.out_dir, "Output directory");
  app.add_option("--seed", o.seed, "Seed for all randomized steps");
  app.add_flag("--refine", o.refine,
               "Tighten component essential-phase bounds numerically");
  app.add_option("--x0", o.x0,
                 "Initial state: JSON array, 'random', or 'zero'");

  auto* cmd_phases =
      app.add_subcommand("phases", "Classify a matrix and list its phases");
  cmd_phases->add_option("matrix", o.matrix_file, "Complex matrix JSON file")
      ->required();
  auto* cmd_lap = app.add_subcommand(
      "lap-phase", "Essential phases of the network Laplacian blocks");
  auto* cmd_analyze = app.add_subcommand(
      "analyze", "Check the synchronization phase conditions");
  auto* cmd_design =
      app.add_subcommand("design", "Synthesize synchronizing controllers");
  auto* cmd_sim =
      app.add_subcommand("simulate", "Closed-loop time-domain simulation");
  auto* cmd_sweep =
      app.add_subcommand("sweep", "Phase responses of the loaded agents");
  for (auto* sub : {cmd_phases, cmd_lap, cmd_analyze, cmd_design, cmd_sim,
                    cmd_sweep})
    sub->fallthrough();

  CLI11_PARSE(app, argc, argv);

  Session s(ps_session_new());
  apply_options(s, o);
  fs::path out_dir(o.out_dir);
  std::error_code ec;
  fs::create_directories(out_dir, ec);

  if (cmd_phases->parsed()) {
    int rc = 0;
    std::string text = read_file(o.matrix_file, rc);
    if (rc != 0) return rc;
    Buffer rep;
    ps_status st = ps_matrix_phases(s.get(), text.c_str(), &rep.p);
    if (st != PS_OK) return report_error(s, st, "phases");
    std::cout << rep.str() << "\n";
    write_file(out_dir / "phases.json", rep.str());
    return 0;
  }

  if (cmd_lap->parsed()) {
    if (int r = load_inputs(s, o, true, false, false)) return r;
    Buffer rep;
    ps_status st = ps_laplacian_phases(s.get(), &rep.p);
    if (st != PS_OK) return report_error(s, st, "lap-phase");
    std::cout << rep.str() << "\n";
    write_file(out_dir / "lap_phase.json", rep.str());
    return 0;
  }

  if (cmd_analyze->parsed()) {
    if (int r = load_inputs(s, o, true, true, true)) return r;
    Buffer verdict, margins;
    ps_status st = ps_analyze(s.get(), o.mode.c_str(), &verdict.p, &margins.p);
    if (st != PS_OK && st != PS_FAIL) return report_error(s, st, "analyze");
    std::cout << verdict.str() << "\n";
    write_file(out_dir / "verdict.json", verdict.str());
    write_file(out_dir / "margins.csv", margins.str());
    return exit_code(st);
  }

  if (cmd_design->parsed()) {
    if (int r = load_inputs(s, o, true, true, false)) return r;
    Buffer design, ctrl;
    ps_status st = ps_design(s.get(), o.mode.c_str(), &design.p, &ctrl.p);
    if (st != PS_OK && st != PS_FAIL) return report_error(s, st, "design");
    std::cout << design.str() << "\n";
    write_file(out_dir / "design.json", design.str());
    if (st == PS_OK && ctrl.p)
      write_file(out_dir / "controllers.json", ctrl.str());
    return exit_code(st);
  }

  if (cmd_sim->parsed()) {
    if (o.controllers.empty()) {
      std::cerr << "error: --controllers is required for simulate\n";
      return 2;
    }
    if (int r = load_inputs(s, o, true, true, true)) return r;
    std::string x0 = o.x0 == "zero" ? "" : o.x0;
    Buffer traj, dis, rep;
    ps_status st = ps_simulate(s.get(), o.mode.c_str(), x0.c_str(), &traj.p,
                               &dis.p, &rep.p);
    if (st != PS_OK) return report_error(s, st, "simulate");
    std::cout << rep.str() << "\n";
    write_file(out_dir / "trajectories.csv", traj.str());
    write_file(out_dir / "disagreement.csv", dis.str());
    write_file(out_dir / "report.json", rep.str());
    write_file(out_dir / "plot.gp", kPlotScript);
    return 0;
  }

  if (cmd_sweep->parsed()) {
    if (int r = load_inputs(s, o, false, true, false)) return r;
    Buffer csv;
    ps_status st = ps_sweep(s.get(), &csv.p);
    if (st != PS_OK) return report_error(s, st, "sweep");
    write_file(out_dir / "sweep.csv", csv.str());
    std::cout << "wrote " << (out_dir / "sweep.csv").string() << "\n";
    return 0;
  }

  return 2;
}
