// Simulation harness: flat key-value configuration, trajectory runs with
// deterministic CSV/JSON export, invariant-drift reports, phase-portrait
// sampling, and discrete-versus-continuous convergence tables.
#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "deps/sleigh.hpp"
#include "deps/suslov.hpp"

namespace deps {

/// Configuration or file-format problem; the CLI maps this to exit code 1.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

enum class SystemKind {
  suslov_cont,
  suslov_disc,
  sleigh_cont,
  sleigh_disc,
  sleigh_free,
  sleigh_naive,
};

enum class OutputFormat { csv, json };

struct SweepSpec {
  std::string param;
  double from = 0.0, to = 0.0;
  int count = 0;
};

struct SimConfig {
  SystemKind system = SystemKind::suslov_disc;
  long steps = 100;
  double dt = 0.01;  // continuous systems only
  BranchPolicy policy = BranchPolicy::continuity;
  OutputFormat format = OutputFormat::csv;
  std::string out = "trajectory.csv";
  NewtonConfig newton;

  // Suslov block.
  double j11 = 1.0, j22 = 2.0, j33 = 3.0, j12 = 0.1, j13 = 0.3, j23 = 0.2;
  double q1 = 0.1, q2 = 0.05;                    // discrete initial point
  Eigen::Vector3d m0{0.0, 0.0, 0.0};             // continuous initial momentum
  Eigen::Vector3d gamma{0.0, 0.0, 1.0};
  std::optional<Eigen::Matrix3d> inertia;        // defaults to tr(J) I - J

  // Sleigh block.
  SleighParams sleigh{1.0, 1.5, 1.0, 0.0};
  double dtheta0 = 0.1, v10 = 0.0;               // discrete initial displacement
  double ptheta0 = 0.3, p10 = 0.0;               // continuous initial momenta
  PoseSE2 pose0{0.0, 0.0, 0.0};

  std::optional<SweepSpec> sweep;

  MassTensor mass_tensor() const { return MassTensor(j11, j22, j33, j12, j13, j23); }
  InertiaOperator inertia_operator() const {
    return inertia ? InertiaOperator(*inertia) : InertiaOperator::from_mass_tensor(mass_tensor());
  }
};

SystemKind parse_system_kind(const std::string& name);
std::string system_kind_name(SystemKind k);

/// Parses the flat `key = value` format (one dotted level, '#' comments).
SimConfig parse_config_text(const std::string& text);
SimConfig parse_config_file(const std::string& path);

/// Applies a single `key=value` override on top of a parsed configuration.
void apply_override(SimConfig& cfg, const std::string& assignment);

struct RunOutcome {
  int exit_code = 0;  // 0 complete, 1 config error, 2 branch failure
  std::string message;
  std::vector<std::string> files_written;
};

/// Runs one trajectory (or a sweep of them) and writes the trajectory file
/// plus the invariant summary. Branch failures leave a partial trajectory
/// and exit code 2.
RunOutcome run(const SimConfig& cfg);

struct GridSpec {
  std::string xname, yname;
  double xlo = 0, xhi = 0, ylo = 0, yhi = 0;
  int nx = 1, ny = 1;
};

/// Parses "name=lo:hi:count,name=lo:hi:count".
GridSpec parse_grid_spec(const std::string& text);

/// Samples forward and backward orbits over a grid of initial conditions,
/// tagging each sample with its stationary-set classification.
RunOutcome phase_portrait(const SimConfig& cfg, const GridSpec& grid);

struct LimitRow {
  double eps = 0.0;
  double deviation = 0.0;     // sup-norm against the reference orbit
  double order = 0.0;         // log2(prev / this); NaN for the first row
};

struct LimitOutcome {
  std::vector<LimitRow> rows;
  bool order_ok = false;      // every measured order >= 0.9 (or exact match)
  int exit_code = 0;
  std::string message;
};

/// Scales the initial data by each epsilon, runs the discrete map over a
/// fixed arc, and measures the sup-norm deviation from the matching
/// continuous reference integrated with RK4.
LimitOutcome compare_limit(const SimConfig& cfg, const std::vector<double>& epsilons);

struct InvariantReport {
  std::string name;
  double initial = 0.0;
  double max_abs_drift = 0.0;
  double max_rel_drift = 0.0;
  long step_of_max = 0;
};

/// Reads a trajectory file produced by run(), recomputes every invariant
/// column from the state columns (self-consistency to 1e-12), and returns
/// the drift statistics. Throws ConfigError with a line reference on
/// malformed input.
std::vector<InvariantReport> invariant_report(const std::string& path);

}  // namespace deps
