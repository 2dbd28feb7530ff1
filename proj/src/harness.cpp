#include "deps/harness.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace deps {

namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config field '" + key + "': not a number: '" + value + "'");
  }
}

long to_long(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    const long v = std::stol(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config field '" + key + "': not an integer: '" + value + "'");
  }
}

BranchPolicy parse_policy(const std::string& name) {
  if (name == "continuity") return BranchPolicy::continuity;
  if (name == "smallest") return BranchPolicy::smallest_norm;
  if (name == "largest") return BranchPolicy::largest_norm;
  throw ConfigError("config field 'policy': unknown value '" + name + "'");
}

std::string policy_name(BranchPolicy p) {
  switch (p) {
    case BranchPolicy::continuity: return "continuity";
    case BranchPolicy::smallest_norm: return "smallest";
    case BranchPolicy::largest_norm: return "largest";
  }
  return "continuity";
}

/// Assigns one key to the configuration; shared by the file parser, the
/// command-line overrides, and the trajectory-file config echo.
void set_key(SimConfig& cfg, const std::string& key, const std::string& value) {
  auto ensure_inertia = [&]() -> Eigen::Matrix3d& {
    if (!cfg.inertia) cfg.inertia = Eigen::Matrix3d::Zero();
    return *cfg.inertia;
  };
  if (key == "system") {
    cfg.system = parse_system_kind(value);
  } else if (key == "steps") {
    cfg.steps = to_long(key, value);
    if (cfg.steps < 0) throw ConfigError("config field 'steps': must be >= 0");
  } else if (key == "dt") {
    cfg.dt = to_double(key, value);
    if (!(cfg.dt > 0)) throw ConfigError("config field 'dt': must be > 0");
  } else if (key == "policy") {
    cfg.policy = parse_policy(value);
  } else if (key == "format") {
    if (value == "csv") cfg.format = OutputFormat::csv;
    else if (value == "json") cfg.format = OutputFormat::json;
    else throw ConfigError("config field 'format': expected csv or json");
  } else if (key == "out") {
    cfg.out = value;
  } else if (key == "newton.tol") {
    cfg.newton.residual_tol = to_double(key, value);
  } else if (key == "newton.max_iter") {
    cfg.newton.max_iter = static_cast<int>(to_long(key, value));
  } else if (key == "suslov.J11") {
    cfg.j11 = to_double(key, value);
  } else if (key == "suslov.J22") {
    cfg.j22 = to_double(key, value);
  } else if (key == "suslov.J33") {
    cfg.j33 = to_double(key, value);
  } else if (key == "suslov.J12") {
    cfg.j12 = to_double(key, value);
  } else if (key == "suslov.J13") {
    cfg.j13 = to_double(key, value);
  } else if (key == "suslov.J23") {
    cfg.j23 = to_double(key, value);
  } else if (key == "suslov.q1") {
    cfg.q1 = to_double(key, value);
  } else if (key == "suslov.q2") {
    cfg.q2 = to_double(key, value);
  } else if (key == "suslov.M1") {
    cfg.m0(0) = to_double(key, value);
  } else if (key == "suslov.M2") {
    cfg.m0(1) = to_double(key, value);
  } else if (key == "suslov.M3") {
    cfg.m0(2) = to_double(key, value);
  } else if (key == "suslov.gamma1") {
    cfg.gamma(0) = to_double(key, value);
  } else if (key == "suslov.gamma2") {
    cfg.gamma(1) = to_double(key, value);
  } else if (key == "suslov.gamma3") {
    cfg.gamma(2) = to_double(key, value);
  } else if (key.rfind("suslov.I", 0) == 0 && key.size() == 10) {
    const int r = key[8] - '1', c = key[9] - '1';
    if (r < 0 || r > 2 || c < 0 || c > 2) throw ConfigError("unknown config field '" + key + "'");
    Eigen::Matrix3d& in = ensure_inertia();
    in(r, c) = in(c, r) = to_double(key, value);
  } else if (key == "sleigh.m") {
    cfg.sleigh = SleighParams(to_double(key, value), cfg.sleigh.J, cfg.sleigh.a, cfg.sleigh.b);
  } else if (key == "sleigh.J") {
    cfg.sleigh = SleighParams(cfg.sleigh.m, to_double(key, value), cfg.sleigh.a, cfg.sleigh.b);
  } else if (key == "sleigh.a") {
    cfg.sleigh = SleighParams(cfg.sleigh.m, cfg.sleigh.J, to_double(key, value), cfg.sleigh.b);
  } else if (key == "sleigh.b") {
    cfg.sleigh = SleighParams(cfg.sleigh.m, cfg.sleigh.J, cfg.sleigh.a, to_double(key, value));
  } else if (key == "sleigh.dtheta") {
    cfg.dtheta0 = to_double(key, value);
  } else if (key == "sleigh.V1") {
    cfg.v10 = to_double(key, value);
  } else if (key == "sleigh.ptheta") {
    cfg.ptheta0 = to_double(key, value);
  } else if (key == "sleigh.p1") {
    cfg.p10 = to_double(key, value);
  } else if (key == "sleigh.theta0") {
    cfg.pose0 = PoseSE2(to_double(key, value), cfg.pose0.x, cfg.pose0.y);
  } else if (key == "sleigh.x0") {
    cfg.pose0 = PoseSE2(cfg.pose0.theta, to_double(key, value), cfg.pose0.y);
  } else if (key == "sleigh.y0") {
    cfg.pose0 = PoseSE2(cfg.pose0.theta, cfg.pose0.x, to_double(key, value));
  } else if (key == "sweep.param") {
    if (!cfg.sweep) cfg.sweep = SweepSpec{};
    cfg.sweep->param = value;
  } else if (key == "sweep.from") {
    if (!cfg.sweep) cfg.sweep = SweepSpec{};
    cfg.sweep->from = to_double(key, value);
  } else if (key == "sweep.to") {
    if (!cfg.sweep) cfg.sweep = SweepSpec{};
    cfg.sweep->to = to_double(key, value);
  } else if (key == "sweep.count") {
    if (!cfg.sweep) cfg.sweep = SweepSpec{};
    cfg.sweep->count = static_cast<int>(to_long(key, value));
  } else {
    throw ConfigError("unknown config field '" + key + "'");
  }
}

/// Canonical flat serialization of a configuration, the inverse of set_key.
std::vector<std::pair<std::string, std::string>> serialize_config(const SimConfig& cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  out.emplace_back("system", system_kind_name(cfg.system));
  out.emplace_back("steps", std::to_string(cfg.steps));
  out.emplace_back("dt", fmt(cfg.dt));
  out.emplace_back("policy", policy_name(cfg.policy));
  switch (cfg.system) {
    case SystemKind::suslov_cont:
    case SystemKind::suslov_disc: {
      out.emplace_back("suslov.J11", fmt(cfg.j11));
      out.emplace_back("suslov.J22", fmt(cfg.j22));
      out.emplace_back("suslov.J33", fmt(cfg.j33));
      out.emplace_back("suslov.J12", fmt(cfg.j12));
      out.emplace_back("suslov.J13", fmt(cfg.j13));
      out.emplace_back("suslov.J23", fmt(cfg.j23));
      out.emplace_back("suslov.q1", fmt(cfg.q1));
      out.emplace_back("suslov.q2", fmt(cfg.q2));
      out.emplace_back("suslov.M1", fmt(cfg.m0(0)));
      out.emplace_back("suslov.M2", fmt(cfg.m0(1)));
      out.emplace_back("suslov.M3", fmt(cfg.m0(2)));
      out.emplace_back("suslov.gamma1", fmt(cfg.gamma(0)));
      out.emplace_back("suslov.gamma2", fmt(cfg.gamma(1)));
      out.emplace_back("suslov.gamma3", fmt(cfg.gamma(2)));
      if (cfg.inertia) {
        const Eigen::Matrix3d& in = *cfg.inertia;
        const char* keys[6] = {"suslov.I11", "suslov.I22", "suslov.I33",
                               "suslov.I12", "suslov.I13", "suslov.I23"};
        const double vals[6] = {in(0, 0), in(1, 1), in(2, 2), in(0, 1), in(0, 2), in(1, 2)};
        for (int i = 0; i < 6; ++i) out.emplace_back(keys[i], fmt(vals[i]));
      }
      break;
    }
    default: {
      out.emplace_back("sleigh.m", fmt(cfg.sleigh.m));
      out.emplace_back("sleigh.J", fmt(cfg.sleigh.J));
      out.emplace_back("sleigh.a", fmt(cfg.sleigh.a));
      out.emplace_back("sleigh.b", fmt(cfg.sleigh.b));
      out.emplace_back("sleigh.dtheta", fmt(cfg.dtheta0));
      out.emplace_back("sleigh.V1", fmt(cfg.v10));
      out.emplace_back("sleigh.ptheta", fmt(cfg.ptheta0));
      out.emplace_back("sleigh.p1", fmt(cfg.p10));
      out.emplace_back("sleigh.theta0", fmt(cfg.pose0.theta));
      out.emplace_back("sleigh.x0", fmt(cfg.pose0.x));
      out.emplace_back("sleigh.y0", fmt(cfg.pose0.y));
      break;
    }
  }
  return out;
}

// =====================
// Trajectory assembly
// =====================

struct Trajectory {
  std::vector<std::string> columns;
  std::vector<std::string> invariant_columns;
  std::vector<std::vector<double>> rows;
  int exit_code = 0;
  std::string message;
};

void push_row(Trajectory& t, std::initializer_list<double> vals) {
  t.rows.emplace_back(vals);
}

Eigen::Vector3d project_to_constraint(Eigen::Vector3d m, const InertiaOperator& in,
                                      const Eigen::Vector3d& gamma) {
  // Adjusts the component along I^{-1} gamma so that (I^{-1} M, gamma) = 0.
  const Eigen::Vector3d ig = in.solve(gamma);
  return m - ig * m.dot(ig) / ig.squaredNorm();
}

/// One backward step of the momentum flow: RK4 on the time-reversed field.
Eigen::Vector3d suslov_rk4_step_back(const Eigen::Vector3d& m, const InertiaOperator& in,
                                     const Eigen::Vector3d& gamma, double dt) {
  auto f = [&](const Eigen::Vector3d& x) { return (-suslov_rhs(x, in, gamma)).eval(); };
  const Eigen::Vector3d k1 = f(m);
  const Eigen::Vector3d k2 = f(m + 0.5 * dt * k1);
  const Eigen::Vector3d k3 = f(m + 0.5 * dt * k2);
  const Eigen::Vector3d k4 = f(m + dt * k3);
  return m + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory run_suslov_disc(const SimConfig& cfg) {
  Trajectory t;
  t.columns = {"k", "q0", "q1", "q2", "M1", "M2", "M3", "quad_integral", "quartic_H",
               "full_energy", "constraint_residual", "branch", "root_count", "iterations"};
  t.invariant_columns = {"quad_integral", "quartic_H", "full_energy"};
  const MassTensor j = cfg.mass_tensor();
  const InertiaOperator in = cfg.inertia_operator();
  SuslovDiscreteState st{AdmissibleRotation::from_disk(cfg.q1, cfg.q2), std::nullopt, {}};

  auto emit = [&](long k, const SuslovStepReport* rep) {
    const Eigen::Vector3d m = momentum_from_q(st.q, j);
    const double cres =
        std::abs(st.q.q0 * st.q.q0 + st.q.q1 * st.q.q1 + st.q.q2 * st.q.q2 - 1.0);
    push_row(t, {static_cast<double>(k), st.q.q0, st.q.q1, st.q.q2, m(0), m(1), m(2),
                 suslov_quadratic_integral(m, j), suslov_quartic_integral(st.q, j),
                 suslov_energy(m, in), cres, rep ? static_cast<double>(rep->chosen_index) : -1.0,
                 rep ? static_cast<double>(rep->root_count) : 0.0,
                 rep ? static_cast<double>(rep->iterations) : 0.0});
  };
  emit(0, nullptr);
  for (long k = 1; k <= cfg.steps; ++k) {
    const SuslovStepReport rep = suslov_step(st, j, cfg.policy, cfg.newton);
    if (rep.status != StepStatus::ok) {
      t.exit_code = 2;
      t.message = "branch failure at step " + std::to_string(k) +
                  " (real roots found: " + std::to_string(rep.root_count) + ")";
      break;
    }
    emit(k, &rep);
  }
  return t;
}

Trajectory run_suslov_cont(const SimConfig& cfg) {
  Trajectory t;
  t.columns = {"k", "t", "M1", "M2", "M3", "energy", "reduced_energy", "degenerate_integral",
               "constraint_residual"};
  t.invariant_columns = {"energy"};
  const InertiaOperator in = cfg.inertia_operator();
  if (cfg.gamma.norm() == 0.0) {
    throw ConfigError("config field 'suslov.gamma3': gamma must be nonzero");
  }
  const Eigen::Vector3d gamma = cfg.gamma;  // unit by the time we get here
  const bool diag = in.is_diagonal(1e-12);
  const bool gamma_e3 = (gamma - Eigen::Vector3d(0, 0, 1)).norm() < 1e-12;
  if (diag) t.invariant_columns.push_back("degenerate_integral");
  if (gamma_e3) t.invariant_columns.push_back("reduced_energy");

  Eigen::Vector3d m = project_to_constraint(cfg.m0, in, gamma);
  auto emit = [&](long k) {
    const double deg = diag ? suslov_degenerate_integral(m, in, gamma)
                            : std::numeric_limits<double>::quiet_NaN();
    push_row(t, {static_cast<double>(k), k * cfg.dt, m(0), m(1), m(2), suslov_energy(m, in),
                 suslov_reduced_energy(m, in), deg, in.solve(m).dot(gamma)});
  };
  emit(0);
  for (long k = 1; k <= cfg.steps; ++k) {
    m = suslov_rk4_step(m, in, gamma, cfg.dt);
    emit(k);
  }
  return t;
}

/// Center of the circle swept by the a = 0 sleigh from a given start pose
/// and constant displacement; returns false for a straight-line motion.
bool sleigh_circle_center(const PoseSE2& pose0, double dtheta, double v1, double& cx,
                          double& cy) {
  if (std::abs(std::sin(dtheta)) < 1e-12) return false;
  const double v2 = v2_from_constraint(dtheta, v1);
  const double det = 2.0 * (1.0 - std::cos(dtheta));
  const double fx = ((1.0 - std::cos(dtheta)) * v1 - std::sin(dtheta) * v2) / det;
  const double fy = (std::sin(dtheta) * v1 + (1.0 - std::cos(dtheta)) * v2) / det;
  cx = pose0.x + std::cos(pose0.theta) * fx - std::sin(pose0.theta) * fy;
  cy = pose0.y + std::sin(pose0.theta) * fx + std::cos(pose0.theta) * fy;
  return true;
}

Trajectory run_sleigh_disc(const SimConfig& cfg) {
  Trajectory t;
  t.columns = {"k", "dtheta", "V1", "V2", "p_theta", "p1", "p2", "theta", "x", "y",
               "energy", "constraint_residual", "lambda", "branch", "root_count", "iterations"};
  t.invariant_columns = {"energy"};
  const SleighParams& p = cfg.sleigh;
  SleighDisplacement d = SleighDisplacement::from_chart(cfg.dtheta0, cfg.v10);
  PoseSE2 pose = cfg.pose0;

  // For a = 0 the contact point stays on a circle; expose its radius so the
  // invariant summary reports the radial deviation directly.
  double cx = 0.0, cy = 0.0;
  const bool circle =
      p.a == 0.0 && sleigh_circle_center(cfg.pose0, cfg.dtheta0, cfg.v10, cx, cy);
  if (circle) {
    t.columns.push_back("orbit_radius");
    t.invariant_columns.push_back("orbit_radius");
  }

  auto emit = [&](long k, const SleighStepReport* rep) {
    const Eigen::Vector3d pm = discrete_momentum_se2(d, p);
    push_row(t, {static_cast<double>(k), d.dtheta, d.v1, d.v2, pm(0), pm(1), pm(2), pose.theta,
                 pose.x, pose.y, sleigh_energy(pm(0), pm(1), p),
                 constraint_residual(d.dtheta, d.v1, d.v2),
                 rep ? rep->lambda : 0.0, rep ? static_cast<double>(rep->chosen_index) : -1.0,
                 rep ? static_cast<double>(rep->root_count) : 0.0,
                 rep ? static_cast<double>(rep->iterations) : 0.0});
    if (circle) t.rows.back().push_back(std::hypot(pose.x - cx, pose.y - cy));
  };
  emit(0, nullptr);
  for (long k = 1; k <= cfg.steps; ++k) {
    const SleighStepResult r = sleigh_step(d, p, cfg.policy, cfg.newton);
    if (r.report.status != StepStatus::ok) {
      t.exit_code = 2;
      t.message = "branch failure at step " + std::to_string(k) +
                  " (real roots found: " + std::to_string(r.report.root_count) + ")";
      break;
    }
    pose = se2_compose(pose, PoseSE2(d.dtheta, d.v1, d.v2));
    d = r.next;
    emit(k, &r.report);
  }
  return t;
}

Trajectory run_sleigh_cont(const SimConfig& cfg) {
  Trajectory t;
  t.columns = {"k", "t", "p_theta", "p1", "theta", "x", "y", "energy"};
  t.invariant_columns = {"energy"};
  const SleighParams& p = cfg.sleigh;

  // Momenta plus pose as one first-order system.
  using State5 = Eigen::Matrix<double, 5, 1>;
  auto rhs = [&](const State5& s) {
    const Eigen::Vector2d dp = sleigh_continuous_rhs(s(0), s(1), p);
    const double omega = (s(0) + p.b * s(1)) / (p.J + p.m * p.a * p.a);
    const double v1 = s(1) / p.m + p.b * omega;
    State5 d;
    d << dp(0), dp(1), omega, v1 * std::cos(s(2)), v1 * std::sin(s(2));
    return d;
  };
  State5 s;
  s << cfg.ptheta0, cfg.p10, cfg.pose0.theta, cfg.pose0.x, cfg.pose0.y;
  auto emit = [&](long k) {
    push_row(t, {static_cast<double>(k), k * cfg.dt, s(0), s(1), wrap_angle(s(2)), s(3), s(4),
                 sleigh_energy(s(0), s(1), p)});
  };
  emit(0);
  for (long k = 1; k <= cfg.steps; ++k) {
    const State5 k1 = rhs(s);
    const State5 k2 = rhs(s + 0.5 * cfg.dt * k1);
    const State5 k3 = rhs(s + 0.5 * cfg.dt * k2);
    const State5 k4 = rhs(s + cfg.dt * k3);
    s += cfg.dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4);
    emit(k);
  }
  return t;
}

Trajectory run_sleigh_free(const SimConfig& cfg) {
  Trajectory t;
  t.columns = {"k", "dtheta", "V1", "V2", "p_theta", "p1", "p2", "theta", "x", "y",
               "coad_invariant"};
  t.invariant_columns = {"coad_invariant"};
  const SleighParams& p = cfg.sleigh;
  // The free map ignores the admissible variety; V2 starts from the chart
  // value of the configured displacement.
  Eigen::Vector3d d(cfg.dtheta0, cfg.v10, v2_from_constraint(cfg.dtheta0, cfg.v10));
  Eigen::Vector3d pm = discrete_momentum_se2(d(0), d(1), d(2), p);
  PoseSE2 pose = cfg.pose0;

  auto emit = [&](long k) {
    push_row(t, {static_cast<double>(k), d(0), d(1), d(2), pm(0), pm(1), pm(2), pose.theta,
                 pose.x, pose.y, pm(1) * pm(1) + pm(2) * pm(2)});
  };
  emit(0);
  for (long k = 1; k <= cfg.steps; ++k) {
    pose = se2_compose(pose, PoseSE2(d(0), d(1), d(2)));
    pm = coad_se2(d(0), d(1), d(2), pm);
    try {
      d = sleigh_free_legendre_inverse(pm, p, d(0));
    } catch (const std::domain_error&) {
      t.exit_code = 2;
      t.message = "branch failure at step " + std::to_string(k) +
                  " (no real displacement angle)";
      break;
    }
    emit(k);
  }
  return t;
}

Trajectory run_sleigh_naive(const SimConfig& cfg) {
  Trajectory t;
  t.columns = {"k", "dtheta", "V1", "p_theta", "p1", "p2", "theta", "x", "y", "energy"};
  t.invariant_columns = {"energy"};
  const SleighParams& p = cfg.sleigh;
  double dtheta = cfg.dtheta0, v1 = cfg.v10;
  PoseSE2 pose = cfg.pose0;

  auto emit = [&](long k) {
    const Eigen::Vector3d pm = discrete_momentum_se2(dtheta, v1, 0.0, p);
    push_row(t, {static_cast<double>(k), dtheta, v1, pm(0), pm(1), pm(2), pose.theta, pose.x,
                 pose.y, sleigh_energy(pm(0), pm(1), p)});
  };
  emit(0);
  for (long k = 1; k <= cfg.steps; ++k) {
    pose = se2_compose(pose, PoseSE2(dtheta, v1, 0.0));
    const NaiveStepResult r = sleigh_naive_step(dtheta, v1, p);
    if (r.status != StepStatus::ok) {
      t.exit_code = 2;
      t.message = "branch failure at step " + std::to_string(k);
      break;
    }
    dtheta = r.dtheta;
    v1 = r.v1;
    emit(k);
  }
  return t;
}

Trajectory run_system(const SimConfig& cfg) {
  switch (cfg.system) {
    case SystemKind::suslov_disc: return run_suslov_disc(cfg);
    case SystemKind::suslov_cont: return run_suslov_cont(cfg);
    case SystemKind::sleigh_disc: return run_sleigh_disc(cfg);
    case SystemKind::sleigh_cont: return run_sleigh_cont(cfg);
    case SystemKind::sleigh_free: return run_sleigh_free(cfg);
    case SystemKind::sleigh_naive: return run_sleigh_naive(cfg);
  }
  throw ConfigError("config field 'system': unset");
}

std::vector<InvariantReport> drift_stats(const Trajectory& t) {
  std::vector<InvariantReport> out;
  for (const std::string& name : t.invariant_columns) {
    const auto it = std::find(t.columns.begin(), t.columns.end(), name);
    const size_t col = static_cast<size_t>(it - t.columns.begin());
    InvariantReport rep;
    rep.name = name;
    if (t.rows.empty()) {
      out.push_back(rep);
      continue;
    }
    rep.initial = t.rows.front()[col];
    for (size_t r = 0; r < t.rows.size(); ++r) {
      const double drift = std::abs(t.rows[r][col] - rep.initial);
      if (drift > rep.max_abs_drift) {
        rep.max_abs_drift = drift;
        rep.step_of_max = static_cast<long>(t.rows[r][0]);
      }
    }
    rep.max_rel_drift =
        rep.max_abs_drift / std::max(std::abs(rep.initial), 1e-300);
    out.push_back(rep);
  }
  return out;
}

void write_csv(const SimConfig& cfg, const Trajectory& t, const std::string& path,
               std::vector<std::string>& files) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open output file '" + path + "'");
  f << "# deps-trajectory format=1\n";
  for (const auto& [k, v] : serialize_config(cfg)) f << "# " << k << " = " << v << "\n";
  for (size_t i = 0; i < t.columns.size(); ++i) {
    f << t.columns[i] << (i + 1 < t.columns.size() ? "," : "\n");
  }
  for (const auto& row : t.rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i == 0) f << static_cast<long>(row[i]);
      else f << fmt(row[i]);
      f << (i + 1 < row.size() ? "," : "\n");
    }
  }
  files.push_back(path);

  std::ofstream g(path + ".invariants.csv", std::ios::binary);
  g << "invariant,initial,max_abs_drift,max_rel_drift,step_of_max\n";
  for (const InvariantReport& rep : drift_stats(t)) {
    g << rep.name << "," << fmt(rep.initial) << "," << fmt(rep.max_abs_drift) << ","
      << fmt(rep.max_rel_drift) << "," << rep.step_of_max << "\n";
  }
  files.push_back(path + ".invariants.csv");
}

void write_json(const SimConfig& cfg, const Trajectory& t, const std::string& path,
                std::vector<std::string>& files) {
  json doc;
  doc["format"] = 1;
  json conf = json::object();
  for (const auto& [k, v] : serialize_config(cfg)) conf[k] = v;
  doc["config"] = conf;
  doc["columns"] = t.columns;
  json recs = json::array();
  for (const auto& row : t.rows) recs.push_back(row);
  doc["records"] = recs;
  json invs = json::array();
  for (const InvariantReport& rep : drift_stats(t)) {
    invs.push_back({{"invariant", rep.name},
                    {"initial", rep.initial},
                    {"max_abs_drift", rep.max_abs_drift},
                    {"max_rel_drift", rep.max_rel_drift},
                    {"step_of_max", rep.step_of_max}});
  }
  doc["invariants"] = invs;
  if (!t.message.empty()) doc["diagnostic"] = t.message;
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open output file '" + path + "'");
  f << doc.dump(1, '\t') << "\n";
  files.push_back(path);
}

std::string sweep_member_path(const std::string& base, int index) {
  const auto dot = base.find_last_of('.');
  char suffix[16];
  std::snprintf(suffix, sizeof(suffix), "_%03d", index);
  if (dot == std::string::npos) return base + suffix;
  return base.substr(0, dot) + suffix + base.substr(dot);
}

RunOutcome run_single(SimConfig cfg) {
  // The constraint covector is a direction; store and echo it normalized so
  // re-read files reproduce the run exactly.
  if (cfg.gamma.norm() > 0.0) cfg.gamma.normalize();
  RunOutcome out;
  const Trajectory t = run_system(cfg);
  if (cfg.format == OutputFormat::csv) write_csv(cfg, t, cfg.out, out.files_written);
  else write_json(cfg, t, cfg.out, out.files_written);
  out.exit_code = t.exit_code;
  out.message = t.message;
  return out;
}

// =====================
// Reading trajectories back
// =====================

struct LoadedTrajectory {
  SimConfig cfg;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

LoadedTrajectory load_csv(std::istream& in) {
  LoadedTrajectory t;
  std::string line;
  long lineno = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      const std::string body = trim(line.substr(1));
      const auto eq = body.find('=');
      if (eq != std::string::npos) {
        const std::string key = trim(body.substr(0, eq));
        const std::string value = trim(body.substr(eq + 1));
        try {
          set_key(t.cfg, key, value);
        } catch (const ConfigError&) {
          // Echo lines that are not config keys are ignored.
        }
      }
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!header_seen) {
      t.columns = cells;
      header_seen = true;
      continue;
    }
    if (cells.size() != t.columns.size()) {
      throw ConfigError("trajectory parse error at line " + std::to_string(lineno) +
                        ": expected " + std::to_string(t.columns.size()) + " cells, got " +
                        std::to_string(cells.size()));
    }
    std::vector<double> row;
    row.reserve(cells.size());
    for (const std::string& c : cells) {
      try {
        row.push_back(std::stod(c));
      } catch (const std::exception&) {
        throw ConfigError("trajectory parse error at line " + std::to_string(lineno) +
                          ": not a number: '" + c + "'");
      }
    }
    t.rows.push_back(std::move(row));
  }
  if (!header_seen) throw ConfigError("trajectory parse error: missing header row");
  return t;
}

LoadedTrajectory load_json(std::istream& in) {
  LoadedTrajectory t;
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("trajectory parse error: ") + e.what());
  }
  if (!doc.contains("config") || !doc.contains("columns") || !doc.contains("records")) {
    throw ConfigError("trajectory parse error: missing config/columns/records");
  }
  for (const auto& [k, v] : doc["config"].items()) set_key(t.cfg, k, v.get<std::string>());
  t.columns = doc["columns"].get<std::vector<std::string>>();
  for (const auto& rec : doc["records"]) {
    t.rows.push_back(rec.get<std::vector<double>>());
    if (t.rows.back().size() != t.columns.size()) {
      throw ConfigError("trajectory parse error: record " + std::to_string(t.rows.size()) +
                        " has wrong width");
    }
  }
  return t;
}

size_t column_index(const LoadedTrajectory& t, const std::string& name) {
  const auto it = std::find(t.columns.begin(), t.columns.end(), name);
  if (it == t.columns.end()) {
    throw ConfigError("trajectory parse error: missing column '" + name + "'");
  }
  return static_cast<size_t>(it - t.columns.begin());
}

/// Recomputes every derived column of a row from its state columns and
/// checks the stored values; returns the names of invariant columns.
std::vector<std::string> verify_row(const LoadedTrajectory& t, const std::vector<double>& row,
                                    long rowno) {
  auto check = [&](const std::string& name, double recomputed) {
    const double stored = row[column_index(t, name)];
    if (std::isnan(recomputed) && std::isnan(stored)) return;
    if (std::abs(recomputed - stored) > 1e-12 * std::max(1.0, std::abs(stored))) {
      throw ConfigError("self-consistency failure in record " + std::to_string(rowno) +
                        ", column '" + name + "': stored " + fmt(stored) + ", recomputed " +
                        fmt(recomputed));
    }
  };
  const SimConfig& cfg = t.cfg;
  switch (cfg.system) {
    case SystemKind::suslov_disc: {
      const MassTensor j = cfg.mass_tensor();
      const InertiaOperator in = cfg.inertia_operator();
      const AdmissibleRotation q(row[column_index(t, "q0")], row[column_index(t, "q1")],
                                 row[column_index(t, "q2")]);
      const Eigen::Vector3d m = momentum_from_q(q, j);
      check("M1", m(0));
      check("M2", m(1));
      check("M3", m(2));
      check("quad_integral", suslov_quadratic_integral(m, j));
      check("quartic_H", suslov_quartic_integral(q, j));
      check("full_energy", suslov_energy(m, in));
      return {"quad_integral", "quartic_H", "full_energy"};
    }
    case SystemKind::suslov_cont: {
      const InertiaOperator in = cfg.inertia_operator();
      const Eigen::Vector3d m(row[column_index(t, "M1")], row[column_index(t, "M2")],
                              row[column_index(t, "M3")]);
      check("energy", suslov_energy(m, in));
      check("reduced_energy", suslov_reduced_energy(m, in));
      if (in.is_diagonal(1e-12)) {
        check("degenerate_integral", suslov_degenerate_integral(m, in, cfg.gamma));
      }
      std::vector<std::string> invs{"energy"};
      if (in.is_diagonal(1e-12)) invs.push_back("degenerate_integral");
      if ((cfg.gamma - Eigen::Vector3d(0, 0, 1)).norm() < 1e-12) {
        invs.push_back("reduced_energy");
      }
      return invs;
    }
    case SystemKind::sleigh_disc: {
      const double dtheta = row[column_index(t, "dtheta")];
      const double v1 = row[column_index(t, "V1")];
      const double v2 = row[column_index(t, "V2")];
      const Eigen::Vector3d pm = discrete_momentum_se2(dtheta, v1, v2, cfg.sleigh);
      check("p_theta", pm(0));
      check("p1", pm(1));
      check("p2", pm(2));
      check("energy", sleigh_energy(pm(0), pm(1), cfg.sleigh));
      check("constraint_residual", constraint_residual(dtheta, v1, v2));
      std::vector<std::string> invs{"energy"};
      double cx = 0.0, cy = 0.0;
      if (cfg.sleigh.a == 0.0 &&
          sleigh_circle_center(cfg.pose0, cfg.dtheta0, cfg.v10, cx, cy)) {
        check("orbit_radius", std::hypot(row[column_index(t, "x")] - cx,
                                         row[column_index(t, "y")] - cy));
        invs.push_back("orbit_radius");
      }
      return invs;
    }
    case SystemKind::sleigh_cont: {
      check("energy", sleigh_energy(row[column_index(t, "p_theta")],
                                    row[column_index(t, "p1")], cfg.sleigh));
      return {"energy"};
    }
    case SystemKind::sleigh_free: {
      const double p1 = row[column_index(t, "p1")], p2 = row[column_index(t, "p2")];
      check("coad_invariant", p1 * p1 + p2 * p2);
      return {"coad_invariant"};
    }
    case SystemKind::sleigh_naive: {
      const Eigen::Vector3d pm = discrete_momentum_se2(
          row[column_index(t, "dtheta")], row[column_index(t, "V1")], 0.0, cfg.sleigh);
      check("p_theta", pm(0));
      check("p1", pm(1));
      check("energy", sleigh_energy(pm(0), pm(1), cfg.sleigh));
      return {"energy"};
    }
  }
  return {};
}

}  // namespace

SystemKind parse_system_kind(const std::string& name) {
  if (name == "suslov-cont") return SystemKind::suslov_cont;
  if (name == "suslov-disc") return SystemKind::suslov_disc;
  if (name == "sleigh-cont") return SystemKind::sleigh_cont;
  if (name == "sleigh-disc") return SystemKind::sleigh_disc;
  if (name == "sleigh-free") return SystemKind::sleigh_free;
  if (name == "sleigh-naive") return SystemKind::sleigh_naive;
  throw ConfigError("config field 'system': unknown value '" + name + "'");
}

std::string system_kind_name(SystemKind k) {
  switch (k) {
    case SystemKind::suslov_cont: return "suslov-cont";
    case SystemKind::suslov_disc: return "suslov-disc";
    case SystemKind::sleigh_cont: return "sleigh-cont";
    case SystemKind::sleigh_disc: return "sleigh-disc";
    case SystemKind::sleigh_free: return "sleigh-free";
    case SystemKind::sleigh_naive: return "sleigh-naive";
  }
  return "suslov-disc";
}

SimConfig parse_config_text(const std::string& text) {
  SimConfig cfg;
  std::istringstream in(text);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config parse error at line " + std::to_string(lineno) +
                        ": expected 'key = value'");
    }
    set_key(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

SimConfig parse_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

void apply_override(SimConfig& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "': expected key=value");
  }
  set_key(cfg, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

RunOutcome run(const SimConfig& cfg) {
  if (!cfg.sweep) return run_single(cfg);

  const SweepSpec& sweep = *cfg.sweep;
  if (sweep.count < 1) throw ConfigError("config field 'sweep.count': must be >= 1");
  if (sweep.param.empty()) throw ConfigError("config field 'sweep.param': required");
  RunOutcome all;
  std::ofstream summary(cfg.out + ".sweep.csv", std::ios::binary);
  summary << "index,value,exit_code,file\n";
  for (int i = 0; i < sweep.count; ++i) {
    const double value = sweep.count == 1
                             ? sweep.from
                             : sweep.from + (sweep.to - sweep.from) * i / (sweep.count - 1);
    SimConfig member = cfg;
    member.sweep.reset();
    member.out = sweep_member_path(cfg.out, i);
    apply_override(member, sweep.param + "=" + fmt(value));
    const RunOutcome r = run_single(member);
    summary << i << "," << fmt(value) << "," << r.exit_code << "," << member.out << "\n";
    for (const std::string& fpath : r.files_written) all.files_written.push_back(fpath);
    if (r.exit_code != 0 && all.exit_code == 0) {
      all.exit_code = r.exit_code;
      all.message = r.message;
    }
  }
  all.files_written.push_back(cfg.out + ".sweep.csv");
  return all;
}

GridSpec parse_grid_spec(const std::string& text) {
  GridSpec g;
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) parts.push_back(part);
  if (parts.size() != 2) {
    throw ConfigError("grid spec: expected 'name=lo:hi:count,name=lo:hi:count'");
  }
  auto parse_axis = [](const std::string& s, std::string& name, double& lo, double& hi, int& n) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("grid spec: missing '=' in '" + s + "'");
    name = trim(s.substr(0, eq));
    std::stringstream rest(s.substr(eq + 1));
    std::string a, b, c;
    if (!std::getline(rest, a, ':') || !std::getline(rest, b, ':') || !std::getline(rest, c)) {
      throw ConfigError("grid spec: expected lo:hi:count in '" + s + "'");
    }
    lo = to_double("grid", a);
    hi = to_double("grid", b);
    n = static_cast<int>(to_long("grid", c));
    if (n < 1) throw ConfigError("grid spec: count must be >= 1");
  };
  parse_axis(parts[0], g.xname, g.xlo, g.xhi, g.nx);
  parse_axis(parts[1], g.yname, g.ylo, g.yhi, g.ny);
  return g;
}

RunOutcome phase_portrait(const SimConfig& cfg, const GridSpec& grid) {
  RunOutcome out;
  std::ofstream f(cfg.out, std::ios::binary);
  if (!f) throw ConfigError("cannot open output file '" + cfg.out + "'");
  f << "# deps-portrait format=1\n";
  for (const auto& [k, v] : serialize_config(cfg)) f << "# " << k << " = " << v << "\n";

  auto axis_value = [](const GridSpec& g, bool is_x, int i) {
    const double lo = is_x ? g.xlo : g.ylo, hi = is_x ? g.xhi : g.yhi;
    const int n = is_x ? g.nx : g.ny;
    return n == 1 ? lo : lo + (hi - lo) * i / (n - 1);
  };

  const bool is_suslov =
      cfg.system == SystemKind::suslov_disc || cfg.system == SystemKind::suslov_cont;
  f << (is_suslov ? "orbit,k,M1,M2,invariant,tag\n" : "orbit,k,p_theta,p1,invariant,tag\n");

  auto tag_to_string = [](EquilibriumType e) {
    switch (e) {
      case EquilibriumType::stable: return "stable";
      case EquilibriumType::unstable: return "unstable";
      case EquilibriumType::marginal: return "marginal";
      default: return "none";
    }
  };

  int orbit = 0;
  for (int ix = 0; ix < grid.nx; ++ix) {
    for (int iy = 0; iy < grid.ny; ++iy, ++orbit) {
      SimConfig member = cfg;
      apply_override(member, grid.xname + "=" + fmt(axis_value(grid, true, ix)));
      apply_override(member, grid.yname + "=" + fmt(axis_value(grid, false, iy)));

      switch (cfg.system) {
        case SystemKind::suslov_disc: {
          const MassTensor j = member.mass_tensor();
          auto emit = [&](long k, const AdmissibleRotation& q) {
            const Eigen::Vector3d m = momentum_from_q(q, j);
            f << orbit << "," << k << "," << fmt(m(0)) << "," << fmt(m(1)) << ","
              << fmt(suslov_quadratic_integral(m, j)) << ","
              << tag_to_string(classify_equilibrium(q, j, 1e-6)) << "\n";
          };
          SuslovDiscreteState fwd{AdmissibleRotation::from_disk(member.q1, member.q2),
                                  std::nullopt, {}};
          SuslovDiscreteState bwd = fwd;
          std::vector<std::pair<long, AdmissibleRotation>> samples;
          for (long k = 1; k <= member.steps; ++k) {
            if (suslov_step_back(bwd, j, member.policy, member.newton).status != StepStatus::ok) {
              out.exit_code = 2;
              out.message = "branch failure in orbit " + std::to_string(orbit);
              break;
            }
            samples.emplace_back(-k, bwd.q);
          }
          for (auto it = samples.rbegin(); it != samples.rend(); ++it) emit(it->first, it->second);
          emit(0, fwd.q);
          for (long k = 1; k <= member.steps; ++k) {
            if (suslov_step(fwd, j, member.policy, member.newton).status != StepStatus::ok) {
              out.exit_code = 2;
              out.message = "branch failure in orbit " + std::to_string(orbit);
              break;
            }
            emit(k, fwd.q);
          }
          break;
        }
        case SystemKind::suslov_cont: {
          const InertiaOperator in = member.inertia_operator();
          auto emit = [&](long k, const Eigen::Vector3d& m) {
            const double rhs_norm = suslov_rhs(m, in, member.gamma).norm();
            f << orbit << "," << k << "," << fmt(m(0)) << "," << fmt(m(1)) << ","
              << fmt(suslov_energy(m, in)) << ","
              << (rhs_norm < 1e-9 * (1.0 + m.norm()) ? "marginal" : "none") << "\n";
          };
          const Eigen::Vector3d m0 = project_to_constraint(member.m0, in, member.gamma);
          Eigen::Vector3d m = m0;
          std::vector<Eigen::Vector3d> back;
          for (long k = 1; k <= member.steps; ++k) {
            m = suslov_rk4_step_back(m, in, member.gamma, member.dt);
            back.push_back(m);
          }
          for (long k = static_cast<long>(back.size()); k >= 1; --k) {
            emit(-k, back[static_cast<size_t>(k - 1)]);
          }
          m = m0;
          emit(0, m);
          for (long k = 1; k <= member.steps; ++k) {
            m = suslov_rk4_step(m, in, member.gamma, member.dt);
            emit(k, m);
          }
          break;
        }
        case SystemKind::sleigh_disc: {
          const SleighParams& p = member.sleigh;
          auto tag = [&](const Eigen::Vector3d& pm) {
            const double line = pm(0) + p.b * pm(1);
            if (std::abs(line) > 1e-6 * (1.0 + pm.head<2>().norm())) return "none";
            if (pm(1) > 1e-12) return "stable";
            if (pm(1) < -1e-12) return "unstable";
            return "marginal";
          };
          auto emit = [&](long k, const Eigen::Vector3d& pm) {
            f << orbit << "," << k << "," << fmt(pm(0)) << "," << fmt(pm(1)) << ","
              << fmt(sleigh_energy(pm(0), pm(1), p)) << "," << tag(pm) << "\n";
          };
          SleighDisplacement d = SleighDisplacement::from_chart(member.dtheta0, member.v10);
          std::vector<Eigen::Vector3d> back;
          SleighDisplacement db = d;
          for (long k = 1; k <= member.steps; ++k) {
            const SleighStepResult r = sleigh_step_back(db, p, member.policy, member.newton);
            if (r.report.status != StepStatus::ok) {
              out.exit_code = 2;
              out.message = "branch failure in orbit " + std::to_string(orbit);
              break;
            }
            db = r.next;
            back.push_back(r.momentum_after);
          }
          for (long k = static_cast<long>(back.size()); k >= 1; --k) {
            emit(-k, back[static_cast<size_t>(k - 1)]);
          }
          emit(0, discrete_momentum_se2(d, p));
          for (long k = 1; k <= member.steps; ++k) {
            const SleighStepResult r = sleigh_step(d, p, member.policy, member.newton);
            if (r.report.status != StepStatus::ok) {
              out.exit_code = 2;
              out.message = "branch failure in orbit " + std::to_string(orbit);
              break;
            }
            d = r.next;
            emit(k, r.momentum_after);
          }
          break;
        }
        case SystemKind::sleigh_cont: {
          const SleighParams& p = member.sleigh;
          auto tag = [&](const Eigen::Vector2d& pm) {
            const double line = pm(0) + p.b * pm(1);
            if (std::abs(line) > 1e-9 * (1.0 + pm.norm())) return "none";
            if (pm(1) > 1e-12) return "stable";
            if (pm(1) < -1e-12) return "unstable";
            return "marginal";
          };
          auto emit = [&](long k, const Eigen::Vector2d& pm) {
            f << orbit << "," << k << "," << fmt(pm(0)) << "," << fmt(pm(1)) << ","
              << fmt(sleigh_energy(pm(0), pm(1), p)) << "," << tag(pm) << "\n";
          };
          const Eigen::Vector2d pm0(member.ptheta0, member.p10);
          Eigen::Vector2d pm = pm0;
          std::vector<Eigen::Vector2d> back;
          for (long k = 1; k <= member.steps; ++k) {
            pm = sleigh_rk4_step(pm, p, -member.dt);
            back.push_back(pm);
          }
          for (long k = static_cast<long>(back.size()); k >= 1; --k) {
            emit(-k, back[static_cast<size_t>(k - 1)]);
          }
          pm = pm0;
          emit(0, pm);
          for (long k = 1; k <= member.steps; ++k) {
            pm = sleigh_rk4_step(pm, p, member.dt);
            emit(k, pm);
          }
          break;
        }
        default:
          throw ConfigError("phase portraits support suslov-disc, suslov-cont, sleigh-disc, "
                            "sleigh-cont");
      }
    }
  }
  out.files_written.push_back(cfg.out);
  return out;
}

LimitOutcome compare_limit(const SimConfig& cfg, const std::vector<double>& epsilons) {
  if (epsilons.size() < 2) throw ConfigError("limit: need at least two epsilon values");
  for (size_t i = 0; i + 1 < epsilons.size(); ++i) {
    if (std::abs(epsilons[i + 1] - 0.5 * epsilons[i]) > 1e-9 * epsilons[i]) {
      throw ConfigError("limit: each epsilon must halve the previous one");
    }
  }
  if (cfg.system != SystemKind::suslov_disc && cfg.system != SystemKind::sleigh_disc) {
    throw ConfigError("limit: supported systems are suslov-disc and sleigh-disc");
  }

  LimitOutcome out;
  const double eps0 = epsilons.front();
  const long base_steps = cfg.steps;

  for (size_t i = 0; i < epsilons.size(); ++i) {
    const double eps = epsilons[i];
    const long nsteps = static_cast<long>(std::lround(base_steps * (eps0 / eps)));
    double deviation = 0.0;

    if (cfg.system == SystemKind::suslov_disc) {
      const MassTensor j = cfg.mass_tensor();
      const InertiaOperator in = cfg.inertia_operator();
      SuslovDiscreteState st{AdmissibleRotation::from_disk(eps * cfg.q1, eps * cfg.q2),
                             std::nullopt, {}};
      Eigen::Vector3d ref =
          project_to_constraint(momentum_from_q(st.q, j), in, Eigen::Vector3d(0, 0, 1));
      // One discrete step corresponds to a unit of continuous time.
      const int substeps = 4;
      for (long k = 1; k <= nsteps; ++k) {
        if (suslov_step(st, j, cfg.policy, cfg.newton).status != StepStatus::ok) {
          out.exit_code = 2;
          out.message = "branch failure during limit run at eps=" + fmt(eps);
          return out;
        }
        for (int s = 0; s < substeps; ++s) {
          ref = suslov_rk4_step(ref, in, Eigen::Vector3d(0, 0, 1), 1.0 / substeps);
        }
        const Eigen::Vector3d m = momentum_from_q(st.q, j);
        deviation = std::max(deviation, (m.head<2>() - ref.head<2>()).lpNorm<Eigen::Infinity>());
      }
    } else {
      const SleighParams& p = cfg.sleigh;
      SleighDisplacement d = SleighDisplacement::from_chart(eps * cfg.dtheta0, eps * cfg.v10);
      Eigen::Vector3d pm = discrete_momentum_se2(d, p);
      Eigen::Vector2d ref = pm.head<2>();
      const int substeps = 4;
      for (long k = 1; k <= nsteps; ++k) {
        const SleighStepResult r = sleigh_step(d, p, cfg.policy, cfg.newton);
        if (r.report.status != StepStatus::ok) {
          out.exit_code = 2;
          out.message = "branch failure during limit run at eps=" + fmt(eps);
          return out;
        }
        d = r.next;
        for (int s = 0; s < substeps; ++s) ref = sleigh_rk4_step(ref, p, 1.0 / substeps);
        deviation = std::max(
            deviation, (r.momentum_after.head<2>() - ref).lpNorm<Eigen::Infinity>());
      }
    }

    LimitRow row;
    row.eps = eps;
    row.deviation = deviation;
    row.order = std::numeric_limits<double>::quiet_NaN();
    if (i > 0) {
      const double prev = out.rows.back().deviation;
      if (prev <= 1e-14 && deviation <= 1e-14) {
        row.order = std::numeric_limits<double>::infinity();  // exact match regime
      } else {
        row.order = std::log2(prev / deviation);
      }
    }
    out.rows.push_back(row);
  }

  out.order_ok = true;
  for (size_t i = 1; i < out.rows.size(); ++i) {
    if (!(out.rows[i].order >= 0.9)) out.order_ok = false;
  }
  if (!out.order_ok) {
    out.exit_code = 2;
    out.message = "observed convergence order below 0.9";
  }
  return out;
}

std::vector<InvariantReport> invariant_report(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot open trajectory file '" + path + "'");
  int first = f.peek();
  LoadedTrajectory t = (first == '{') ? load_json(f) : load_csv(f);
  if (t.rows.empty()) throw ConfigError("trajectory parse error: no records");

  std::vector<std::string> inv_names;
  for (size_t r = 0; r < t.rows.size(); ++r) {
    inv_names = verify_row(t, t.rows[r], static_cast<long>(r));
  }

  std::vector<InvariantReport> out;
  for (const std::string& name : inv_names) {
    const size_t col = column_index(t, name);
    InvariantReport rep;
    rep.name = name;
    rep.initial = t.rows.front()[col];
    for (const auto& row : t.rows) {
      const double drift = std::abs(row[col] - rep.initial);
      if (drift > rep.max_abs_drift) {
        rep.max_abs_drift = drift;
        rep.step_of_max = static_cast<long>(row[0]);
      }
    }
    rep.max_rel_drift = rep.max_abs_drift / std::max(std::abs(rep.initial), 1e-300);
    out.push_back(rep);
  }
  return out;
}

}  // namespace deps
