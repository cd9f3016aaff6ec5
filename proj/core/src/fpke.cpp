#include "fpk/fpke.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fpk/error.hpp"
#include "fpk/stats.hpp"

namespace fpk {

namespace {

// Bernoulli function x / (e^x - 1), nonnegative for all x.
double bernoulli(double x) {
  if (std::abs(x) < 1e-10) return 1.0 - 0.5 * x;
  return x / std::expm1(x);
}

// Scharfetter-Gummel flux J = alpha rho_left - beta rho_right for effective
// velocity v and diffusion a on a face of width h.
struct FaceFlux {
  double alpha;
  double beta;
};

FaceFlux sg_flux(double v, double a, double h) {
  if (!(a > 0.0)) return {std::max(v, 0.0), std::max(-v, 0.0)};
  const double peclet = v * h / a;
  return {a / h * bernoulli(-peclet), a / h * bernoulli(peclet)};
}

// Tridiagonal system for one grid line; sub[0] and sup[last] are unused.
struct LineSystem {
  std::vector<double> sub;
  std::vector<double> diag;
  std::vector<double> sup;
};

// Thomas algorithm. For an M-matrix (diag > 0, off-diagonals <= 0, column
// diagonal dominance) every intermediate quantity keeps its sign, so a
// nonnegative right-hand side yields a nonnegative solution in floating point.
void thomas_solve(const LineSystem& sys, double* x, std::size_t stride, std::vector<double>& cp) {
  const std::size_t n = sys.diag.size();
  cp.resize(n);
  double denom = sys.diag[0];
  cp[0] = sys.sup[0] / denom;
  x[0] = x[0] / denom;
  for (std::size_t i = 1; i < n; ++i) {
    denom = sys.diag[i] - sys.sub[i] * cp[i - 1];
    cp[i] = (i + 1 < n) ? sys.sup[i] / denom : 0.0;
    x[i * stride] = (x[i * stride] - sys.sub[i] * x[(i - 1) * stride]) / denom;
  }
  for (std::size_t i = n - 1; i-- > 0;) {
    x[i * stride] -= cp[i] * x[(i + 1) * stride];
  }
}

// Line operators A (column sums zero, A_ii >= 0, A_ij <= 0) for sweeps along
// `axis`, and the theta-scheme step (I + theta dt A) x' = (I - (1 - theta) dt A) x.
class AxisOperator {
 public:
  AxisOperator(const CoefficientModel& model, const std::vector<GridAxis>& axes, std::size_t axis)
      : model_(model), axes_(axes), axis_(axis) {}

  // Assembles A at time t. Returns the max of |v| / h over all faces.
  double assemble(double t) {
    const GridAxis& ax = axes_[axis_];
    const std::size_t len = ax.cells;
    const std::size_t lines = axes_.size() == 1 ? 1 : axes_[1 - axis_].cells;
    const double h = ax.width();
    const auto n = static_cast<Eigen::Index>(model_.dim());
    const auto ai = static_cast<Eigen::Index>(axis_);
    ops_.resize(lines);

    Vector y(n);
    Vector drift(n);
    Matrix sigma(n, static_cast<Eigen::Index>(model_.noise_dim()));
    Matrix a(n, n);
    std::vector<double> a_center(len);
    double speed = 0.0;
    max_diag_ = 0.0;

    auto eval = [&](std::size_t line, double coord) {
      if (axes_.size() == 2) y[1 - ai] = axes_[1 - axis_].center(line);
      y[ai] = coord;
      model_.drift(t, y, drift);
      diffusion_matrix(model_, t, y, sigma, a);
      if (n == 2) {
        const double scale = std::abs(a(0, 0)) + std::abs(a(1, 1));
        if (std::abs(a(0, 1)) > 1e-12 * scale + 1e-300) {
          throw Error("grid solver requires a diagonal diffusion matrix in two dimensions");
        }
      }
    };

    for (std::size_t line = 0; line < lines; ++line) {
      LineSystem& op = ops_[line];
      op.sub.assign(len, 0.0);
      op.diag.assign(len, 0.0);
      op.sup.assign(len, 0.0);
      for (std::size_t i = 0; i < len; ++i) {
        eval(line, ax.center(i));
        a_center[i] = a(ai, ai);
      }
      for (std::size_t i = 0; i + 1 < len; ++i) {
        eval(line, ax.face(i + 1));
        const double v = drift[ai] - (a_center[i + 1] - a_center[i]) / h;
        speed = std::max(speed, std::abs(v) / h);
        const FaceFlux flux = sg_flux(v, a(ai, ai), h);
        // Face between cells i and i+1.
        op.diag[i] += flux.alpha / h;
        op.sup[i] -= flux.beta / h;
        op.sub[i + 1] -= flux.alpha / h;
        op.diag[i + 1] += flux.beta / h;
      }
      for (double d : op.diag) max_diag_ = std::max(max_diag_, d);
    }
    return speed;
  }

  double max_diag() const noexcept { return max_diag_; }

  // Prepares the implicit systems for a step of length dt.
  void configure(double dt, double theta) {
    dt_ = dt;
    theta_ = theta;
    systems_.resize(ops_.size());
    for (std::size_t line = 0; line < ops_.size(); ++line) {
      const LineSystem& op = ops_[line];
      LineSystem& sys = systems_[line];
      const std::size_t len = op.diag.size();
      sys.sub.resize(len);
      sys.diag.resize(len);
      sys.sup.resize(len);
      for (std::size_t i = 0; i < len; ++i) {
        sys.sub[i] = theta * dt * op.sub[i];
        sys.diag[i] = 1.0 + theta * dt * op.diag[i];
        sys.sup[i] = theta * dt * op.sup[i];
      }
    }
  }

  void step(Vector& values) {
    const std::size_t lines = systems_.size();
    const std::size_t stride = (axes_.size() == 2 && axis_ == 0) ? axes_[1].cells : 1;
    const double c = (1.0 - theta_) * dt_;
    for (std::size_t line = 0; line < lines; ++line) {
      const std::size_t offset = (axes_.size() == 1) ? 0 : (axis_ == 0 ? line : line * axes_[1].cells);
      double* x = values.data() + offset;
      if (c > 0.0) {
        const LineSystem& op = ops_[line];
        const std::size_t len = op.diag.size();
        rhs_.resize(len);
        for (std::size_t i = 0; i < len; ++i) {
          double r = (1.0 - c * op.diag[i]) * x[i * stride];
          if (i > 0) r -= c * op.sub[i] * x[(i - 1) * stride];
          if (i + 1 < len) r -= c * op.sup[i] * x[(i + 1) * stride];
          rhs_[i] = r;
        }
        for (std::size_t i = 0; i < len; ++i) x[i * stride] = rhs_[i];
      }
      thomas_solve(systems_[line], x, stride, scratch_);
    }
  }

 private:
  const CoefficientModel& model_;
  const std::vector<GridAxis>& axes_;
  std::size_t axis_;
  std::vector<LineSystem> ops_;
  std::vector<LineSystem> systems_;
  std::vector<double> scratch_;
  std::vector<double> rhs_;
  double max_diag_ = 0.0;
  double dt_ = 0.0;
  double theta_ = 1.0;
};

double boundary_mass(const GridDensity& g, std::size_t strip) {
  double mass = 0.0;
  const std::size_t count = g.cell_count();
  for (std::size_t flat = 0; flat < count; ++flat) {
    bool edge = false;
    std::size_t rest = flat;
    for (std::size_t d = g.axes.size(); d-- > 0;) {
      const std::size_t idx = rest % g.axes[d].cells;
      rest /= g.axes[d].cells;
      if (idx < strip || idx + strip >= g.axes[d].cells) edge = true;
    }
    if (edge) mass += g.values[static_cast<Eigen::Index>(flat)];
  }
  return mass * g.cell_volume();
}

}  // namespace

nlohmann::json GridSpec::to_json() const {
  nlohmann::json lo = nlohmann::json::array(), hi = nlohmann::json::array(),
                 cells = nlohmann::json::array();
  for (const auto& a : axes) {
    lo.push_back(a.lo);
    hi.push_back(a.hi);
    cells.push_back(a.cells);
  }
  return {{"lo", lo},
          {"hi", hi},
          {"cells", cells},
          {"steps", steps},
          {"record_every", record_every},
          {"max_courant", max_courant},
          {"theta", theta},
          {"boundary_mass_tol", boundary_mass_tol},
          {"boundary_cells", boundary_cells}};
}

GridSpec GridSpec::from_json(const nlohmann::json& j) {
  GridSpec g;
  const auto lo = j.at("lo").get<std::vector<double>>();
  const auto hi = j.at("hi").get<std::vector<double>>();
  const auto cells = j.at("cells").get<std::vector<std::size_t>>();
  if (lo.size() != hi.size() || lo.size() != cells.size()) {
    throw ConfigError("grid lo/hi/cells must have equal lengths");
  }
  for (std::size_t i = 0; i < lo.size(); ++i) g.axes.push_back({lo[i], hi[i], cells[i]});
  g.steps = j.value("steps", g.steps);
  g.record_every = j.value("record_every", g.record_every);
  g.max_courant = j.value("max_courant", g.max_courant);
  g.theta = j.value("theta", g.theta);
  g.boundary_mass_tol = j.value("boundary_mass_tol", g.boundary_mass_tol);
  g.boundary_cells = j.value("boundary_cells", g.boundary_cells);
  return g;
}

MarginalFlow solve_fpke_grid(const CoefficientModel& model, ConstVecRef x0, const GridSpec& grid) {
  const std::size_t n = model.dim();
  if (n < 1 || n > 2) throw DimensionError("grid solver supports n = 1 or 2 only");
  if (grid.axes.size() != n) throw DimensionError("grid needs one axis per dimension");
  if (grid.steps == 0 || grid.record_every == 0 || grid.steps % grid.record_every != 0) {
    throw Error("grid steps must be positive and divisible by record_every");
  }
  if (!(grid.theta >= 0.5 && grid.theta <= 1.0)) throw Error("grid theta must lie in [0.5, 1]");
  if (static_cast<std::size_t>(x0.size()) < n) throw DimensionError("initial point too short");
  for (const auto& ax : grid.axes) {
    if (ax.cells < 2 * grid.boundary_cells + 3 || !(ax.hi > ax.lo)) throw Error("grid axis too small");
  }

  const Vector start = x0.head(static_cast<Eigen::Index>(n));
  for (std::size_t d = 0; d < n; ++d) {
    const double c = start[static_cast<Eigen::Index>(d)];
    if (c <= grid.axes[d].lo || c >= grid.axes[d].hi) {
      throw DomainTooSmallError("initial point lies outside the grid box");
    }
  }

  // Gaussian mollification of the Dirac, two cells wide per axis.
  GridDensity density;
  density.axes = grid.axes;
  density.values.resize(static_cast<Eigen::Index>(density.cell_count()));
  double center[2] = {0.0, 0.0};
  for (std::size_t flat = 0; flat < density.cell_count(); ++flat) {
    density.cell_center(flat, center);
    double e = 0.0;
    for (std::size_t d = 0; d < n; ++d) {
      const double bw = 2.0 * grid.axes[d].width();
      const double z = (center[d] - start[static_cast<Eigen::Index>(d)]) / bw;
      e += 0.5 * z * z;
    }
    density.values[static_cast<Eigen::Index>(flat)] = std::exp(-e);
  }
  density.values /= density.mass();

  auto check_boundary = [&](const GridDensity& g, double t) {
    const double bm = boundary_mass(g, grid.boundary_cells);
    if (bm > grid.boundary_mass_tol) {
      throw DomainTooSmallError("boundary mass " + std::to_string(bm) + " at t = " +
                                std::to_string(t) + " exceeds " +
                                std::to_string(grid.boundary_mass_tol));
    }
  };
  check_boundary(density, 0.0);

  MarginalFlow flow;
  flow.dim = n;
  flow.initial_point = start;
  flow.initial_bandwidth = 2.0 * grid.axes[0].width();
  flow.times.push_back(0.0);
  flow.nodes.emplace_back(density);

  std::vector<AxisOperator> ops;
  for (std::size_t d = 0; d < n; ++d) ops.emplace_back(model, density.axes, d);

  const double dt = model.horizon() / static_cast<double>(grid.steps);
  const double theta = grid.theta;

  // Assembles every axis at time t and returns the substep count that keeps
  // the explicit part nonnegative for a step of length dt.
  auto assemble_all = [&](double t) {
    std::size_t sub = 1;
    for (auto& op : ops) {
      const double courant = op.assemble(t) * dt;
      if (courant > grid.max_courant) {
        throw StepSizeError("Courant number " + std::to_string(courant) + " exceeds " +
                            std::to_string(grid.max_courant) + "; reduce the time step");
      }
      const double load = (1.0 - theta) * dt * op.max_diag();
      sub = std::max(sub, static_cast<std::size_t>(std::ceil(load * (1.0 + 1e-12))));
    }
    return sub;
  };
  auto configure_all = [&](double h) {
    // Strang splitting: half steps along the first axis around a full one.
    ops[0].configure(n == 2 ? 0.5 * h : h, theta);
    if (n == 2) ops[1].configure(h, theta);
  };
  auto substep = [&](Vector& v) {
    ops[0].step(v);
    if (n == 2) {
      ops[1].step(v);
      ops[0].step(v);
    }
  };

  std::size_t substeps = 0;
  for (std::size_t k = 0; k < grid.steps; ++k) {
    const double t0 = model.horizon() * static_cast<double>(k) / static_cast<double>(grid.steps);
    const double t = model.horizon() * static_cast<double>(k + 1) / static_cast<double>(grid.steps);
    if (model.time_homogeneous()) {
      if (substeps == 0) {
        substeps = assemble_all(t0);
        configure_all(dt / static_cast<double>(substeps));
      }
      for (std::size_t j = 0; j < substeps; ++j) substep(density.values);
    } else {
      // Coefficients are frozen at theta-weighted times inside each substep;
      // the substep count is raised until every frozen operator admits it.
      const Vector saved = density.values;
      std::size_t count = assemble_all(t0 + theta * dt);
      for (;;) {
        const double h = dt / static_cast<double>(count);
        std::size_t needed = count;
        for (std::size_t j = 0; j < count; ++j) {
          const double tj = t0 + (static_cast<double>(j) + theta) * h;
          const std::size_t local = assemble_all(tj);
          if (local > count) {
            needed = local;
            break;
          }
          configure_all(h);
          substep(density.values);
        }
        if (needed == count) break;
        count = needed;
        density.values = saved;
      }
    }
    check_boundary(density, t);
    if ((k + 1) % grid.record_every == 0) {
      flow.times.push_back(t);
      flow.nodes.emplace_back(density);
    }
  }
  return flow;
}

MarginalFlow solve_fpke_particle(const CoefficientModel& model, ConstVecRef x0,
                                 const SimulationSpec& spec) {
  return marginal_flow(simulate_em(model, x0, spec));
}

std::vector<double> generator_integrals(const MarginalFlow& flow, const FinitelyBasedFunction& f,
                                        const CoefficientModel& model) {
  if (model.dim() != flow.dim) throw DimensionError("model and flow dimensions differ");
  const auto n = static_cast<Eigen::Index>(flow.dim);
  Vector drift(n);
  Matrix sigma(n, static_cast<Eigen::Index>(model.noise_dim()));
  Matrix a(n, n);
  std::vector<double> out(flow.size());
  for (std::size_t k = 0; k < flow.size(); ++k) {
    const double t = flow.times[k];
    out[k] = integrate(flow.nodes[k], [&](ConstVecRef y) {
      model.drift(t, y, drift);
      diffusion_matrix(model, t, y, sigma, a);
      return apply_L(f, y, a, drift);
    });
  }
  return out;
}

std::vector<double> weak_residuals(const MarginalFlow& flow, const FinitelyBasedFunction& f,
                                   const CoefficientModel& model) {
  const std::vector<double> lf = generator_integrals(flow, f, model);
  const double f0 = f.value(flow.initial_point);
  std::vector<double> out(flow.size());
  double integral = 0.0;
  for (std::size_t k = 0; k < flow.size(); ++k) {
    if (k > 0) integral += 0.5 * (flow.times[k] - flow.times[k - 1]) * (lf[k] + lf[k - 1]);
    out[k] = std::abs(integrate(flow.nodes[k], f) - f0 - integral);
  }
  return out;
}

double weak_residual(const MarginalFlow& flow, const FinitelyBasedFunction& f,
                     const CoefficientModel& model, double t) {
  const std::size_t k = flow.node_at(t);
  MarginalFlow head;
  head.dim = flow.dim;
  head.initial_point = flow.initial_point;
  head.times.assign(flow.times.begin(), flow.times.begin() + static_cast<std::ptrdiff_t>(k + 1));
  head.nodes.assign(flow.nodes.begin(), flow.nodes.begin() + static_cast<std::ptrdiff_t>(k + 1));
  return weak_residuals(head, f, model).back();
}

double narrow_continuity_modulus(const MarginalFlow& flow, const TestFamily& family) {
  double modulus = 0.0;
  Vector prev;
  for (std::size_t k = 0; k < flow.size(); ++k) {
    Vector cur = family_integrals(flow.nodes[k], family);
    if (k > 0) modulus = std::max(modulus, (cur - prev).cwiseAbs().maxCoeff());
    prev = std::move(cur);
  }
  return modulus;
}

double coefficient_integrability(const MarginalFlow& flow, const CoefficientModel& model) {
  if (model.dim() != flow.dim) throw DimensionError("model and flow dimensions differ");
  const auto n = static_cast<Eigen::Index>(flow.dim);
  Vector drift(n);
  Matrix sigma(n, static_cast<Eigen::Index>(model.noise_dim()));
  Matrix a(n, n);
  std::vector<double> per_node(flow.size());
  for (std::size_t k = 0; k < flow.size(); ++k) {
    const double t = flow.times[k];
    per_node[k] = integrate(flow.nodes[k], [&](ConstVecRef y) {
      model.drift(t, y, drift);
      diffusion_matrix(model, t, y, sigma, a);
      return a.cwiseAbs().sum() + drift.cwiseAbs().sum();
    });
  }
  return stats::trapezoid(flow.times, per_node);
}

}  // namespace fpk
