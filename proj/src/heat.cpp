#include "mfpinn/heat.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mfpinn/csv.hpp"
#include "mfpinn/errors.hpp"
#include "mfpinn/rng.hpp"

namespace mfpinn::heat {

void CureCycle::validate() const {
  if (knots.size() < 2) throw ConfigError("cure cycle needs at least 2 knots");
  if (knots.front().first != 0.0)
    throw ConfigError("cure cycle must start at t=0");
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (!(knots[i].first > knots[i - 1].first))
      throw ConfigError("cure cycle knot times must be strictly increasing");
  }
}

double CureCycle::air_temperature(double t) const {
  if (t < 0.0 || t > total_duration())
    throw DomainError("air_temperature: t outside the cycle");
  auto it = std::upper_bound(
      knots.begin(), knots.end(), t,
      [](double v, const std::pair<double, double>& k) { return v < k.first; });
  if (it == knots.begin()) return knots.front().second;
  if (it == knots.end()) return knots.back().second;
  const auto& hi = *it;
  const auto& lo = *(it - 1);
  const double w = (t - lo.first) / (hi.first - lo.first);
  return lo.second + w * (hi.second - lo.second);
}

void ThermalSetup::validate() const {
  if (!(material.density > 0.0 && material.specific_heat > 0.0 &&
        material.conductivity > 0.0))
    throw ConfigError("material properties must be positive");
  if (!(thickness > 0.0)) throw ConfigError("thickness must be positive");
  if (htc_bottom < 0.0 || htc_top < 0.0)
    throw ConfigError("heat transfer coefficients must be nonnegative");
  cycle.validate();
}

namespace {

// One implicit step of size h ending at time t_new; Robin boundaries via
// ghost nodes. Solves the tridiagonal system in place with the Thomas
// algorithm (diagonally dominant, no pivoting needed).
void implicit_step(const ThermalSetup& setup, double dx, double h,
                   double t_new, const std::vector<double>& T,
                   std::vector<double>& T_new, std::vector<double>& diag,
                   std::vector<double>& rhs) {
  const int n = static_cast<int>(T.size());
  const double alpha = setup.material.diffusivity();
  const double r = alpha * h / (dx * dx);
  const double k = setup.material.conductivity;
  const double air = setup.cycle.air_temperature(t_new);
  const double gb = 2.0 * r * dx * setup.htc_bottom / k;
  const double gt = 2.0 * r * dx * setup.htc_top / k;

  // Row 0:   (1 + 2r + gb) T0 - 2r T1                  = T0_old + gb*T_air
  // Rows i:  -r T_{i-1} + (1 + 2r) T_i - r T_{i+1}     = Ti_old
  // Row n-1: -2r T_{n-2} + (1 + 2r + gt) T_{n-1}       = T_old + gt*T_air
  rhs.resize(n);
  rhs[0] = T[0] + gb * air;
  for (int i = 1; i < n - 1; ++i) rhs[i] = T[i];
  rhs[n - 1] = T[n - 1] + gt * air;

  // Thomas sweep; `diag` holds the modified super-diagonal c*, T_new the
  // modified rhs d*.
  T_new.resize(n);
  diag.resize(n);
  double b0 = 1.0 + 2.0 * r + gb;
  double cprev = -2.0 * r / b0;
  double dprev = rhs[0] / b0;
  diag[0] = cprev;
  T_new[0] = dprev;
  for (int i = 1; i < n; ++i) {
    const bool last = (i == n - 1);
    const double a = last ? -2.0 * r : -r;
    const double c = last ? 0.0 : -r;
    const double b = 1.0 + 2.0 * r + (last ? gt : 0.0);
    const double m = b - a * cprev;
    cprev = c / m;
    dprev = (rhs[i] - a * dprev) / m;
    diag[i] = cprev;
    T_new[i] = dprev;
  }
  for (int i = n - 2; i >= 0; --i) T_new[i] -= diag[i] * T_new[i + 1];
}

struct MarchState {
  std::vector<double> T;
  double t = 0.0;
};

void advance(const ThermalSetup& setup, double dx, double max_step_change,
             MarchState& st, double h, int depth, std::vector<double>& T_new,
             std::vector<double>& diag, std::vector<double>& rhs) {
  implicit_step(setup, dx, h, st.t + h, st.T, T_new, diag, rhs);
  double max_change = 0.0;
  for (std::size_t i = 0; i < st.T.size(); ++i) {
    max_change = std::max(max_change, std::fabs(T_new[i] - st.T[i]));
  }
  if (max_change <= max_step_change) {
    st.T.swap(T_new);
    st.t += h;
    return;
  }
  if (depth >= 20) {
    throw SolverError("step did not meet the " +
                      csv::fmt(max_step_change) + " C cap after 20 halvings (t=" +
                      csv::fmt(st.t) + " s, dt=" + csv::fmt(h) +
                      " s, change=" + csv::fmt(max_change) + " C)");
  }
  advance(setup, dx, max_step_change, st, h / 2.0, depth + 1, T_new, diag, rhs);
  advance(setup, dx, max_step_change, st, h / 2.0, depth + 1, T_new, diag, rhs);
}

}  // namespace

FieldSolution solve(const ThermalSetup& setup, int n_elements, double dt,
                    double max_step_change, int n_snapshots,
                    const std::vector<double>& initial_profile) {
  setup.validate();
  if (n_elements < 2) throw ConfigError("n_elements must be at least 2");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  if (!(max_step_change > 0.0))
    throw ConfigError("max_step_change must be positive");
  if (n_snapshots < 2) throw ConfigError("need at least 2 snapshots");

  const double L = setup.thickness;
  const double duration = setup.cycle.total_duration();
  const int n_nodes = n_elements + 1;
  const double dx = L / n_elements;

  FieldSolution field;
  field.x_nodes.resize(n_nodes);
  for (int i = 0; i < n_nodes; ++i)
    field.x_nodes[i] = L * static_cast<double>(i) / n_elements;
  field.t_snapshots.resize(n_snapshots);
  for (int j = 0; j < n_snapshots; ++j)
    field.t_snapshots[j] = duration * static_cast<double>(j) / (n_snapshots - 1);
  field.temperatures.resize(static_cast<std::size_t>(n_snapshots) * n_nodes);

  MarchState st;
  if (initial_profile.empty()) {
    st.T.assign(n_nodes, setup.initial_temperature);
  } else {
    if (static_cast<int>(initial_profile.size()) != n_nodes)
      throw ConfigError("initial_profile must have n_elements+1 entries");
    st.T = initial_profile;
  }
  st.t = 0.0;
  std::copy(st.T.begin(), st.T.end(), field.temperatures.begin());

  std::vector<double> T_new, diag, rhs;
  for (int j = 1; j < n_snapshots; ++j) {
    const double target = field.t_snapshots[j];
    while (st.t < target) {
      const double h = std::min(dt, target - st.t);
      if (h <= target * 1e-15) {
        st.t = target;
        break;
      }
      advance(setup, dx, max_step_change, st, h, 0, T_new, diag, rhs);
    }
    st.t = target;  // snap accumulated roundoff
    std::copy(st.T.begin(), st.T.end(),
              field.temperatures.begin() +
                  static_cast<std::size_t>(j) * n_nodes);
  }
  for (double v : field.temperatures) {
    if (!std::isfinite(v)) throw SolverError("non-finite field temperature");
  }
  return field;
}

LabeledSet sample_labeled(const FieldSolution& field, int n,
                          std::uint64_t seed,
                          const std::optional<Region>& region) {
  if (n < 0) throw SamplingError("sample size must be nonnegative");
  const int nn = field.n_nodes();
  const int ns = field.n_snapshots();
  std::vector<std::size_t> lattice;
  lattice.reserve(static_cast<std::size_t>(nn) * ns);
  for (int s = 0; s < ns; ++s) {
    const double t = field.t_snapshots[s];
    if (region && (t < region->t_min || t > region->t_max)) continue;
    for (int i = 0; i < nn; ++i) {
      const double x = field.x_nodes[i];
      if (region && (x < region->x_min || x > region->x_max)) continue;
      lattice.push_back(static_cast<std::size_t>(s) * nn + i);
    }
  }
  if (static_cast<std::size_t>(n) > lattice.size())
    throw SamplingError("requested " + std::to_string(n) + " points but only " +
                        std::to_string(lattice.size()) + " lattice points");

  // Partial Fisher-Yates: the first n entries are the sample; a shorter
  // draw with the same seed is a prefix of a longer one.
  Xoshiro256ss rng(seed);
  LabeledSet out;
  out.points.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const std::size_t j =
        i + static_cast<std::size_t>(rng.bounded(lattice.size() - i));
    std::swap(lattice[i], lattice[j]);
    const std::size_t s = lattice[i] / nn;
    const std::size_t node = lattice[i] % nn;
    out.points.push_back({field.x_nodes[node], field.t_snapshots[s],
                          field.at(static_cast<int>(s), static_cast<int>(node))});
  }
  return out;
}

LabeledSet test_grid(const FieldSolution& field) {
  if (field.n_nodes() != 41)
    throw ConfigError("test grid expects 41 nodes (40 elements), got " +
                      std::to_string(field.n_nodes()));
  const int ns = field.n_snapshots();
  if (ns < 138) throw ConfigError("test grid needs at least 138 snapshots");
  if ((ns - 1) % 137 != 0)
    throw ConfigError("snapshot count incompatible with a uniform 138-slice grid");
  const int stride = (ns - 1) / 137;
  LabeledSet out;
  out.points.reserve(41u * 138u);
  for (int j = 0; j < 138; ++j) {
    const int s = j * stride;
    for (int i = 0; i < 41; ++i) {
      out.points.push_back({field.x_nodes[i], field.t_snapshots[s],
                            field.at(s, i)});
    }
  }
  return out;
}

CureCycle default_cycle() {
  // One-hold cycle: ramp to 180 C by 500 s, hold to 2000 s, then cool at
  // 4.8 C/min through the end of the window.
  CureCycle c;
  c.knots = {{0.0, 0.0}, {500.0, 180.0}, {2000.0, 180.0}, {2500.0, 140.0}};
  return c;
}

ThermalSetup composite1_setup() {
  ThermalSetup s;
  s.material = {1573.0, 967.0, 0.47};
  s.thickness = 0.02;
  s.htc_bottom = 50.0;
  s.htc_top = 100.0;
  s.initial_temperature = 0.0;
  s.cycle = default_cycle();
  return s;
}

ThermalSetup composite2_setup() {
  ThermalSetup s;
  s.material = {1581.26, 1080.22, 0.702};
  s.thickness = 0.02;
  s.htc_bottom = 50.0;
  s.htc_top = 100.0;
  s.initial_temperature = 0.0;
  s.cycle = default_cycle();
  return s;
}

void write_field_csv(const std::string& path, const FieldSolution& field,
                     const std::vector<std::string>& comment_lines) {
  csv::Table t;
  t.comments = comment_lines;
  t.header = "x_m,t_s,temp_C";
  t.rows.reserve(field.temperatures.size());
  for (int s = 0; s < field.n_snapshots(); ++s) {
    for (int i = 0; i < field.n_nodes(); ++i) {
      t.rows.push_back({csv::fmt(field.x_nodes[i]), csv::fmt(field.t_snapshots[s]),
                        csv::fmt(field.at(s, i))});
    }
  }
  csv::write(path, t);
}

void write_labeled_csv(const std::string& path, const LabeledSet& set,
                       const std::vector<std::string>& comment_lines) {
  csv::Table t;
  t.comments = comment_lines;
  t.header = "x_m,t_s,temp_C";
  t.rows.reserve(set.points.size());
  for (const auto& p : set.points) {
    t.rows.push_back({csv::fmt(p.x), csv::fmt(p.t), csv::fmt(p.temperature)});
  }
  csv::write(path, t);
}

LabeledSet read_labeled_csv(const std::string& path) {
  const csv::Table t = csv::read(path);
  if (t.header != "x_m,t_s,temp_C")
    throw IoError("unexpected header in " + path + ": " + t.header);
  LabeledSet out;
  out.points.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    if (row.size() != 3) throw IoError("bad row width in " + path);
    out.points.push_back({csv::parse_double(row[0]), csv::parse_double(row[1]),
                          csv::parse_double(row[2])});
  }
  return out;
}

}  // namespace mfpinn::heat
