#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mfpinn::heat {

struct MaterialProps {
  double density = 0.0;        // kg/m^3
  double specific_heat = 0.0;  // J/(kg K)
  double conductivity = 0.0;   // W/(m K)

  // alpha = k / (rho * C_p), always recomputed.
  double diffusivity() const {
    return conductivity / (density * specific_heat);
  }
};

// Air-temperature schedule, piecewise linear between knots. Knot times are
// strictly increasing, starting at 0.
struct CureCycle {
  std::vector<std::pair<double, double>> knots;  // (time s, air temp C)

  double total_duration() const { return knots.back().first; }
  void validate() const;
  double air_temperature(double t) const;  // domain error outside [0, end]
};

struct ThermalSetup {
  MaterialProps material;
  double thickness = 0.0;            // L, m
  double htc_bottom = 0.0;           // h_b, W/(m^2 K)
  double htc_top = 0.0;              // h_t, W/(m^2 K)
  double initial_temperature = 0.0;  // T0, C
  CureCycle cycle;

  void validate() const;
};

// Temperatures on a uniform space grid at a set of snapshot times,
// row-major (snapshot, node).
struct FieldSolution {
  std::vector<double> x_nodes;      // m, node 0 at x=0, last at x=L
  std::vector<double> t_snapshots;  // s
  std::vector<double> temperatures; // C

  int n_nodes() const { return static_cast<int>(x_nodes.size()); }
  int n_snapshots() const { return static_cast<int>(t_snapshots.size()); }
  double at(int snapshot, int node) const {
    return temperatures[static_cast<std::size_t>(snapshot) * x_nodes.size() +
                        node];
  }
};

struct LabeledPoint {
  double x = 0.0;            // m
  double t = 0.0;            // s
  double temperature = 0.0;  // C
};

struct LabeledSet {
  std::vector<LabeledPoint> points;
};

struct Region {
  double t_min, t_max;
  double x_min, x_max;
};

// Implicit (backward Euler) finite differences on n_elements+1 uniform
// nodes; convective boundaries enter through second-order ghost nodes. A
// step that moves any node by more than max_step_change is re-taken as two
// half steps (recursively, at most 20 halvings; the base dt is kept for
// subsequent steps). Snapshots are recorded at n_snapshots uniformly spaced
// times over [0, duration]; the marcher lands on each snapshot time
// exactly by clipping the final step before it. `initial_profile`, when
// nonempty, overrides the uniform T0 start (diagnostic hook; must have
// n_elements+1 entries).
FieldSolution solve(const ThermalSetup& setup, int n_elements, double dt,
                    double max_step_change, int n_snapshots,
                    const std::vector<double>& initial_profile = {});

// n distinct points drawn uniformly from the field's (snapshot, node)
// lattice (restricted to `region` when given), deterministic in seed.
// Draws with one seed are prefixes of longer draws with the same seed.
LabeledSet sample_labeled(const FieldSolution& field, int n,
                          std::uint64_t seed,
                          const std::optional<Region>& region = std::nullopt);

// The full evaluation grid: 41 nodes x 138 uniformly spaced snapshots.
LabeledSet test_grid(const FieldSolution& field);

// Shipped defaults: one-hold cure cycle (ramp to 180 C over 500 s, hold to
// 2000 s, cool to 20 C at 2500 s) and the two carbon-epoxy systems.
CureCycle default_cycle();
ThermalSetup composite1_setup();  // low fidelity
ThermalSetup composite2_setup();  // high fidelity

void write_field_csv(const std::string& path, const FieldSolution& field,
                     const std::vector<std::string>& comment_lines);
void write_labeled_csv(const std::string& path, const LabeledSet& set,
                       const std::vector<std::string>& comment_lines);
LabeledSet read_labeled_csv(const std::string& path);

}  // namespace mfpinn::heat
