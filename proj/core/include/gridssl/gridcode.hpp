#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "gridssl/rng.hpp"
#include "gridssl/tensor.hpp"

namespace gridssl {

enum class Lattice { hex, square };

// One idealized grid module: a population of cells sharing period, orientation
// and lattice type, differing only in their 2-D phase offset on the unit cell.
//
// Hex rates are built from three cosines with wavevectors 120 degrees apart
// (the shortest reciprocal-lattice vectors, |k| = 4pi/(sqrt(3) lambda)), which
// sum to zero; a cell's three cosine phases are -k_a . x0 for its lattice
// offset x0, so they also sum to zero. Evaluation works in lattice
// coordinates u = A^-1 x reduced to [0,1)^2:
//   rate_i = R_max * ReLU(cos a1 + cos a2 + cos(a1 + a2)),
//   a1 = 2 pi u1 - phase_x(i), a2 = 2 pi u2 - phase_y(i),
// making translation by a lattice vector a structural no-op. Square modules
// drop the third cosine (peak 2 R_max instead of 3 R_max).
struct IdealModule {
  double lambda = 0.4;  // lattice period, meters
  double theta = 0.0;   // orientation, radians
  double r_max = 1.0;   // single-cosine peak rate
  Lattice lattice = Lattice::hex;
  Tensor<double> phases;  // (n_cells, 2) in [0, 2pi)^2, lattice coordinates

  std::size_t cells() const { return phases.shape.rows(); }

  // Lattice basis vectors (columns of A).
  std::array<double, 2> a1() const;
  std::array<double, 2> a2() const;
};

// Module with an m x m uniform phase grid (phases 2pi p/m, 2pi q/m), which
// tiles the phase torus evenly.
IdealModule make_module(double lambda, double theta, std::size_t cells_axis = 8,
                        double r_max = 1.0, Lattice lattice = Lattice::hex);

// Position in lattice coordinates, reduced to the unit cell [0,1)^2.
std::array<double, 2> lattice_coords(const IdealModule& m, double x, double y);

// 2-D phase of a position, 2pi * lattice_coords, in [0, 2pi)^2.
std::array<double, 2> phase_of_position(const IdealModule& m, double x,
                                        double y);

// Per-cell rates of the 1-D code r_i(x) = R_max ReLU(cos(2pi x/lambda + phi)),
// with phi the first phase component. The argument is reduced modulo the
// period before the cosine.
Tensor<double> rate_1d(const IdealModule& m, double x);

// Per-cell rates at a 2-D position; peak 3 R_max (hex) or 2 R_max (square).
void module_rates(const IdealModule& m, double x, double y, double* out);
Tensor<double> rate_2d(const IdealModule& m, double x, double y);

struct IdealCode {
  std::vector<IdealModule> modules;

  std::size_t cells() const;
  void validate() const;  // periods must be pairwise distinct
};

// Concatenated per-module rates; normalized places the state on the unit
// sphere (the positive orthant). Throws NumericError if a state to be
// normalized has zero norm.
Tensor<double> code_state(const IdealCode& code, double x, double y,
                          bool normalize = true);

// Mean L2 distance between (normalized) code states of position pairs at a
// fixed spatial separation; pair bases are uniform in [0, arena]^2, directions
// uniform in angle.
double mean_neural_distance(const IdealCode& code, double separation,
                            double arena_side, std::size_t n_pairs, Rng& rng,
                            bool normalize = true);

struct CodingDiagnostics {
  // Greedy epsilon-net size over the position grid, per module prefix
  // (entry m-1 uses the first m modules).
  std::vector<std::size_t> states_per_prefix;
  std::vector<double> separations;   // distance-curve abscissa
  std::vector<double> mean_distance; // mean neural distance per separation
  double min_norm = 0, max_norm = 0; // state norms over the grid
};

// Coding-theoretic summary of an ideal code over [0, arena]^2 sampled at
// `resolution`: distinguishable-state counts (states further than `threshold`
// apart), the distance-vs-separation curve, and the norm range.
CodingDiagnostics coding_diagnostics(const IdealCode& code, double arena_side,
                                     double resolution, double threshold,
                                     std::uint64_t seed);

}  // namespace gridssl
