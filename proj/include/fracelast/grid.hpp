#pragma once

/*
 * Uniform cell-centered grids on a truncation box [-W, W]^dim with
 * region masks (Omega, W1, W2), scalar/vector/matrix grid functions,
 * smooth compactly supported bump fields, and synthetic Lame
 * coefficient fields with their pointwise square-root parameters.
 *
 * Grid functions always live on the full grid; restriction to a
 * region zeroes the complement.  Component layout is row-major over
 * tensor indices, with an optional leading pair index for the stacked
 * two-row fields of the Liouville reduction.
 */

#include <fracelast/tensor.hpp>

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace fracelast {

struct GridSpec {
  int dim = 1;              /* 1 or 2 */
  double half_width = 8.0;  /* box is [-half_width, half_width]^dim */
  int n = 256;              /* points per axis, even, >= 16 */

  double h() const { return 2.0 * half_width / n; }
  long nodes() const { return dim == 1 ? n : static_cast<long>(n) * n; }
  double axis_coord(int i) const { return -half_width + (i + 0.5) * h(); }

  std::array<double, 2> coords(long node) const {
    if (dim == 1) return {axis_coord(static_cast<int>(node)), 0.0};
    return {axis_coord(static_cast<int>(node / n)), axis_coord(static_cast<int>(node % n))};
  }
  long node_index(int ix, int iy = 0) const {
    return dim == 1 ? ix : static_cast<long>(ix) * n + iy;
  }
  void validate() const;
  bool same_as(const GridSpec& o) const {
    return dim == o.dim && half_width == o.half_width && n == o.n;
  }
};

/* Geometric region: axis-aligned box or ball, evaluated on cell centers. */
struct Region {
  enum class Kind { Box, Ball };
  Kind kind = Kind::Box;
  std::array<double, 2> lo{{-1.0, -1.0}};      /* Box */
  std::array<double, 2> hi{{1.0, 1.0}};
  std::array<double, 2> center{{0.0, 0.0}};    /* Ball */
  double radius = 1.0;

  static Region box1(double a, double b) {
    Region r;
    r.kind = Kind::Box;
    r.lo = {a, 0.0};
    r.hi = {b, 0.0};
    return r;
  }
  static Region box2(double ax, double bx, double ay, double by) {
    Region r;
    r.kind = Kind::Box;
    r.lo = {ax, ay};
    r.hi = {bx, by};
    return r;
  }
  static Region ball(double cx, double cy, double rad) {
    Region r;
    r.kind = Kind::Ball;
    r.center = {cx, cy};
    r.radius = rad;
    return r;
  }

  bool contains(double x, double y, int dim) const;
  bool contains_ball(const std::array<double, 2>& c, double rad, int dim) const;
};

struct RegionSet {
  Region omega, w1, w2;
  static RegionSet defaults(int dim);
};

struct RegionMasks {
  GridSpec grid;
  RegionSet regions;
  std::vector<std::uint8_t> omega, w1, w2;  /* one byte per node */
  std::vector<long> omega_idx, w1_idx, w2_idx, exterior_idx;

  static RegionMasks build(const GridSpec& grid, const RegionSet& regions);
};

struct GridFunction {
  GridSpec grid;
  int rank = 0;          /* 0 scalar, 1 vector, 2 matrix */
  bool pair = false;     /* stacked 2-row field */
  Eigen::ArrayXXd v;     /* (components, nodes) */

  static GridFunction zeros(const GridSpec& g, int rank, bool pair = false);

  int base_comps() const {
    int b = 1;
    for (int r = 0; r < rank; ++r) b *= grid.dim;
    return b;
  }
  int ncomp() const { return base_comps() * (pair ? 2 : 1); }

  /* component row for pair row p (0 or 1) and tensor index c */
  Eigen::ArrayXXd::RowXpr comp(int p, int c) { return v.row(p * base_comps() + c); }
  Eigen::ArrayXXd::ConstRowXpr comp(int p, int c) const { return v.row(p * base_comps() + c); }

  bool same_shape(const GridFunction& o) const {
    return grid.same_as(o.grid) && rank == o.rank && pair == o.pair;
  }
};

double l2_inner(const GridFunction& a, const GridFunction& b);
double l2_norm(const GridFunction& a);

GridFunction restrict_to(const GridFunction& u, const std::vector<std::uint8_t>& mask);
GridFunction extend_by_zero(const GridFunction& u, const std::vector<std::uint8_t>& mask);

/* amplitude * exp(1 - 1/(1 - |x-c|^2/r^2)) inside the ball, exactly 0 outside */
GridFunction smooth_bump(const GridSpec& grid, const std::array<double, 2>& center,
                         double radius, double amplitude);

struct BumpSpec {
  int param = 1;  /* 0 perturbs L, 1 perturbs M */
  std::array<double, 2> center{{0.0, 0.0}};
  double radius = 0.5;
  double amplitude = 0.0;
};

struct LameField {
  GridSpec grid;
  double L0 = 1.0, M0 = 1.0;
  double smoothness_eps = 0.0;  /* record-keeping for the regularity budget */

  Eigen::ArrayXd L, M, K;        /* nodal moduli */
  Eigen::ArrayXd lam, mu, kk;    /* nodal square-root parameters */
  Eigen::ArrayXd nu;             /* nodal Poisson ratio */
  double K0 = 0.0, lam0 = 0.0, mu0 = 0.0, k0 = 0.0, nu0 = 0.0;

  bool constant() const {
    return (L - L0).abs().maxCoeff() == 0.0 && (M - M0).abs().maxCoeff() == 0.0;
  }
};

LameField make_lame_field(const GridSpec& grid, const RegionMasks& masks, double L0,
                          double M0, const std::vector<BumpSpec>& bumps);

}  /* namespace fracelast */
