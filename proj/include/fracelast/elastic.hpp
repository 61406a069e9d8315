#pragma once

/*
 * Fractional elasticity operator: Galerkin assembly of the two-point
 * kernel form, the spectral reduced formula for the strong operator,
 * potential energy through the symmetrized strain kernel, the exterior
 * Dirichlet solver, and DN maps over discrete exterior bases.
 *
 * Scale convention, fixed artifact-wide: Q(u,v) is the kernel form
 *   Q(u,v) = double integral of a(x,y) (du.dv) |zeta|^2
 *            + b(x,y) (du.zeta)(dv.zeta),  du = u(y)-u(x),
 * with a = 4 mu(x)mu(y), b = 2(n k(x)k(y) + n' mu(x)mu(y)) built from
 * the square-root parameters.  The weak pairing <op u, phi> for every
 * operator realization in this artifact means Q(u, phi) on this scale;
 * DN maps are stored on it and tagged.
 */

#include <fracelast/grid.hpp>

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace fracelast {

struct SolveReport {
  int iterations = 0;
  double rel_residual = 0.0;
  double hs_norm = 0.0;        /* H^s norm of the solution */
  double data_norm = 0.0;      /* H^s norm of f plus L2 norm of F */
  double stability_ratio = 0.0;
};

/*
 * Discretization of Q: dense node matrix in one dimension, tabulated
 * matrix-free kernel in two.  Node pairs two or more cells apart use
 * exact cell-pair masses (1d) or midpoint weights (2d); touching and
 * coincident cells use second-order Taylor corrections with exact
 * singular-cell moments; the complement of the box enters through the
 * analytic tail integrals evaluated per node.
 */
struct ElasticAssembly {
  GridSpec grid;
  RegionMasks masks;
  LameField lame;
  double s = 0.5;

  /* n = 1 */
  Eigen::MatrixXd dense;           /* full node matrix, Q(u,v) = v^T dense u */
  Eigen::MatrixXd interior_block;  /* dense restricted to omega nodes */

  /* n = 2, offset-indexed pair weight tables (factor C/2 folded in) */
  Eigen::ArrayXXd wa;              /* h^4 (C/2) |d|^{-2-2s} */
  Eigen::ArrayXXd wb;              /* h^4 (C/2) |d|^{-4-2s} */
  Eigen::ArrayXd tail_t;           /* complement integral per node */
  Eigen::ArrayXXd tail_m;          /* complement moments per node: m00,m01,m11 */
  /* in-box mass seen by each node, so a restricted apply keeps the
   * u(p) part of w (u(p) - u(q)) exact over the whole grid */
  Eigen::ArrayXd row_mu;           /* sum_q mu_q wa(p,q) */
  Eigen::ArrayXXd row_kk;          /* rows m00,m01,m11 of sum_q kk_q wb d d^T */
  double i2 = 0.0, a4 = 0.0, b4 = 0.0;  /* singular-cell moment integrals */

  Eigen::ArrayXXd diag_pre;        /* per-dof diagonal for preconditioning */

  GridFunction apply(const GridFunction& u) const;
  GridFunction apply_restricted(const GridFunction& u,
                                const std::vector<long>& out_nodes) const;
  double form(const GridFunction& u, const GridFunction& v) const;
};

ElasticAssembly assemble_elastic(const LameField& lame, const RegionMasks& masks,
                                 double s);

/*
 * Strong operator through the reduced spectral formula.  Every
 * transform input is compactly supported: products carry the full
 * coefficient, bare-coefficient terms carry the tilde perturbation.
 * pad widens the transform torus when the call is used as a reference.
 */
GridFunction apply_es_reduced(const LameField& lame, const GridFunction& u,
                              double s, int pad = 4);

/* Potential energy by the symmetrized strain kernel; satisfies
 * Q(u,u) = 4 U^s(u) up to roundoff because the contraction identity
 * holds pairwise. */
double potential_energy(const LameField& lame, const GridFunction& u, double s);

GridFunction solve_dirichlet(const ElasticAssembly& a, const GridFunction& f,
                             const GridFunction& F, SolveReport* report = nullptr);

/* Per-node discrete bumps on the exterior mask (which = 1 or 2):
 * single-node indicators smoothed by one Jacobi sweep of the
 * (1 + 2 dim)-point stencil with center weight 2, truncated to the
 * mask.  Ordered node-major, component-minor; bit-reproducible. */
std::vector<GridFunction> exterior_basis(const RegionMasks& masks, int which);

struct DnMap {
  Eigen::MatrixXd m;        /* |basis2| x |basis1| */
  std::string scale = "Q";  /* pairing scale tag */
};

DnMap dn_map(const ElasticAssembly& a, const std::vector<GridFunction>& basis1,
             const std::vector<GridFunction>& basis2,
             std::vector<SolveReport>* reports = nullptr);

}  /* namespace fracelast */
