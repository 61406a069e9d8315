#pragma once

#include <vector>

#include <fracelast/elastic.hpp>
#include <fracelast/fourier.hpp>
#include <fracelast/grid.hpp>

namespace fracelast {

// Coefficient pair (mu, k) with its exterior constant.  The squared length
// mu^2 + k^2 stays bounded away from zero because both components carry the
// admissibility floors of the source field.
struct GammaField {
  GridSpec grid;
  Eigen::ArrayXd mu, kk;
  double mu0 = 0.0, k0 = 0.0;
  Eigen::ArrayXd norm2;

  static GammaField from_lame(const LameField& lame);
};

// Matrix potential of the transformed problem; entry (i,j) lives at
// component i*dim+j.  Vanishes identically for constant coefficients.
struct QPotential {
  GridFunction q;
  double s = 0.5;
};

QPotential q_potential(const GammaField& gamma, double s, int pad = 8);

// w = pair (mu u, k u) and its left inverse u = (mu, k).w / |(mu, k)|^2.
GridFunction forward_transform(const GammaField& gamma, const GridFunction& u);
GridFunction back_transform(const GammaField& gamma, const GridFunction& w);

// plain contraction (mu, k).w without the normalization
GridFunction pair_contract(const GammaField& gamma, const GridFunction& w);

// pointwise least-squares scalar ratio r with a ~ r b
GridFunction gauge_ratio(const GammaField& a, const GammaField& b);

// w.Q rowwise; accepts a pair field or a plain vector field
GridFunction apply_q(const QPotential& q, const GridFunction& w);

// bilinear form of the transformed problem and its adjoint (same formula,
// slots swapped)
double bq_form(const FourierPlan& plan, const QPotential& q, const GridFunction& w1,
               const GridFunction& w2, double s);
double bq_star(const FourierPlan& plan, const QPotential& q, const GridFunction& w1,
               const GridFunction& w2, double s);

// Transformed Dirichlet solve.  The unknown stays in the transformed-pair
// range: the solve runs on the vector representative against the quadrature
// assembly and the result is mapped forward, so exterior rows agree with
// gamma tensor f bitwise.
GridFunction solve_transformed(const ElasticAssembly& a, const GammaField& gamma,
                               const GridFunction& f, const GridFunction& g_src,
                               SolveReport* report = nullptr);

// Weak mismatch between the transform-domain evaluation of the reduced
// operator and the quadrature assembly, over a fixed test battery, together
// with the fitted proportionality constant.
struct ReductionCheck {
  double residual = 0.0;
  double cstar = 0.0;
};

ReductionCheck reduction_residual(const ElasticAssembly& a, const GridFunction& u,
                                  int pad = 8);

// Exterior map of the transformed problem.  The reduced route evaluates the
// pairing through the quadrature assembly (one shared linear system); the
// spectral route re-derives every pairing in the transform domain and serves
// as the independent diagnostic.
enum class QDnMode { reduced, spectral };

DnMap dn_map_q(const ElasticAssembly& a, const GammaField& gamma, const QPotential& q,
               const std::vector<GridFunction>& basis1,
               const std::vector<GridFunction>& basis2, QDnMode mode = QDnMode::reduced,
               std::vector<SolveReport>* reports = nullptr, int pad = 8);

}  // namespace fracelast
