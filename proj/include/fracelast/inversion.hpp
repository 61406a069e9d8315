#pragma once

/*
 * Exterior-data toolchain: the two-path integral identity linking DN
 * differences to potential differences, least-squares control of
 * interior traces from an exterior window, probe recovery of the
 * weighted potential difference from DN matrices alone, the
 * multiplicative gauge solve, output least squares for the shear
 * modulus with the bulk slaved through a fixed Poisson ratio, and the
 * one dimensional gauge-class demonstration.
 */

#include <fracelast/elastic.hpp>
#include <fracelast/liouville.hpp>

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace fracelast {

/* DN matrices for one or two parameter sets over shared geometry and
 * bases.  map2 may be empty when only one set is observed. */
struct DnData {
  DnMap map1, map2;
  double s = 0.5;
  double noise = 0.0;  /* relative level baked into the entries, 0 = clean */
};

/* i.i.d. Gaussian perturbation of every entry, scaled by rel_level
 * times the Frobenius norm over the square root of the entry count. */
void add_dn_noise(DnMap& map, double rel_level, std::uint64_t seed);

struct AlessandriniCheck {
  double lhs = 0.0;
  double rhs = 0.0;
  double residual = 0.0;
};

/*
 * Two-path evaluation of the integral identity: lhs pairs the DN
 * difference of the two sets against (f1, f2) on the kernel-form
 * scale times (n/2 + s); rhs pairs the transform-domain potential
 * difference against the two transformed solutions.  Both sets must
 * share the Poisson field and the exterior constants; f1 and f2 are
 * exterior data carried by the first and second window.
 */
AlessandriniCheck alessandrini_check(const LameField& set1, const LameField& set2,
                                     const RegionMasks& masks, const GridFunction& f1,
                                     const GridFunction& f2, double s, int pad = 8);

struct RungeProblem {
  GridFunction target;  /* vector field supported in omega */
  int window = 1;       /* control window, 1 or 2 */
  double alpha = 1e-4;  /* control-energy weight, > 0 */
};

struct RungeControl {
  Eigen::VectorXd coeffs;  /* exterior-basis coefficients on the window */
  GridFunction f;          /* the control as a grid field */
  double misfit = 0.0;     /* L2(omega) distance of its solution to the target */
};

/* Minimizes |solution(f) - target|^2 over omega plus alpha |f|^2 over
 * the window, f running over the window's exterior basis; the normal
 * equations are solved by CG. */
RungeControl runge_control(const ElasticAssembly& a, const RungeProblem& problem);

/* (alpha, misfit) rows sharing one solution-operator build. */
std::vector<std::array<double, 2>> runge_sweep(const ElasticAssembly& a,
                                               const GridFunction& target, int window,
                                               const std::vector<double>& alphas);

struct ProbeEstimate {
  double center = 0.0;
  double value = 0.0;   /* recovered weighted potential difference at the center */
  double misfit1 = 0.0; /* control quality on each window */
  double misfit2 = 0.0;
};

/*
 * Probe recovery of (Gamma1.Gamma2)(Q1 - Q2) at interior centers from
 * the DN matrices alone: per center, a unit-L2 bump is targeted from
 * both windows through the background model and the controls are paired
 * through the DN difference.  One dimension; diagnostic quality.
 */
std::vector<ProbeEstimate> recover_weighted_qdiff(const DnData& data,
                                                  const ElasticAssembly& background,
                                                  const std::vector<double>& centers,
                                                  double alpha, double radius);

/* Ground truth for the recovery demonstrations: the pointwise product
 * of the two square-root fields contracted over the pair index, times
 * the potential difference. */
GridFunction weighted_qdiff(const LameField& set1, const LameField& set2, double s,
                            int pad = 8);

/*
 * Gauge step: solves the transformed problem for a scalar factor r
 * with exterior value one against a candidate potential.  When the
 * candidate is the potential of gamma1 itself the constant solves the
 * discrete system and r comes back identically one; when the candidate
 * stems from a scaled field rho Gamma1 the factor tracks rho.  One
 * dimension.
 */
GridFunction gauge_solve(const ElasticAssembly& a1, const GammaField& gamma1,
                         const QPotential& q, int pad = 8);

/* Nodal-M model on omega with L slaved through a fixed Poisson ratio,
 * exterior at the background; square-root fields filled in. */
LameField lame_from_m(const GridSpec& grid, const RegionMasks& masks, double nu,
                      double M0, const Eigen::ArrayXd& m_omega);

/* Observation operator for reconstruction: the full DN block over the
 * union of both window bases. */
DnMap observe_dn(const ElasticAssembly& a);

struct ReconstructionConfig {
  double nu = 0.25;         /* fixed Poisson ratio, L = 2 nu M in one dimension */
  double beta = 1e-8;       /* smoothness weight on second differences */
  int max_iter = 8;
  double tol = 1e-10;       /* relative objective decrease stop */
  double fd_step = 1e-3;    /* Jacobian step relative to M0 */
  double floor_frac = 0.15; /* positivity floor as a fraction of M0 */
  const LameField* truth = nullptr;  /* error reporting only */
};

struct IterateRecord {
  int iter = 0;
  double objective = 0.0;
  double rel_m = 0.0;  /* relative L2(omega) errors against cfg.truth */
  double rel_l = 0.0;
  double step = 0.0;   /* norm of the applied update */
  bool projected = false;
};

struct Reconstruction {
  LameField lame;
  Eigen::ArrayXd m_omega;
  std::vector<IterateRecord> trace;
  double rel_m = 0.0;
  double rel_l = 0.0;
};

/* Output least squares for nodal M inside omega from an observed DN
 * matrix, Gauss-Newton with finite-difference Jacobian columns, a
 * smoothness penalty against the background, backtracking steps and a
 * positivity projection.  One dimension. */
Reconstruction reconstruct_lame(const DnData& obs, const GridSpec& grid,
                                const RegionMasks& masks, double M0,
                                const ReconstructionConfig& cfg);

struct GaugeDemo {
  std::vector<double> m_values;
  Eigen::MatrixXd pairwise;   /* relative DN distances inside the class */
  Eigen::VectorXd contrast;   /* per row, distance to the shifted bulk witness */
};

/* Constant-coefficient DN tables at fixed bulk modulus L + 2M = K:
 * distances inside the class collapse, the contrast column against
 * K_contrast stays separated.  One dimension. */
GaugeDemo gauge_demo_1d(const GridSpec& grid, const RegionSet& regions, double s,
                        double K, const std::vector<double>& m_values,
                        double K_contrast);

}  /* namespace fracelast */
