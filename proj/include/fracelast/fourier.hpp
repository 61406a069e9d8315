#pragma once

#include <fracelast/grid.hpp>
#include <fracelast/tensor.hpp>

#include <Eigen/Dense>
#include <complex>
#include <utility>

namespace fracelast {

// Normalizing constant of the pointwise fractional Laplacian,
//   4^s Gamma(n/2+s) / (pi^{n/2} |Gamma(-s)|).
// Defined for s in (0,1) and, for composed negative-order factors, (-1,0).
double cns(int n, double s);

// Kernel direction vector sqrt(C/2) (x-y)/|x-y|^{n/2+s+1}.  Throws at x == y.
DenseTensor<double> zeta_kernel(const std::array<double, 2>& x,
                                const std::array<double, 2>& y, int n, double s);

// Order s together with the dimension-dependent coefficient quadruple used by
// the second-order operator pair below.
struct FracParams {
  int n = 1;
  double s = 0.5;

  void validate() const;
  double nprime() const { return 2.0 * (n - 2) / static_cast<double>(n); }
  double d1() const { return 2.0 * n + 4.0 * s + nprime(); }
  double d2() const { return 2.0 * nprime() * s; }
  double d3() const { return static_cast<double>(n); }
  double d4() const { return 2.0 * n * s; }
};

enum class MarginCheck { warn, strict, off };

// A field in the transform domain of the padded box.  Operator compositions
// stay here so that chained multipliers compose exactly; only the final
// synthesis truncates back to the unpadded grid.
struct SpectralField {
  Eigen::MatrixXcd S;  // ncomp rows, one column per padded frequency
  int rank = 0;
  bool pair = false;
};

// Spectral transform on a zero-padded box.  The padding keeps periodic images
// of compactly supported fields far enough away that multiplier operators
// approximate their whole-space counterparts; inputs are expected to vanish
// outside the middle half of the box and this is checked (warn/strict/off).
class FourierPlan {
 public:
  explicit FourierPlan(const GridSpec& grid, int pad_factor = 4,
                       MarginCheck check = MarginCheck::warn);

  const GridSpec& grid() const { return grid_; }
  int pad_factor() const { return pad_; }
  int padded() const { return pn_; }
  long nfreq() const { return grid_.dim == 1 ? pn_ : static_cast<long>(pn_) * pn_; }
  double xi_axis(int k) const { return xi_[k]; }

  // frequency components of flat spectral index f
  void xi_at(long f, double* out) const;

  SpectralField analyze(const GridFunction& u) const;
  GridFunction synthesize(const SpectralField& sf) const;

  // l2 weight per spectral sample so that sums over the spectrum of |.|^2
  // reproduce h^n sums over nodes
  double parseval_weight() const;

  void check_support(const GridFunction& u, const char* op) const;

 private:
  GridSpec grid_;
  int pad_ = 4;
  int pn_ = 0;
  MarginCheck check_ = MarginCheck::warn;
  Eigen::ArrayXd xi_;
};

// Transform-domain operator cores.  Each applies one frequency multiplier; all
// are composable without leaving the transform domain.
SpectralField frac_laplacian(const FourierPlan& plan, const SpectralField& u, double t);
SpectralField riesz_hessian(const FourierPlan& plan, const SpectralField& u, double s);
SpectralField riesz_hessian_contract(const FourierPlan& plan, const SpectralField& v,
                                     double s);
std::pair<SpectralField, SpectralField> helmholtz(const FourierPlan& plan,
                                                  const SpectralField& u);
SpectralField prime_op(const FourierPlan& plan, const SpectralField& u, double s);
SpectralField d_op(const FourierPlan& plan, const SpectralField& u, double s);
SpectralField riesz_d_op(const FourierPlan& plan, const SpectralField& u, double s);

// (-\Delta)^t as the multiplier |xi|^{2t}, componentwise, t in (-1, 1].
GridFunction frac_laplacian(const FourierPlan& plan, const GridFunction& u, double t);

// scalar u -> matrix field with entries |xi|^{2s-2} xi_i xi_j in frequency;
// matrix entry (i,j) lives at component i*dim+j
GridFunction riesz_hessian(const FourierPlan& plan, const GridFunction& u, double s);

// vector v -> vector with components |xi|^{2s-2} xi_i (xi . v^)
GridFunction riesz_hessian_contract(const FourierPlan& plan, const GridFunction& v,
                                    double s);

// gradient / divergence-free splitting; the zero mode goes to the second part,
// and the second part is returned as the exact pointwise complement
std::pair<GridFunction, GridFunction> helmholtz(const FourierPlan& plan,
                                                const GridFunction& u);

// rowwise multiplier d_r Id + d'_r xi xi^T/|xi|^2 on a pair of vector (or
// matrix, columnwise) fields; rows carry (d1, d2) and (d3, d4)
GridFunction prime_op(const FourierPlan& plan, const GridFunction& u, double s);

// rowwise second-order operator -(d_r Laplace + d'_r grad div), spectral
GridFunction d_op(const FourierPlan& plan, const GridFunction& u, double s);

// the previous operator with a (-\Delta)^{s-1} factor fused in
GridFunction riesz_d_op(const FourierPlan& plan, const GridFunction& u, double s);

// Bessel-potential norm of order r
double h_norm(const FourierPlan& plan, const GridFunction& u, double r);

// homogeneous seminorm |(-\Delta)^{t/2} u|_{L^2}
double riesz_seminorm(const FourierPlan& plan, const GridFunction& u, double t);

}  // namespace fracelast
