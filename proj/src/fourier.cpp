#include <fracelast/fourier.hpp>

#include <unsupported/Eigen/FFT>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

namespace fracelast {

namespace {

constexpr double kPi = std::numbers::pi_v<double>;

bool valid_order(double s) {
  return (s > 0.0 && s < 1.0) || (s > -1.0 && s < 0.0);
}

}  // namespace

double cns(int n, double s) {
  if (n != 1 && n != 2) throw std::invalid_argument("cns: dimension must be 1 or 2");
  if (!valid_order(s)) throw std::domain_error("cns: order must lie in (0,1) or (-1,0)");
  double num = std::pow(4.0, s) * std::tgamma(0.5 * n + s);
  double den = std::pow(kPi, 0.5 * n) * std::abs(std::tgamma(-s));
  return num / den;
}

DenseTensor<double> zeta_kernel(const std::array<double, 2>& x,
                                const std::array<double, 2>& y, int n, double s) {
  double d[2] = {0.0, 0.0};
  double r2 = 0.0;
  for (int i = 0; i < n; ++i) {
    d[i] = x[i] - y[i];
    r2 += d[i] * d[i];
  }
  if (r2 == 0.0) throw std::domain_error("zeta_kernel: evaluation at coincident points");
  double scale = std::sqrt(0.5 * cns(n, s)) * std::pow(r2, -0.5 * (0.5 * n + s + 1.0));
  DenseTensor<double> z({n});
  for (int i = 0; i < n; ++i) z.data[i] = scale * d[i];
  return z;
}

void FracParams::validate() const {
  if (n != 1 && n != 2) throw std::invalid_argument("FracParams: dimension must be 1 or 2");
  if (!(s > 0.0 && s < 1.0)) throw std::domain_error("FracParams: order must lie in (0,1)");
}

FourierPlan::FourierPlan(const GridSpec& grid, int pad_factor, MarginCheck check)
    : grid_(grid), pad_(pad_factor), check_(check) {
  grid_.validate();
  if (pad_ < 4) throw std::invalid_argument("FourierPlan: pad factor must be >= 4");
  pn_ = pad_ * grid_.n;
  xi_.resize(pn_);
  double base = 2.0 * kPi / (pn_ * grid_.h());
  for (int k = 0; k < pn_; ++k) {
    int kk = (k <= pn_ / 2) ? k : k - pn_;
    xi_[k] = base * kk;
  }
}

void FourierPlan::xi_at(long f, double* out) const {
  if (grid_.dim == 1) {
    out[0] = xi_[f];
    out[1] = 0.0;
  } else {
    out[0] = xi_[f / pn_];
    out[1] = xi_[f % pn_];
  }
}

double FourierPlan::parseval_weight() const {
  double cell = std::pow(grid_.h(), grid_.dim);
  double total = (grid_.dim == 1) ? pn_ : static_cast<double>(pn_) * pn_;
  return cell / total;
}

void FourierPlan::check_support(const GridFunction& u, const char* op) const {
  if (check_ == MarginCheck::off) return;
  double amax = u.v.abs().maxCoeff();
  if (amax == 0.0) return;
  double margin = 0.5 * grid_.half_width + 1e-12;
  double worst = 0.0;
  for (long p = 0; p < grid_.nodes(); ++p) {
    auto c = grid_.coords(p);
    bool outside = std::abs(c[0]) > margin ||
                   (grid_.dim == 2 && std::abs(c[1]) > margin);
    if (outside) worst = std::max(worst, u.v.col(p).abs().maxCoeff());
  }
  if (worst <= 1e-9 * amax) return;
  if (check_ == MarginCheck::strict) {
    throw std::runtime_error(std::string(op) +
                             ": field support leaves the middle half of the box");
  }
  static std::atomic<bool> warned{false};
  if (!warned.exchange(true)) {
    std::fprintf(stderr,
                 "warning: %s: field support leaves the middle half of the box "
                 "(relative boundary magnitude %.2e)\n",
                 op, worst / amax);
  }
}

SpectralField FourierPlan::analyze(const GridFunction& u) const {
  if (!u.grid.same_as(grid_))
    throw std::invalid_argument("FourierPlan: grid mismatch");
  int nc = u.ncomp();
  SpectralField sf;
  sf.rank = u.rank;
  sf.pair = u.pair;
  sf.S.resize(nc, nfreq());
  Eigen::FFT<double> fft;
  int N = grid_.n;
  if (grid_.dim == 1) {
    Eigen::VectorXcd in = Eigen::VectorXcd::Zero(pn_), out(pn_);
    for (int c = 0; c < nc; ++c) {
      in.setZero();
      for (int j = 0; j < N; ++j) in[j] = u.v(c, j);
      fft.fwd(out, in);
      sf.S.row(c) = out.transpose();
    }
  } else {
    Eigen::MatrixXcd W(pn_, pn_);
    Eigen::VectorXcd tmp(pn_), out(pn_);
    for (int c = 0; c < nc; ++c) {
      W.setZero();
      for (int ix = 0; ix < N; ++ix)
        for (int iy = 0; iy < N; ++iy)
          W(ix, iy) = u.v(c, grid_.node_index(ix, iy));
      for (int j = 0; j < pn_; ++j) {
        tmp = W.col(j);
        fft.fwd(out, tmp);
        W.col(j) = out;
      }
      for (int i = 0; i < pn_; ++i) {
        tmp = W.row(i).transpose();
        fft.fwd(out, tmp);
        W.row(i) = out.transpose();
      }
      for (int kx = 0; kx < pn_; ++kx)
        for (int ky = 0; ky < pn_; ++ky)
          sf.S(c, static_cast<long>(kx) * pn_ + ky) = W(kx, ky);
    }
  }
  return sf;
}

GridFunction FourierPlan::synthesize(const SpectralField& sf) const {
  GridFunction out = GridFunction::zeros(grid_, sf.rank, sf.pair);
  if (sf.S.rows() != out.ncomp() || sf.S.cols() != nfreq())
    throw std::invalid_argument("FourierPlan: spectrum shape mismatch");
  Eigen::FFT<double> fft;
  int N = grid_.n;
  if (grid_.dim == 1) {
    Eigen::VectorXcd in(pn_), res(pn_);
    for (int c = 0; c < out.ncomp(); ++c) {
      in = sf.S.row(c).transpose();
      fft.inv(res, in);
      for (int j = 0; j < N; ++j) out.v(c, j) = res[j].real();
    }
  } else {
    Eigen::MatrixXcd W(pn_, pn_);
    Eigen::VectorXcd tmp(pn_), res(pn_);
    for (int c = 0; c < out.ncomp(); ++c) {
      for (int kx = 0; kx < pn_; ++kx)
        for (int ky = 0; ky < pn_; ++ky)
          W(kx, ky) = sf.S(c, static_cast<long>(kx) * pn_ + ky);
      for (int i = 0; i < pn_; ++i) {
        tmp = W.row(i).transpose();
        fft.inv(res, tmp);
        W.row(i) = res.transpose();
      }
      for (int j = 0; j < pn_; ++j) {
        tmp = W.col(j);
        fft.inv(res, tmp);
        W.col(j) = res;
      }
      for (int ix = 0; ix < N; ++ix)
        for (int iy = 0; iy < N; ++iy)
          out.v(c, grid_.node_index(ix, iy)) = W(ix, iy).real();
    }
  }
  return out;
}

SpectralField frac_laplacian(const FourierPlan& plan, const SpectralField& u, double t) {
  if (!(t > -1.0 && t <= 1.0))
    throw std::domain_error("frac_laplacian: order must lie in (-1, 1]");
  SpectralField out = u;
  double xi[2];
  for (long f = 0; f < plan.nfreq(); ++f) {
    plan.xi_at(f, xi);
    double x2 = xi[0] * xi[0] + xi[1] * xi[1];
    out.S.col(f) *= (x2 > 0.0) ? std::pow(x2, t) : 0.0;
  }
  return out;
}

SpectralField riesz_hessian(const FourierPlan& plan, const SpectralField& u, double s) {
  if (u.rank != 0 || u.pair)
    throw std::invalid_argument("riesz_hessian: scalar input required");
  int d = plan.grid().dim;
  SpectralField out;
  out.rank = 2;
  out.pair = false;
  out.S.resize(d * d, plan.nfreq());
  double xi[2];
  for (long f = 0; f < plan.nfreq(); ++f) {
    plan.xi_at(f, xi);
    double x2 = xi[0] * xi[0] + xi[1] * xi[1];
    double common = (x2 > 0.0) ? std::pow(x2, s - 1.0) : 0.0;
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j)
        out.S(i * d + j, f) = common * xi[i] * xi[j] * u.S(0, f);
  }
  return out;
}

SpectralField riesz_hessian_contract(const FourierPlan& plan, const SpectralField& v,
                                     double s) {
  if (v.rank != 1 || v.pair)
    throw std::invalid_argument("riesz_hessian_contract: vector input required");
  int d = plan.grid().dim;
  SpectralField out;
  out.rank = 1;
  out.pair = false;
  out.S.resize(d, plan.nfreq());
  double xi[2];
  for (long f = 0; f < plan.nfreq(); ++f) {
    plan.xi_at(f, xi);
    double x2 = xi[0] * xi[0] + xi[1] * xi[1];
    double common = (x2 > 0.0) ? std::pow(x2, s - 1.0) : 0.0;
    std::complex<double> dot = 0.0;
    for (int j = 0; j < d; ++j) dot += xi[j] * v.S(j, f);
    for (int i = 0; i < d; ++i) out.S(i, f) = common * xi[i] * dot;
  }
  return out;
}

std::pair<SpectralField, SpectralField> helmholtz(const FourierPlan& plan,
                                                  const SpectralField& u) {
  if (u.rank != 1 || u.pair)
    throw std::invalid_argument("helmholtz: vector input required");
  int d = plan.grid().dim;
  SpectralField grad = u, rest = u;
  double xi[2];
  for (long f = 0; f < plan.nfreq(); ++f) {
    plan.xi_at(f, xi);
    double x2 = xi[0] * xi[0] + xi[1] * xi[1];
    if (x2 > 0.0) {
      std::complex<double> dot = 0.0;
      for (int j = 0; j < d; ++j) dot += xi[j] * u.S(j, f);
      for (int i = 0; i < d; ++i) grad.S(i, f) = (dot / x2) * xi[i];
    } else {
      for (int i = 0; i < d; ++i) grad.S(i, f) = 0.0;
    }
    rest.S.col(f) = u.S.col(f) - grad.S.col(f);
  }
  return {grad, rest};
}

namespace {

// shared rowwise loop of the three pair-field operators: per pair row r and
// per matrix column, apply  alpha_r(x2) Id + beta_r(x2) xi xi^T  in frequency
template <class Alpha, class Beta>
SpectralField pair_multiplier(const FourierPlan& plan, const SpectralField& u,
                              double s, const char* name, Alpha alpha, Beta beta) {
  if (!u.pair || (u.rank != 1 && u.rank != 2))
    throw std::invalid_argument(std::string(name) +
                                ": pair of vector or matrix fields required");
  FracParams fp{plan.grid().dim, s};
  fp.validate();
  int d = plan.grid().dim;
  int base = (u.rank == 1) ? d : d * d;
  int ncols = (u.rank == 1) ? 1 : d;
  int stride = (u.rank == 1) ? 1 : d;
  double dr[2] = {fp.d1(), fp.d3()};
  double drp[2] = {fp.d2(), fp.d4()};
  SpectralField out = u;
  double xi[2];
  for (long f = 0; f < plan.nfreq(); ++f) {
    plan.xi_at(f, xi);
    double x2 = xi[0] * xi[0] + xi[1] * xi[1];
    for (int p = 0; p < 2; ++p) {
      double a = alpha(dr[p], x2);
      double b = beta(drp[p], x2);
      for (int j = 0; j < ncols; ++j) {
        std::complex<double> dot = 0.0;
        for (int i = 0; i < d; ++i) dot += xi[i] * u.S(p * base + i * stride + j, f);
        for (int i = 0; i < d; ++i) {
          long c = p * base + i * stride + j;
          out.S(c, f) = a * u.S(c, f) + b * xi[i] * dot;
        }
      }
    }
  }
  return out;
}

}  // namespace

SpectralField prime_op(const FourierPlan& plan, const SpectralField& u, double s) {
  return pair_multiplier(
      plan, u, s, "prime_op", [](double dr, double) { return dr; },
      [](double drp, double x2) { return x2 > 0.0 ? drp / x2 : 0.0; });
}

SpectralField d_op(const FourierPlan& plan, const SpectralField& u, double s) {
  return pair_multiplier(
      plan, u, s, "d_op", [](double dr, double x2) { return dr * x2; },
      [](double drp, double) { return drp; });
}

SpectralField riesz_d_op(const FourierPlan& plan, const SpectralField& u, double s) {
  return pair_multiplier(
      plan, u, s, "riesz_d_op",
      [s](double dr, double x2) { return x2 > 0.0 ? dr * std::pow(x2, s) : 0.0; },
      [s](double drp, double x2) {
        return x2 > 0.0 ? drp * std::pow(x2, s - 1.0) : 0.0;
      });
}

GridFunction frac_laplacian(const FourierPlan& plan, const GridFunction& u, double t) {
  plan.check_support(u, "frac_laplacian");
  return plan.synthesize(frac_laplacian(plan, plan.analyze(u), t));
}

GridFunction riesz_hessian(const FourierPlan& plan, const GridFunction& u, double s) {
  plan.check_support(u, "riesz_hessian");
  return plan.synthesize(riesz_hessian(plan, plan.analyze(u), s));
}

GridFunction riesz_hessian_contract(const FourierPlan& plan, const GridFunction& v,
                                    double s) {
  plan.check_support(v, "riesz_hessian_contract");
  return plan.synthesize(riesz_hessian_contract(plan, plan.analyze(v), s));
}

std::pair<GridFunction, GridFunction> helmholtz(const FourierPlan& plan,
                                                const GridFunction& u) {
  plan.check_support(u, "helmholtz");
  auto [gs, rs] = helmholtz(plan, plan.analyze(u));
  GridFunction grad = plan.synthesize(gs);
  GridFunction rest = u;
  rest.v -= grad.v;
  return {grad, rest};
}

GridFunction prime_op(const FourierPlan& plan, const GridFunction& u, double s) {
  plan.check_support(u, "prime_op");
  return plan.synthesize(prime_op(plan, plan.analyze(u), s));
}

GridFunction d_op(const FourierPlan& plan, const GridFunction& u, double s) {
  plan.check_support(u, "d_op");
  return plan.synthesize(d_op(plan, plan.analyze(u), s));
}

GridFunction riesz_d_op(const FourierPlan& plan, const GridFunction& u, double s) {
  plan.check_support(u, "riesz_d_op");
  return plan.synthesize(riesz_d_op(plan, plan.analyze(u), s));
}

double h_norm(const FourierPlan& plan, const GridFunction& u, double r) {
  plan.check_support(u, "h_norm");
  SpectralField sf = plan.analyze(u);
  double xi[2];
  double acc = 0.0;
  for (long f = 0; f < plan.nfreq(); ++f) {
    plan.xi_at(f, xi);
    double x2 = xi[0] * xi[0] + xi[1] * xi[1];
    acc += std::pow(1.0 + x2, r) * sf.S.col(f).squaredNorm();
  }
  return std::sqrt(plan.parseval_weight() * acc);
}

double riesz_seminorm(const FourierPlan& plan, const GridFunction& u, double t) {
  plan.check_support(u, "riesz_seminorm");
  SpectralField sf = plan.analyze(u);
  double xi[2];
  double acc = 0.0;
  for (long f = 0; f < plan.nfreq(); ++f) {
    plan.xi_at(f, xi);
    double x2 = xi[0] * xi[0] + xi[1] * xi[1];
    if (x2 > 0.0) acc += std::pow(x2, t) * sf.S.col(f).squaredNorm();
  }
  return std::sqrt(plan.parseval_weight() * acc);
}

}  // namespace fracelast
