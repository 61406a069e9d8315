#include <fracelast/quadrature.hpp>

#include <fracelast/fourier.hpp>

#include <cmath>
#include <stdexcept>
#include <vector>

namespace fracelast {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Tanh-sinh rule on (0,1).  Clusters nodes doubly-exponentially at both
// endpoints, so integrands with algebraic endpoint singularities in their
// derivatives (sin^2s, cos^2s) converge to machine accuracy with ~90 points.
template <typename F>
double de_quad(F&& f) {
  const int levels = 45;
  const double step = 3.5 / levels;
  double acc = 0.0;
  for (int k = -levels; k <= levels; ++k) {
    const double t = k * step;
    const double u = 0.5 * kPi * std::sinh(t);
    const double ch = std::cosh(u);
    const double wgt = step * 0.25 * kPi * std::cosh(t) / (ch * ch);
    if (wgt < 1e-240) continue;
    const double x = 0.5 * (1.0 + std::tanh(u));
    acc += wgt * f(x);
  }
  return acc;
}

// int_{-pi/2}^{pi/2} cos^{2s} = sqrt(pi) Gamma(s+1/2) / Gamma(s+1); the
// cos^{2s+2} analogue shifts both arguments by one.
double cos_power_halfturn(double p) {
  return std::sqrt(kPi) *
         std::exp(std::lgamma(0.5 * p + 0.5) - std::lgamma(0.5 * p + 1.0));
}

// Moments of the quadrant beyond two perpendicular box faces at distances
// a (x-face) and b (y-face) from the evaluation point, in the local frame
// where both outward face normals are positive axes:
//   (1/2s) int_0^{pi/2} e(th) e(th)^T r_min(th)^{-2s} dth,
// with r_min = b/sin(th) below the corner direction and a/cos(th) above it.
Eigen::Matrix2d corner_moments_local(double a, double b, double s) {
  const double split = std::atan2(b, a);
  Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
  auto accumulate = [&](double lo, double hi, bool sine_panel) {
    const double span = hi - lo;
    if (span <= 0.0) return;
    const double m00 = span * de_quad([&](double t) {
      const double th = lo + span * t;
      const double c = std::cos(th), sn = std::sin(th);
      const double rp = sine_panel ? std::pow(sn / b, 2.0 * s)
                                   : std::pow(c / a, 2.0 * s);
      return c * c * rp;
    });
    const double m01 = span * de_quad([&](double t) {
      const double th = lo + span * t;
      const double c = std::cos(th), sn = std::sin(th);
      const double rp = sine_panel ? std::pow(sn / b, 2.0 * s)
                                   : std::pow(c / a, 2.0 * s);
      return sn * c * rp;
    });
    const double m11 = span * de_quad([&](double t) {
      const double th = lo + span * t;
      const double c = std::cos(th), sn = std::sin(th);
      const double rp = sine_panel ? std::pow(sn / b, 2.0 * s)
                                   : std::pow(c / a, 2.0 * s);
      return sn * sn * rp;
    });
    m(0, 0) += m00;
    m(0, 1) += m01;
    m(1, 1) += m11;
  };
  accumulate(0.0, split, true);
  accumulate(split, 0.5 * kPi, false);
  m /= 2.0 * s;
  m(1, 0) = m(0, 1);
  return m;
}

void check_tail_args(double s) {
  if (!(s > 0.0 && s < 1.0))
    throw std::domain_error("box complement tail requires s in (0,1)");
}

}  // namespace

Eigen::Matrix2d box_complement_moments(const std::array<double, 2>& x, double w,
                                       double s) {
  check_tail_args(s);
  const double ar = w - x[0], al = w + x[0];
  const double at = w - x[1], ab = w + x[1];
  if (ar <= 0.0 || al <= 0.0 || at <= 0.0 || ab <= 0.0)
    throw std::invalid_argument("tail point must lie strictly inside the box");

  const double bfull = cos_power_halfturn(2.0 * s);
  const double bx = cos_power_halfturn(2.0 * s + 2.0);  // cos^2-weighted part
  const double by = bfull - bx;

  Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
  auto half = [&](double a, bool x_face) {
    const double scale = std::pow(a, -2.0 * s) / (2.0 * s);
    m(0, 0) += scale * (x_face ? bx : by);
    m(1, 1) += scale * (x_face ? by : bx);
  };
  half(ar, true);
  half(al, true);
  half(at, false);
  half(ab, false);

  // Each corner quadrant sits in two half-planes; subtract it once.  The
  // off-diagonal moment flips sign with the product of the outward axis
  // directions.
  auto corner = [&](double a, double b, double sxy) {
    const Eigen::Matrix2d mc = corner_moments_local(a, b, s);
    m(0, 0) -= mc(0, 0);
    m(1, 1) -= mc(1, 1);
    m(0, 1) -= sxy * mc(0, 1);
  };
  corner(ar, at, 1.0);
  corner(ar, ab, -1.0);
  corner(al, at, -1.0);
  corner(al, ab, 1.0);
  m(1, 0) = m(0, 1);
  return m;
}

double box_complement_integral(const std::array<double, 2>& x, double w, int dim,
                               double s) {
  check_tail_args(s);
  if (dim == 1) {
    const double r = w - x[0], l = w + x[0];
    if (r <= 0.0 || l <= 0.0)
      throw std::invalid_argument("tail point must lie strictly inside the box");
    return (std::pow(r, -2.0 * s) + std::pow(l, -2.0 * s)) / (2.0 * s);
  }
  if (dim == 2) return box_complement_moments(x, w, s).trace();
  throw std::invalid_argument("box complement tail supports dim 1 or 2");
}

GridFunction frac_laplacian_quadrature(const GridFunction& u, double s) {
  check_tail_args(s);
  const GridSpec& g = u.grid;
  const double c = cns(g.dim, s);
  const double h = g.h();
  const double w = g.half_width;
  GridFunction out = GridFunction::zeros(g, u.rank, u.pair);

  if (g.dim == 1) {
    const long n = g.n;
    std::vector<double> wt(static_cast<size_t>(n), 0.0);
    for (long d = 1; d < n; ++d)
      wt[static_cast<size_t>(d)] = h * std::pow(d * h, -(1.0 + 2.0 * s));
    const double diagc = std::pow(0.5 * h, 2.0 - 2.0 * s) / (2.0 - 2.0 * s);
    std::vector<double> tail(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) {
      const std::array<double, 2> xi{g.axis_coord(i), 0.0};
      tail[static_cast<size_t>(i)] = box_complement_integral(xi, w, 1, s);
    }
    for (long comp = 0; comp < u.ncomp(); ++comp) {
      for (long i = 0; i < n; ++i) {
        const double ui = u.v(comp, i);
        double acc = 0.0;
        for (long j = 0; j < n; ++j) {
          if (j == i) continue;
          acc += (ui - u.v(comp, j)) * wt[static_cast<size_t>(std::labs(i - j))];
        }
        const double um = (i > 0) ? u.v(comp, i - 1) : 0.0;
        const double up = (i + 1 < n) ? u.v(comp, i + 1) : 0.0;
        acc -= diagc * (up - 2.0 * ui + um) / (h * h);
        acc += ui * tail[static_cast<size_t>(i)];
        out.v(comp, i) = c * acc;
      }
    }
    return out;
  }

  const long n = g.n;
  const long nodes = n * n;
  // Translation-invariant pair weights indexed by absolute offset.
  Eigen::ArrayXXd wt(n, n);
  for (long dx = 0; dx < n; ++dx)
    for (long dy = 0; dy < n; ++dy) {
      if (dx == 0 && dy == 0) {
        wt(dx, dy) = 0.0;
        continue;
      }
      const double r2 = (static_cast<double>(dx) * dx + static_cast<double>(dy) * dy) * h * h;
      wt(dx, dy) = h * h * std::pow(r2, -(1.0 + s));
    }
  // Trace of the second-moment integral over the singular cell.
  const double cell_ang = de_quad([&](double t) {
    const double th = 0.25 * kPi * t;
    return 0.25 * kPi * std::pow(std::cos(th), 2.0 * s - 2.0);
  });
  const double icell =
      8.0 * std::pow(0.5 * h, 2.0 - 2.0 * s) / (2.0 - 2.0 * s) * cell_ang;
  std::vector<double> tail(static_cast<size_t>(nodes));
  for (long p = 0; p < nodes; ++p)
    tail[static_cast<size_t>(p)] = box_complement_integral(g.coords(p), w, 2, s);

  for (long comp = 0; comp < u.ncomp(); ++comp) {
    for (long ix = 0; ix < n; ++ix) {
      for (long iy = 0; iy < n; ++iy) {
        const long p = g.node_index(ix, iy);
        const double up = u.v(comp, p);
        double acc = 0.0;
        for (long jx = 0; jx < n; ++jx) {
          const long adx = std::labs(ix - jx);
          for (long jy = 0; jy < n; ++jy) {
            const long q = jx * n + jy;
            acc += (up - u.v(comp, q)) * wt(adx, std::labs(iy - jy));
          }
        }
        auto at = [&](long jx, long jy) -> double {
          if (jx < 0 || jx >= n || jy < 0 || jy >= n) return 0.0;
          return u.v(comp, jx * n + jy);
        };
        const double lap = (at(ix + 1, iy) + at(ix - 1, iy) + at(ix, iy + 1) +
                            at(ix, iy - 1) - 4.0 * up) /
                           (h * h);
        acc -= 0.25 * lap * icell;
        acc += up * tail[static_cast<size_t>(p)];
        out.v(comp, p) = c * acc;
      }
    }
  }
  return out;
}

}  // namespace fracelast
