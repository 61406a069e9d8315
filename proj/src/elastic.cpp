#include <fracelast/elastic.hpp>

#include <fracelast/fourier.hpp>
#include <fracelast/quadrature.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace fracelast {

namespace {

constexpr double kPi = 3.14159265358979323846;

template <typename F>
double simpson(F&& f, double a, double b, int panels) {
  const double h = (b - a) / panels;
  double acc = 0.0;
  for (int k = 0; k < panels; ++k) {
    const double x0 = a + k * h;
    acc += (h / 6.0) * (f(x0) + 4.0 * f(x0 + 0.5 * h) + f(x0 + h));
  }
  return acc;
}

/* Exact integral of |x-y|^{-1-2s} over two cells m >= 2 apart: second
 * difference of the kernel's second antiderivative at the center
 * distance. */
double cell_pair_mass(long m, double h, double s) {
  auto p2 = [&](double r) {
    if (s == 0.5) return -std::log(r);
    return std::pow(r, 1.0 - 2.0 * s) / ((1.0 - 2.0 * s) * (-2.0 * s));
  };
  const double d = m * h;
  return p2(d + h) - 2.0 * p2(d) + p2(d - h);
}

/* Touching cells: the difference quotient absorbs one power, leaving
 * |x-y|^{1-2s} integrable across the shared edge; same second-difference
 * construction, divided by h^2 to act on node differences. */
double adjacent_mass(double h, double s) {
  const double q = (2.0 - 2.0 * s) * (3.0 - 2.0 * s);
  return (std::pow(2.0 * h, 3.0 - 2.0 * s) - 2.0 * std::pow(h, 3.0 - 2.0 * s)) /
         (q * h * h);
}

/* Coincident cell, acting on the centered derivative. */
double self_mass(double h, double s) {
  return 2.0 * std::pow(h, 3.0 - 2.0 * s) / ((2.0 - 2.0 * s) * (3.0 - 2.0 * s));
}

/* First-order moments of a separated cell pair.  Pairs two or more
 * cells apart act on node differences; the dropped cross terms with
 * the nodal derivative sum to O(h^{2-2s}) and are restored here:
 *   g1  weights (u_i - u_j)(u'_i + u'_j),
 *   g2a weights u'_i^2 + u'_j^2,  g2b weights 2 u'_i u'_j.
 * All reduce to z-integrals against the overlap length h - |z|. */
struct PairMoments {
  double g1 = 0.0, g2a = 0.0, g2b = 0.0;
};

PairMoments pair_moments(long m, double h, double s) {
  static const double gx[8] = {0.0950125098376374, 0.2816035507792589,
                               0.4580167776572274, 0.6178762444026438,
                               0.7554044083550030, 0.8656312023878318,
                               0.9445750230732326, 0.9894009349916499};
  static const double gw[8] = {0.1894506104550685, 0.1826034150449236,
                               0.1691565193950025, 0.1495959888165767,
                               0.1246289712555339, 0.0951585116824928,
                               0.0622535239386479, 0.0271524594117541};
  PairMoments pm;
  for (int half = 0; half < 2; ++half) {
    const double a = (half == 0) ? -h : 0.0;
    const double b = (half == 0) ? 0.0 : h;
    const double mid = 0.5 * (a + b), rad = 0.5 * (b - a);
    for (int k = 0; k < 16; ++k) {
      const double t = (k < 8) ? -gx[k] : gx[k - 8];
      const double w = rad * gw[k % 8];
      const double z = mid + rad * t;
      const double el = h - std::abs(z);
      const double kv = std::pow(m * h + z, -1.0 - 2.0 * s);
      pm.g1 += w * z * el * kv;
      pm.g2a += w * el * (0.25 * z * z + el * el / 12.0) * kv;
      pm.g2b += w * el * (el * el / 12.0 - 0.25 * z * z) * kv;
    }
  }
  return pm;
}

struct CellMoments {
  double i2 = 0.0;  /* trace of the second-moment integral */
  double a4 = 0.0;  /* fourth moment, equal-index pairs */
  double b4 = 0.0;  /* fourth moment, mixed pairs */
};

/* Moments of the singular cell [-h/2,h/2]^2 in polar form; the radial
 * integral is closed-form, the angular ones are smooth on the octant. */
CellMoments cell_moments(double h, double s) {
  const double pref = std::pow(0.5 * h, 2.0 - 2.0 * s) / (2.0 - 2.0 * s);
  auto cp = [&](double th) { return std::pow(std::cos(th), 2.0 * s - 2.0); };
  CellMoments m;
  m.i2 = 8.0 * pref * simpson([&](double t) { return cp(t); }, 0.0, 0.25 * kPi, 64);
  m.a4 = 4.0 * pref * simpson(
                          [&](double t) {
                            const double c = std::cos(t), sn = std::sin(t);
                            return (c * c * c * c + sn * sn * sn * sn) * cp(t);
                          },
                          0.0, 0.25 * kPi, 64);
  m.b4 = 8.0 * pref * simpson(
                          [&](double t) {
                            const double c = std::cos(t), sn = std::sin(t);
                            return c * c * sn * sn * cp(t);
                          },
                          0.0, 0.25 * kPi, 64);
  return m;
}

void validate_vector_field(const GridFunction& u, const GridSpec& g, const char* who) {
  if (!u.grid.same_as(g)) throw std::invalid_argument(std::string(who) + ": grid mismatch");
  if (u.rank != 1 || u.pair)
    throw std::invalid_argument(std::string(who) + ": expects a plain vector field");
}

std::vector<long> nonzero_columns(const GridFunction& u) {
  std::vector<long> idx;
  for (long q = 0; q < u.v.cols(); ++q) {
    bool nz = false;
    for (long c = 0; c < u.v.rows(); ++c)
      if (u.v(c, q) != 0.0) { nz = true; break; }
    if (nz) idx.push_back(q);
  }
  return idx;
}

template <typename Op>
int pcg(Op&& aop, const Eigen::VectorXd& b, const Eigen::ArrayXd& dinv,
        Eigen::VectorXd& x, double tol, int maxit, double* relres) {
  x = Eigen::VectorXd::Zero(b.size());
  const double bnorm = b.norm();
  if (relres) *relres = 0.0;
  if (bnorm == 0.0) return 0;
  Eigen::VectorXd r = b;
  Eigen::VectorXd z = (dinv * r.array()).matrix();
  Eigen::VectorXd p = z;
  double rz = r.dot(z);
  for (int it = 1; it <= maxit; ++it) {
    const Eigen::VectorXd ap = aop(p);
    const double alpha = rz / p.dot(ap);
    x += alpha * p;
    r -= alpha * ap;
    const double rel = r.norm() / bnorm;
    if (rel <= tol) {
      if (relres) *relres = rel;
      return it;
    }
    z = (dinv * r.array()).matrix();
    const double rz2 = r.dot(z);
    p = z + (rz2 / rz) * p;
    rz = rz2;
  }
  throw std::runtime_error("conjugate gradient failed to reach the residual target");
}

}  // namespace

ElasticAssembly assemble_elastic(const LameField& lame, const RegionMasks& masks,
                                 double s) {
  if (!lame.grid.same_as(masks.grid))
    throw std::invalid_argument("assemble_elastic: field and masks disagree on the grid");
  if (!(s > 0.0 && s < 1.0))
    throw std::domain_error("assemble_elastic: s must lie in (0,1)");

  ElasticAssembly a;
  a.grid = lame.grid;
  a.masks = masks;
  a.lame = lame;
  a.s = s;

  const GridSpec& g = lame.grid;
  const double h = g.h();
  const double w = g.half_width;
  const double c = cns(g.dim, s);

  if (g.dim == 1) {
    const long n = g.n;
    a.dense = Eigen::MatrixXd::Zero(n, n);
    std::vector<double> mass(static_cast<size_t>(n), 0.0);
    for (long m = 2; m < n; ++m) mass[static_cast<size_t>(m)] = cell_pair_mass(m, h, s);
    const double m1 = adjacent_mass(h, s);
    const double m0 = self_mass(h, s);
    const Eigen::ArrayXd& kk = lame.kk;

    std::vector<PairMoments> pmom(static_cast<size_t>(n));
    for (long m = 2; m < n; ++m) pmom[static_cast<size_t>(m)] = pair_moments(m, h, s);
    const double beta = 1.0 / (2.0 * h);
    auto deriv_stencil = [n, beta](long i, std::array<std::pair<long, double>, 2>& st) {
      int cnt = 0;
      if (i + 1 < n) st[cnt++] = {i + 1, beta};
      if (i - 1 >= 0) st[cnt++] = {i - 1, -beta};
      return cnt;
    };

    for (long i = 0; i < n; ++i) {
      std::array<std::pair<long, double>, 2> pi;
      const int npi = deriv_stencil(i, pi);
      for (long j = i + 1; j < n; ++j) {
        const double wm = (j - i == 1) ? m1 : mass[static_cast<size_t>(j - i)];
        const double wq = 2.0 * c * kk[i] * kk[j] * wm;  /* both pair orders */
        a.dense(i, i) += wq;
        a.dense(j, j) += wq;
        a.dense(i, j) -= wq;
        a.dense(j, i) -= wq;
        if (j - i < 2) continue;

        const PairMoments& q = pmom[static_cast<size_t>(j - i)];
        const double c2 = 2.0 * c * kk[i] * kk[j];
        std::array<std::pair<long, double>, 2> pj;
        const int npj = deriv_stencil(j, pj);
        const double wg = -0.5 * c2 * q.g1;
        for (int t = 0; t < npi + npj; ++t) {
          const auto& e = (t < npi) ? pi[t] : pj[t - npi];
          const double di = wg * e.second;
          a.dense(i, e.first) += di;
          a.dense(e.first, i) += di;
          a.dense(j, e.first) -= di;
          a.dense(e.first, j) -= di;
        }
        /* (u_i - u_j)(u''_j - u''_i) against the same second moment */
        const double wg2 = -0.5 * c2 * q.g2a;
        std::array<std::pair<long, double>, 6> tt;
        int ntt = 0;
        const double ih2 = 1.0 / (h * h);
        if (j - 1 >= 0) tt[ntt++] = {j - 1, ih2};
        tt[ntt++] = {j, -2.0 * ih2};
        if (j + 1 < n) tt[ntt++] = {j + 1, ih2};
        if (i - 1 >= 0) tt[ntt++] = {i - 1, -ih2};
        tt[ntt++] = {i, 2.0 * ih2};
        if (i + 1 < n) tt[ntt++] = {i + 1, -ih2};
        for (int t = 0; t < ntt; ++t) {
          const double di = wg2 * tt[t].second;
          a.dense(i, tt[t].first) += di;
          a.dense(tt[t].first, i) += di;
          a.dense(j, tt[t].first) -= di;
          a.dense(tt[t].first, j) -= di;
        }
        for (int ta = 0; ta < npi; ++ta)
          for (int tb = 0; tb < npi; ++tb)
            a.dense(pi[ta].first, pi[tb].first) += c2 * q.g2a * pi[ta].second * pi[tb].second;
        for (int ta = 0; ta < npj; ++ta)
          for (int tb = 0; tb < npj; ++tb)
            a.dense(pj[ta].first, pj[tb].first) += c2 * q.g2a * pj[ta].second * pj[tb].second;
        for (int ta = 0; ta < npi; ++ta)
          for (int tb = 0; tb < npj; ++tb) {
            const double di = -c2 * q.g2b * pi[ta].second * pj[tb].second;
            a.dense(pi[ta].first, pj[tb].first) += di;
            a.dense(pj[tb].first, pi[ta].first) += di;
          }
      }
    }
    const double c0 = c * m0 / (4.0 * h * h);
    for (long i = 0; i < n; ++i) {
      const double cd = c0 * kk[i] * kk[i];
      const long im = i - 1, ip = i + 1;
      if (ip < n) a.dense(ip, ip) += cd;
      if (im >= 0) a.dense(im, im) += cd;
      if (ip < n && im >= 0) {
        a.dense(ip, im) -= cd;
        a.dense(im, ip) -= cd;
      }
    }
    for (long i = 0; i < n; ++i) {
      const double t = box_complement_integral({g.axis_coord(static_cast<int>(i)), 0.0},
                                               w, 1, s);
      a.dense(i, i) += 2.0 * h * c * kk[i] * lame.k0 * t;
    }

    const long ni = static_cast<long>(masks.omega_idx.size());
    a.interior_block.resize(ni, ni);
    for (long r = 0; r < ni; ++r)
      for (long q = 0; q < ni; ++q)
        a.interior_block(r, q) = a.dense(masks.omega_idx[static_cast<size_t>(r)],
                                         masks.omega_idx[static_cast<size_t>(q)]);
    a.diag_pre = a.dense.diagonal().transpose().array();
    return a;
  }

  const long n = g.n;
  const long nodes = g.nodes();
  a.wa.resize(n, n);
  a.wb.resize(n, n);
  const double pref = 0.5 * c * h * h * h * h;
  for (long dx = 0; dx < n; ++dx)
    for (long dy = 0; dy < n; ++dy) {
      if (dx == 0 && dy == 0) {
        a.wa(dx, dy) = 0.0;
        a.wb(dx, dy) = 0.0;
        continue;
      }
      const double r2 = (static_cast<double>(dx) * dx + static_cast<double>(dy) * dy) * h * h;
      a.wa(dx, dy) = pref * std::pow(r2, -(1.0 + s));
      a.wb(dx, dy) = pref * std::pow(r2, -(2.0 + s));
    }

  a.tail_t.resize(nodes);
  a.tail_m.resize(3, nodes);
  for (long p = 0; p < nodes; ++p) {
    const Eigen::Matrix2d m = box_complement_moments(g.coords(p), w, s);
    a.tail_t(p) = m.trace();
    a.tail_m(0, p) = m(0, 0);
    a.tail_m(1, p) = m(0, 1);
    a.tail_m(2, p) = m(1, 1);
  }

  const CellMoments cm = cell_moments(h, s);
  a.i2 = cm.i2;
  a.a4 = cm.a4;
  a.b4 = cm.b4;

  /* Full in-box mass per node; the diagonal preconditioner falls out of
   * the same sums (the small derivative-stencil part is left out). */
  const Eigen::ArrayXd& mu = lame.mu;
  const Eigen::ArrayXd& kk = lame.kk;
  a.row_mu.resize(nodes);
  a.row_kk.resize(3, nodes);
  a.diag_pre.resize(2, nodes);
  const double th2 = c * h * h;
  for (long ix = 0; ix < n; ++ix)
    for (long iy = 0; iy < n; ++iy) {
      const long p = g.node_index(static_cast<int>(ix), static_cast<int>(iy));
      double sa = 0.0, s00 = 0.0, s01 = 0.0, s11 = 0.0;
      for (long jx = 0; jx < n; ++jx) {
        const long adx = std::labs(ix - jx);
        const double dx = (jx - ix) * h;
        for (long jy = 0; jy < n; ++jy) {
          if (jx == ix && jy == iy) continue;
          const long q = jx * n + jy;
          const double wav = a.wa(adx, std::labs(iy - jy));
          const double wbv = a.wb(adx, std::labs(iy - jy));
          const double dy = (jy - iy) * h;
          sa += mu[q] * wav;
          s00 += kk[q] * wbv * dx * dx;
          s01 += kk[q] * wbv * dx * dy;
          s11 += kk[q] * wbv * dy * dy;
        }
      }
      a.row_mu(p) = sa;
      a.row_kk(0, p) = s00;
      a.row_kk(1, p) = s01;
      a.row_kk(2, p) = s11;

      const double ainf = 4.0 * mu[p] * lame.mu0;
      const double binf = 4.0 * kk[p] * lame.k0;  /* n' = 0 in two dimensions */
      a.diag_pre(0, p) = 8.0 * (mu[p] * sa + kk[p] * s00) +
                         th2 * (ainf * a.tail_t(p) + binf * a.tail_m(0, p));
      a.diag_pre(1, p) = 8.0 * (mu[p] * sa + kk[p] * s11) +
                         th2 * (ainf * a.tail_t(p) + binf * a.tail_m(2, p));
    }
  return a;
}

GridFunction ElasticAssembly::apply_restricted(const GridFunction& u,
                                               const std::vector<long>& out_nodes) const {
  validate_vector_field(u, grid, "ElasticAssembly::apply");
  GridFunction out = GridFunction::zeros(grid, 1);

  if (grid.dim == 1) {
    const Eigen::VectorXd uv = u.v.row(0).matrix().transpose();
    for (long p : out_nodes) out.v(0, p) = dense.row(p).dot(uv);
    return out;
  }

  const long n = grid.n;
  const double h = grid.h();
  const double c = cns(2, s);
  const Eigen::ArrayXd& mu = lame.mu;
  const Eigen::ArrayXd& kk = lame.kk;
  const std::vector<long> src = nonzero_columns(u);
  const double th2 = c * h * h;
  const double half_c_h2 = 0.5 * c * h * h;

  /* Singular-cell tensor at a node: second and fourth cell moments
   * applied to the centered gradient. */
  auto cell_tensor = [&](long qx, long qy, double t[2][2]) {
    const long q = qx * n + qy;
    auto at = [&](long jx, long jy, int comp) -> double {
      if (jx < 0 || jx >= n || jy < 0 || jy >= n) return 0.0;
      return u.v(comp, jx * n + jy);
    };
    const double g00 = (at(qx + 1, qy, 0) - at(qx - 1, qy, 0)) / (2.0 * h);
    const double g01 = (at(qx, qy + 1, 0) - at(qx, qy - 1, 0)) / (2.0 * h);
    const double g10 = (at(qx + 1, qy, 1) - at(qx - 1, qy, 1)) / (2.0 * h);
    const double g11 = (at(qx, qy + 1, 1) - at(qx, qy - 1, 1)) / (2.0 * h);
    const double aq = 4.0 * mu[q] * mu[q];
    const double bq = 4.0 * kk[q] * kk[q];
    t[0][0] = half_c_h2 * (aq * 0.5 * i2 * g00 + bq * (a4 * g00 + b4 * g11));
    t[1][1] = half_c_h2 * (aq * 0.5 * i2 * g11 + bq * (a4 * g11 + b4 * g00));
    const double toff = bq * b4 * (g01 + g10);
    t[0][1] = half_c_h2 * (aq * 0.5 * i2 * g01 + toff);
    t[1][0] = half_c_h2 * (aq * 0.5 * i2 * g10 + toff);
  };

  for (long p : out_nodes) {
    const long ix = p / n, iy = p % n;
    const double up0 = u.v(0, p), up1 = u.v(1, p);
    /* u(p) part of the pair sum, taken over the whole box */
    double acc0 = 8.0 * (mu[p] * row_mu(p) * up0 +
                         kk[p] * (row_kk(0, p) * up0 + row_kk(1, p) * up1));
    double acc1 = 8.0 * (mu[p] * row_mu(p) * up1 +
                         kk[p] * (row_kk(1, p) * up0 + row_kk(2, p) * up1));
    /* u(q) part, restricted to the support */
    for (long q : src) {
      if (q == p) continue;
      const long jx = q / n, jy = q % n;
      const double wav = wa(std::labs(ix - jx), std::labs(iy - jy));
      const double wbv = wb(std::labs(ix - jx), std::labs(iy - jy));
      const double dx = (jx - ix) * h, dy = (jy - iy) * h;
      const double uq0 = u.v(0, q), uq1 = u.v(1, q);
      const double dq = dx * uq0 + dy * uq1;
      acc0 -= 8.0 * (mu[p] * mu[q] * wav * uq0 + kk[p] * kk[q] * wbv * dq * dx);
      acc1 -= 8.0 * (mu[p] * mu[q] * wav * uq1 + kk[p] * kk[q] * wbv * dq * dy);
    }

    const double ainf = 4.0 * mu[p] * lame.mu0;
    const double binf = 4.0 * kk[p] * lame.k0;
    acc0 += th2 * (ainf * tail_t(p) * up0 +
                   binf * (tail_m(0, p) * up0 + tail_m(1, p) * up1));
    acc1 += th2 * (ainf * tail_t(p) * up1 +
                   binf * (tail_m(1, p) * up0 + tail_m(2, p) * up1));

    double t[2][2];
    if (ix > 0) {
      cell_tensor(ix - 1, iy, t);
      acc0 += t[0][0] / (2.0 * h);
      acc1 += t[1][0] / (2.0 * h);
    }
    if (ix + 1 < n) {
      cell_tensor(ix + 1, iy, t);
      acc0 -= t[0][0] / (2.0 * h);
      acc1 -= t[1][0] / (2.0 * h);
    }
    if (iy > 0) {
      cell_tensor(ix, iy - 1, t);
      acc0 += t[0][1] / (2.0 * h);
      acc1 += t[1][1] / (2.0 * h);
    }
    if (iy + 1 < n) {
      cell_tensor(ix, iy + 1, t);
      acc0 -= t[0][1] / (2.0 * h);
      acc1 -= t[1][1] / (2.0 * h);
    }

    out.v(0, p) = acc0;
    out.v(1, p) = acc1;
  }
  return out;
}

GridFunction ElasticAssembly::apply(const GridFunction& u) const {
  std::vector<long> all(static_cast<size_t>(grid.nodes()));
  for (long p = 0; p < grid.nodes(); ++p) all[static_cast<size_t>(p)] = p;
  return apply_restricted(u, all);
}

double ElasticAssembly::form(const GridFunction& u, const GridFunction& v) const {
  validate_vector_field(v, grid, "ElasticAssembly::form");
  const GridFunction au = apply_restricted(u, nonzero_columns(v));
  return (v.v * au.v).sum();
}

GridFunction apply_es_reduced(const LameField& lame, const GridFunction& u, double s,
                              int pad) {
  const GridSpec& g = lame.grid;
  validate_vector_field(u, g, "apply_es_reduced");
  FracParams fp{g.dim, s};
  fp.validate();
  FourierPlan plan(g, pad);
  plan.check_support(u, "apply_es_reduced");

  const int d = g.dim;
  auto scalar_field = [&](const Eigen::ArrayXd& vals) {
    GridFunction f = GridFunction::zeros(g, 0);
    f.v.row(0) = vals.transpose();
    return f;
  };

  GridFunction umu = u, ukk = u;
  for (int cc = 0; cc < d; ++cc) {
    umu.v.row(cc) *= lame.mu.transpose();
    ukk.v.row(cc) *= lame.kk.transpose();
  }
  const GridFunction mut = scalar_field(lame.mu - lame.mu0);
  const GridFunction kkt = scalar_field(lame.kk - lame.k0);

  SpectralField sp = plan.analyze(umu);
  const GridFunction fl_umu = plan.synthesize(frac_laplacian(plan, sp, s));
  const GridFunction rc_umu = plan.synthesize(riesz_hessian_contract(plan, sp, s));
  sp = plan.analyze(ukk);
  const GridFunction fl_ukk = plan.synthesize(frac_laplacian(plan, sp, s));
  const GridFunction rc_ukk = plan.synthesize(riesz_hessian_contract(plan, sp, s));
  sp = plan.analyze(mut);
  const GridFunction fl_mu = plan.synthesize(frac_laplacian(plan, sp, s));
  const GridFunction rh_mu = plan.synthesize(riesz_hessian(plan, sp, s));
  sp = plan.analyze(kkt);
  const GridFunction fl_kk = plan.synthesize(frac_laplacian(plan, sp, s));
  const GridFunction rh_kk = plan.synthesize(riesz_hessian(plan, sp, s));

  const double d1 = fp.d1(), d2 = fp.d2(), d3 = fp.d3(), d4 = fp.d4();
  const double np = fp.nprime(), nn = static_cast<double>(d);
  const auto mu = lame.mu.transpose();
  const auto kk = lame.kk.transpose();

  GridFunction out = GridFunction::zeros(g, 1);
  for (int i = 0; i < d; ++i) {
    out.v.row(i) = d1 * mu * fl_umu.v.row(i) + d3 * kk * fl_ukk.v.row(i) +
                   d2 * mu * rc_umu.v.row(i) + d4 * kk * rc_ukk.v.row(i) -
                   u.v.row(i) * (d1 * mu * fl_mu.v.row(0) + d3 * kk * fl_kk.v.row(0));
    for (int j = 0; j < d; ++j)
      out.v.row(i) -= 2.0 * s *
                      (np * mu * rh_mu.v.row(i * d + j) + nn * kk * rh_kk.v.row(i * d + j)) *
                      u.v.row(j);
  }
  out.v /= 0.5 * nn + s;
  return out;
}

double potential_energy(const LameField& lame, const GridFunction& u, double s) {
  const GridSpec& g = lame.grid;
  validate_vector_field(u, g, "potential_energy");
  if (!(s > 0.0 && s < 1.0))
    throw std::domain_error("potential_energy: s must lie in (0,1)");

  const double h = g.h();
  const double w = g.half_width;
  const double c = cns(g.dim, s);
  const SqrtParams bg{lame.lam0, lame.mu0, lame.k0};
  auto sq = [&](long p) { return SqrtParams{lame.lam[p], lame.mu[p], lame.kk[p]}; };

  double acc = 0.0;
  if (g.dim == 1) {
    const long n = g.n;
    std::vector<double> mass(static_cast<size_t>(n), 0.0);
    std::vector<PairMoments> pmom(static_cast<size_t>(n));
    for (long m = 2; m < n; ++m) {
      mass[static_cast<size_t>(m)] = cell_pair_mass(m, h, s);
      pmom[static_cast<size_t>(m)] = pair_moments(m, h, s);
    }
    const double m1 = adjacent_mass(h, s);
    const double m0 = self_mass(h, s);
    std::vector<double> ud(static_cast<size_t>(n)), us(static_cast<size_t>(n));
    for (long i = 0; i < n; ++i) {
      const double um = (i > 0) ? u.v(0, i - 1) : 0.0;
      const double up = (i + 1 < n) ? u.v(0, i + 1) : 0.0;
      ud[static_cast<size_t>(i)] = (up - um) / (2.0 * h);
      us[static_cast<size_t>(i)] = (up - 2.0 * u.v(0, i) + um) / (h * h);
    }
    for (long i = 0; i < n; ++i)
      for (long j = i + 1; j < n; ++j) {
        const double du = u.v(0, j) - u.v(0, i);
        const double di = ud[static_cast<size_t>(i)], dj = ud[static_cast<size_t>(j)];
        if (du == 0.0 && di == 0.0 && dj == 0.0) continue;
        const TwoPointCoeffs tc = two_point_coeffs(sq(i), sq(j), 1);
        const double wm = (j - i == 1) ? m1 : mass[static_cast<size_t>(j - i)];
        double pair = du * du * wm;
        if (j - i >= 2) {
          const PairMoments& q = pmom[static_cast<size_t>(j - i)];
          pair += q.g1 * du * (di + dj) + q.g2a * (di * di + dj * dj) -
                  2.0 * q.g2b * di * dj +
                  q.g2a * du * (us[static_cast<size_t>(j)] - us[static_cast<size_t>(i)]);
        }
        acc += (tc.cTr + 2.0 * tc.cSym) * pair * 0.5 * c;
      }
    for (long i = 0; i < n; ++i) {
      const double um = (i > 0) ? u.v(0, i - 1) : 0.0;
      const double up = (i + 1 < n) ? u.v(0, i + 1) : 0.0;
      const double dp = (up - um) / (2.0 * h);
      if (dp != 0.0) {
        const TwoPointCoeffs tc = two_point_coeffs(sq(i), sq(i), 1);
        acc += 0.5 * (tc.cTr + 2.0 * tc.cSym) * dp * dp * 0.5 * c * m0;
      }
      const double ui = u.v(0, i);
      if (ui != 0.0) {
        const TwoPointCoeffs tc = two_point_coeffs(sq(i), bg, 1);
        const double t = box_complement_integral({g.axis_coord(static_cast<int>(i)), 0.0},
                                                 w, 1, s);
        acc += h * (tc.cTr + 2.0 * tc.cSym) * ui * ui * 0.5 * c * t;
      }
    }
    return acc;
  }

  const long n = g.n;
  const double h4 = h * h * h * h;
  for (long p = 0; p < g.nodes(); ++p) {
    const long ix = p / n, iy = p % n;
    const double up0 = u.v(0, p), up1 = u.v(1, p);
    for (long q = p + 1; q < g.nodes(); ++q) {
      const double du0 = u.v(0, q) - up0, du1 = u.v(1, q) - up1;
      if (du0 == 0.0 && du1 == 0.0) continue;
      const long jx = q / n, jy = q % n;
      const double dx = (jx - ix) * h, dy = (jy - iy) * h;
      const double r2 = dx * dx + dy * dy;
      const TwoPointCoeffs tc = two_point_coeffs(sq(p), sq(q), 2);
      const double dd = du0 * dx + du1 * dy;
      acc += 0.5 * c * h4 *
             ((tc.cTr + tc.cSym) * std::pow(r2, -(2.0 + s)) * dd * dd +
              tc.cSym * std::pow(r2, -(1.0 + s)) * (du0 * du0 + du1 * du1));
    }
  }

  const CellMoments cm = cell_moments(h, s);
  for (long p = 0; p < g.nodes(); ++p) {
    const long ix = p / n, iy = p % n;
    auto at = [&](long jx, long jy, int comp) -> double {
      if (jx < 0 || jx >= n || jy < 0 || jy >= n) return 0.0;
      return u.v(comp, jx * n + jy);
    };
    const double g00 = (at(ix + 1, iy, 0) - at(ix - 1, iy, 0)) / (2.0 * h);
    const double g01 = (at(ix, iy + 1, 0) - at(ix, iy - 1, 0)) / (2.0 * h);
    const double g10 = (at(ix + 1, iy, 1) - at(ix - 1, iy, 1)) / (2.0 * h);
    const double g11 = (at(ix, iy + 1, 1) - at(ix, iy - 1, 1)) / (2.0 * h);
    if (g00 != 0.0 || g01 != 0.0 || g10 != 0.0 || g11 != 0.0) {
      const TwoPointCoeffs tc = two_point_coeffs(sq(p), sq(p), 2);
      const double q4 = cm.a4 * (g00 * g00 + g11 * g11) + 2.0 * cm.b4 * g00 * g11 +
                        cm.b4 * (g01 + g10) * (g01 + g10);
      const double frob = g00 * g00 + g01 * g01 + g10 * g10 + g11 * g11;
      acc += 0.5 * h * h * 0.5 * c *
             ((tc.cTr + tc.cSym) * q4 + tc.cSym * 0.5 * cm.i2 * frob);
    }
    const double u0 = u.v(0, p), u1 = u.v(1, p);
    if (u0 != 0.0 || u1 != 0.0) {
      const TwoPointCoeffs tc = two_point_coeffs(sq(p), bg, 2);
      const Eigen::Matrix2d mm = box_complement_moments(g.coords(p), w, s);
      const double umu = mm(0, 0) * u0 * u0 + 2.0 * mm(0, 1) * u0 * u1 +
                         mm(1, 1) * u1 * u1;
      acc += h * h * 0.5 * c *
             ((tc.cTr + tc.cSym) * umu + tc.cSym * mm.trace() * (u0 * u0 + u1 * u1));
    }
  }
  return acc;
}

GridFunction solve_dirichlet(const ElasticAssembly& a, const GridFunction& f,
                             const GridFunction& F, SolveReport* report) {
  const GridSpec& g = a.grid;
  validate_vector_field(f, g, "solve_dirichlet");
  validate_vector_field(F, g, "solve_dirichlet");

  const int nc = g.dim;
  GridFunction ef = f;
  for (long p : a.masks.omega_idx)
    for (int cc = 0; cc < nc; ++cc) ef.v(cc, p) = 0.0;

  const std::vector<long>& in = a.masks.omega_idx;
  const long ni = static_cast<long>(in.size());
  const long nd = ni * nc;
  const double hn = std::pow(g.h(), g.dim);

  const GridFunction afe = a.apply_restricted(ef, in);
  Eigen::VectorXd b(nd);
  Eigen::ArrayXd dinv(nd);
  for (long k = 0; k < ni; ++k)
    for (int cc = 0; cc < nc; ++cc) {
      b[k * nc + cc] = hn * F.v(cc, in[static_cast<size_t>(k)]) -
                       afe.v(cc, in[static_cast<size_t>(k)]);
      const double dp = a.diag_pre(cc, in[static_cast<size_t>(k)]);
      dinv[k * nc + cc] = (dp > 0.0) ? 1.0 / dp : 1.0;
    }

  Eigen::VectorXd z;
  double relres = 0.0;
  int iters = 0;
  if (g.dim == 1) {
    iters = pcg([&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
                  return a.interior_block * x;
                },
                b, dinv, z, 1e-10, 20000, &relres);
  } else {
    GridFunction zf = GridFunction::zeros(g, 1);
    iters = pcg([&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
                  for (long k = 0; k < ni; ++k)
                    for (int cc = 0; cc < nc; ++cc)
                      zf.v(cc, in[static_cast<size_t>(k)]) = x[k * nc + cc];
                  const GridFunction az = a.apply_restricted(zf, in);
                  Eigen::VectorXd y(nd);
                  for (long k = 0; k < ni; ++k)
                    for (int cc = 0; cc < nc; ++cc)
                      y[k * nc + cc] = az.v(cc, in[static_cast<size_t>(k)]);
                  return y;
                },
                b, dinv, z, 1e-10, 20000, &relres);
  }

  GridFunction u = ef;
  for (long k = 0; k < ni; ++k)
    for (int cc = 0; cc < nc; ++cc) u.v(cc, in[static_cast<size_t>(k)]) = z[k * nc + cc];

  if (report) {
    report->iterations = iters;
    report->rel_residual = relres;
    FourierPlan plan(g, 4);
    report->hs_norm = h_norm(plan, u, a.s);
    report->data_norm = h_norm(plan, ef, a.s) + l2_norm(F);
    report->stability_ratio =
        (report->data_norm > 0.0) ? report->hs_norm / report->data_norm : 0.0;
  }
  return u;
}

std::vector<GridFunction> exterior_basis(const RegionMasks& masks, int which) {
  if (which != 1 && which != 2)
    throw std::invalid_argument("exterior_basis: which must be 1 or 2");
  const std::vector<long>& idx = (which == 1) ? masks.w1_idx : masks.w2_idx;
  const std::vector<std::uint8_t>& mask = (which == 1) ? masks.w1 : masks.w2;
  const GridSpec& g = masks.grid;
  const int d = g.dim;
  const double wc = 2.0 / (2.0 + 2.0 * d);
  const double wn = 1.0 / (2.0 + 2.0 * d);

  std::vector<GridFunction> basis;
  basis.reserve(idx.size() * static_cast<size_t>(d));
  for (long p : idx) {
    std::vector<long> nbr;
    if (d == 1) {
      if (p > 0) nbr.push_back(p - 1);
      if (p + 1 < g.n) nbr.push_back(p + 1);
    } else {
      const long ix = p / g.n, iy = p % g.n;
      if (ix > 0) nbr.push_back(p - g.n);
      if (ix + 1 < g.n) nbr.push_back(p + g.n);
      if (iy > 0) nbr.push_back(p - 1);
      if (iy + 1 < g.n) nbr.push_back(p + 1);
    }
    for (int cc = 0; cc < d; ++cc) {
      GridFunction e = GridFunction::zeros(g, 1);
      e.v(cc, p) = wc;
      for (long q : nbr)
        if (mask[static_cast<size_t>(q)]) e.v(cc, q) = wn;
      basis.push_back(std::move(e));
    }
  }
  return basis;
}

DnMap dn_map(const ElasticAssembly& a, const std::vector<GridFunction>& basis1,
             const std::vector<GridFunction>& basis2,
             std::vector<SolveReport>* reports) {
  std::vector<long> out;
  for (const GridFunction& gfn : basis2) {
    const std::vector<long> nz = nonzero_columns(gfn);
    out.insert(out.end(), nz.begin(), nz.end());
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());

  const GridFunction zf = GridFunction::zeros(a.grid, 1);
  DnMap dn;
  dn.m.resize(static_cast<long>(basis2.size()), static_cast<long>(basis1.size()));
  for (size_t i = 0; i < basis1.size(); ++i) {
    SolveReport rep;
    const GridFunction ui = solve_dirichlet(a, basis1[i], zf, reports ? &rep : nullptr);
    if (reports) reports->push_back(rep);
    const GridFunction au = a.apply_restricted(ui, out);
    for (size_t j = 0; j < basis2.size(); ++j)
      dn.m(static_cast<long>(j), static_cast<long>(i)) = (basis2[j].v * au.v).sum();
  }
  return dn;
}

}  // namespace fracelast
