#include <fracelast/inversion.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace fracelast {

namespace {

/* plain CG on a small SPD dense system, zero start; ill conditioned
 * normal equations hit a rounding floor before tight tolerances, so a
 * stalled iteration is accepted once the residual is already small */
Eigen::VectorXd cg_dense(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double tol,
                         int maxit) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  if (b.size() == 0) return x;
  Eigen::VectorXd r = b;
  Eigen::VectorXd p = b;
  double rr = r.squaredNorm();
  const double b2 = rr;
  if (b2 == 0.0) return x;
  Eigen::VectorXd best = x;
  double best_rr = rr;
  int since_drop = 0;
  for (int it = 0; it < maxit; ++it) {
    const Eigen::VectorXd ap = a * p;
    const double alpha = rr / p.dot(ap);
    x += alpha * p;
    r -= alpha * ap;
    const double rr2 = r.squaredNorm();
    if (std::sqrt(rr2 / b2) <= tol) return x;
    if (rr2 < 0.25 * best_rr) {
      since_drop = 0;
    } else {
      ++since_drop;
    }
    if (rr2 < best_rr) {
      best_rr = rr2;
      best = x;
    }
    if (since_drop >= 100 && std::sqrt(best_rr / b2) <= 1e-9) return best;
    p = r + (rr2 / rr) * p;
    rr = rr2;
  }
  if (std::sqrt(best_rr / b2) <= 1e-9) return best;
  throw std::runtime_error("runge_control: CG cap exceeded on the normal equations");
}

/* solution operator columns over one window's exterior basis */
struct ControlBuild {
  std::vector<GridFunction> basis;
  Eigen::MatrixXd t;     /* omega dofs x basis size */
  Eigen::MatrixXd gram;  /* window overlap, L2 weighted */
};

ControlBuild control_build(const ElasticAssembly& a, int window) {
  if (window != 1 && window != 2)
    throw std::invalid_argument("runge_control: window must be 1 or 2");
  ControlBuild cb;
  cb.basis = exterior_basis(a.masks, window);
  const std::vector<long>& om = a.masks.omega_idx;
  const int dim = a.grid.dim;
  const long nb = static_cast<long>(cb.basis.size());
  cb.t.resize(dim * static_cast<long>(om.size()), nb);
  const GridFunction zero = GridFunction::zeros(a.grid, 1);
  for (long k = 0; k < nb; ++k) {
    const GridFunction v = solve_dirichlet(a, cb.basis[static_cast<size_t>(k)], zero);
    for (size_t p = 0; p < om.size(); ++p)
      for (int c = 0; c < dim; ++c)
        cb.t(static_cast<long>(p) * dim + c, k) = v.v(c, om[p]);
  }
  cb.gram.resize(nb, nb);
  for (long i = 0; i < nb; ++i)
    for (long j = 0; j <= i; ++j) {
      const double g =
          l2_inner(cb.basis[static_cast<size_t>(i)], cb.basis[static_cast<size_t>(j)]);
      cb.gram(i, j) = g;
      cb.gram(j, i) = g;
    }
  return cb;
}

Eigen::VectorXd omega_dofs(const GridFunction& u, const std::vector<long>& om) {
  const int dim = u.grid.dim;
  Eigen::VectorXd out(dim * static_cast<long>(om.size()));
  for (size_t p = 0; p < om.size(); ++p)
    for (int c = 0; c < dim; ++c) out[static_cast<long>(p) * dim + c] = u.v(c, om[p]);
  return out;
}

void check_target(const GridFunction& target, const RegionMasks& masks) {
  if (target.rank != 1 || target.pair)
    throw std::invalid_argument("runge_control: target must be a plain vector field");
  if (!target.grid.same_as(masks.grid))
    throw std::invalid_argument("runge_control: target grid mismatch");
  for (long p = 0; p < target.grid.nodes(); ++p)
    if (!masks.omega[static_cast<size_t>(p)] && target.v.col(p).abs().maxCoeff() != 0.0)
      throw std::invalid_argument("runge_control: target support leaves omega");
}

/* coefficients -> control field and misfit for one alpha */
RungeControl control_solve(const ControlBuild& cb, const ElasticAssembly& a,
                           const Eigen::VectorXd& tvec, double alpha) {
  const double hw = std::pow(a.grid.h(), a.grid.dim);
  const Eigen::MatrixXd nrm =
      hw * (cb.t.transpose() * cb.t) + alpha * cb.gram;
  const Eigen::VectorXd rhs = hw * (cb.t.transpose() * tvec);
  const int cap = 2000 + 200 * static_cast<int>(rhs.size());
  RungeControl rc;
  rc.coeffs = cg_dense(nrm, rhs, 1e-13, cap);
  rc.f = GridFunction::zeros(a.grid, 1);
  for (long k = 0; k < rc.coeffs.size(); ++k)
    rc.f.v += rc.coeffs[k] * cb.basis[static_cast<size_t>(k)].v;
  rc.misfit = std::sqrt(hw) * (cb.t * rc.coeffs - tvec).norm();
  return rc;
}

}  /* namespace */

void add_dn_noise(DnMap& map, double rel_level, std::uint64_t seed) {
  if (rel_level == 0.0) return;
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double fro = map.m.norm();
  const double sigma = rel_level * fro / std::sqrt(static_cast<double>(map.m.size()));
  for (long j = 0; j < map.m.cols(); ++j)
    for (long i = 0; i < map.m.rows(); ++i) map.m(i, j) += sigma * gauss(gen);
}

AlessandriniCheck alessandrini_check(const LameField& set1, const LameField& set2,
                                     const RegionMasks& masks, const GridFunction& f1,
                                     const GridFunction& f2, double s, int pad) {
  if (!set1.grid.same_as(set2.grid) || !set1.grid.same_as(masks.grid))
    throw std::invalid_argument("alessandrini_check: grid mismatch");
  if (set1.L0 != set2.L0 || set1.M0 != set2.M0)
    throw std::invalid_argument("alessandrini_check: exterior constants differ");
  if ((set1.nu - set2.nu).abs().maxCoeff() > 1e-10)
    throw std::invalid_argument(
        "alessandrini_check: poisson fields differ, the sets are not in gauge");

  const ElasticAssembly a1 = assemble_elastic(set1, masks, s);
  const ElasticAssembly a2 = assemble_elastic(set2, masks, s);
  const GridFunction zero = GridFunction::zeros(set1.grid, 1);
  const GridFunction v1 = solve_dirichlet(a1, f1, zero);
  const GridFunction v2 = solve_dirichlet(a2, f2, zero);

  const double scale = 0.5 * set1.grid.dim + s;

  AlessandriniCheck out;
  out.lhs = scale * (a1.form(v1, f2) - a2.form(v2, f1));

  const GammaField g1 = GammaField::from_lame(set1);
  const GammaField g2 = GammaField::from_lame(set2);
  const QPotential q1 = q_potential(g1, s, pad);
  const QPotential q2 = q_potential(g2, s, pad);
  QPotential dq;
  dq.s = s;
  dq.q = q2.q;
  dq.q.v -= q1.q.v;
  const GridFunction w1 = forward_transform(g1, v1);
  const GridFunction w2 = forward_transform(g2, v2);
  out.rhs = l2_inner(apply_q(dq, w1), w2);
  out.residual = std::abs(out.lhs - out.rhs) /
                 (std::abs(out.lhs) + std::abs(out.rhs) +
                  std::numeric_limits<double>::epsilon());
  return out;
}

RungeControl runge_control(const ElasticAssembly& a, const RungeProblem& problem) {
  if (!(problem.alpha > 0.0))
    throw std::invalid_argument("runge_control: alpha must be positive");
  check_target(problem.target, a.masks);
  const ControlBuild cb = control_build(a, problem.window);
  return control_solve(cb, a, omega_dofs(problem.target, a.masks.omega_idx),
                       problem.alpha);
}

std::vector<std::array<double, 2>> runge_sweep(const ElasticAssembly& a,
                                               const GridFunction& target, int window,
                                               const std::vector<double>& alphas) {
  check_target(target, a.masks);
  const ControlBuild cb = control_build(a, window);
  const Eigen::VectorXd tvec = omega_dofs(target, a.masks.omega_idx);
  std::vector<std::array<double, 2>> rows;
  rows.reserve(alphas.size());
  for (double alpha : alphas) {
    if (!(alpha > 0.0)) throw std::invalid_argument("runge_sweep: alpha must be positive");
    const RungeControl rc = control_solve(cb, a, tvec, alpha);
    rows.push_back({alpha, rc.misfit});
  }
  return rows;
}

std::vector<ProbeEstimate> recover_weighted_qdiff(const DnData& data,
                                                  const ElasticAssembly& background,
                                                  const std::vector<double>& centers,
                                                  double alpha, double radius) {
  if (background.grid.dim != 1)
    throw std::invalid_argument("recover_weighted_qdiff: one dimensional only");
  if (data.map1.m.rows() != data.map2.m.rows() ||
      data.map1.m.cols() != data.map2.m.cols())
    throw std::invalid_argument("recover_weighted_qdiff: DN shapes differ");
  if (!(alpha > 0.0) || !(radius > 0.0))
    throw std::invalid_argument("recover_weighted_qdiff: alpha and radius must be positive");

  const ControlBuild cb1 = control_build(background, 1);
  const ControlBuild cb2 = control_build(background, 2);
  if (data.map1.m.cols() != static_cast<long>(cb1.basis.size()) ||
      data.map1.m.rows() != static_cast<long>(cb2.basis.size()))
    throw std::invalid_argument(
        "recover_weighted_qdiff: DN shape does not match the window bases");
  const Eigen::MatrixXd diff = data.map1.m - data.map2.m;
  const double scale = 0.5 * background.grid.dim + data.s;

  std::vector<ProbeEstimate> out;
  out.reserve(centers.size());
  for (double c : centers) {
    GridFunction chi = smooth_bump(background.grid, {c, 0.0}, radius, 1.0);
    const double nrm = l2_norm(chi);
    if (nrm == 0.0)
      throw std::invalid_argument("recover_weighted_qdiff: probe misses the grid");
    GridFunction target = GridFunction::zeros(background.grid, 1);
    target.v.row(0) = chi.v.row(0) / nrm;

    const Eigen::VectorXd tvec = omega_dofs(target, background.masks.omega_idx);
    const RungeControl rc1 = control_solve(cb1, background, tvec, alpha);
    const RungeControl rc2 = control_solve(cb2, background, tvec, alpha);

    ProbeEstimate pe;
    pe.center = c;
    /* the pairing approximates the bump average of (Gamma1.Gamma2)(Q2-Q1);
     * the unit normalization makes the chi^2 mass one */
    pe.value = -scale * rc2.coeffs.dot(diff * rc1.coeffs);
    pe.misfit1 = rc1.misfit;
    pe.misfit2 = rc2.misfit;
    out.push_back(pe);
  }
  return out;
}

GridFunction weighted_qdiff(const LameField& set1, const LameField& set2, double s,
                            int pad) {
  if (!set1.grid.same_as(set2.grid))
    throw std::invalid_argument("weighted_qdiff: grid mismatch");
  const GammaField g1 = GammaField::from_lame(set1);
  const GammaField g2 = GammaField::from_lame(set2);
  const QPotential q1 = q_potential(g1, s, pad);
  const QPotential q2 = q_potential(g2, s, pad);
  const Eigen::ArrayXd dot = g1.mu * g2.mu + g1.kk * g2.kk;
  GridFunction out = q1.q;
  out.v -= q2.q.v;
  for (long r = 0; r < out.v.rows(); ++r) out.v.row(r) *= dot.transpose();
  return out;
}

GridFunction gauge_solve(const ElasticAssembly& a1, const GammaField& gamma1,
                         const QPotential& q, int pad) {
  if (a1.grid.dim != 1)
    throw std::invalid_argument("gauge_solve: one dimensional only");
  if (!gamma1.grid.same_as(a1.grid) || !q.q.grid.same_as(a1.grid))
    throw std::invalid_argument("gauge_solve: grid mismatch");
  if (q.s != a1.s)
    throw std::invalid_argument("gauge_solve: candidate potential order differs");

  const QPotential q1 = q_potential(gamma1, a1.s, pad);
  const Eigen::ArrayXd dq = (q1.q.v.row(0) - q.q.v.row(0)).transpose();

  const std::vector<long>& om = a1.masks.omega_idx;
  const long nom = static_cast<long>(om.size());
  const double scale = 0.5 + a1.s;
  const double h = a1.grid.h();

  /* data one on the whole exterior, the far part included: subtracting
   * the constant leaves the omega-column row sums on the right, so the
   * constant solves the consistent system exactly */
  Eigen::MatrixXd m(nom, nom);
  Eigen::VectorXd rhs(nom);
  for (long i = 0; i < nom; ++i) {
    double rowsum = 0.0;
    for (long j = 0; j < nom; ++j) {
      m(i, j) = scale * a1.dense(om[i], om[j]);
      rowsum += m(i, j);
    }
    m(i, i) += h * gamma1.norm2[om[i]] * dq[om[i]];
    rhs[i] = rowsum;
  }
  const Eigen::VectorXd sol = m.partialPivLu().solve(rhs);

  GridFunction r = GridFunction::zeros(a1.grid, 0);
  r.v.row(0).setOnes();
  for (long i = 0; i < nom; ++i) r.v(0, om[i]) = sol[i];
  return r;
}

LameField lame_from_m(const GridSpec& grid, const RegionMasks& masks, double nu,
                      double M0, const Eigen::ArrayXd& m_omega) {
  grid.validate();
  if (!grid.same_as(masks.grid)) throw std::invalid_argument("lame_from_m: grid mismatch");
  const int n = grid.dim;
  if (nu <= -1.0 || (n > 1 && nu >= 1.0 / (n - 1)))
    throw std::invalid_argument("lame_from_m: poisson ratio out of range");
  if (!(M0 > 0.0)) throw std::invalid_argument("lame_from_m: background must be positive");
  if (m_omega.size() != static_cast<long>(masks.omega_idx.size()))
    throw std::invalid_argument("lame_from_m: nodal values must cover omega");

  const double lfac = 2.0 * nu / (1.0 - (n - 1) * nu);
  LameField f;
  f.grid = grid;
  f.M0 = M0;
  f.L0 = lfac * M0;
  const long nn = grid.nodes();
  f.M = Eigen::ArrayXd::Constant(nn, M0);
  for (size_t k = 0; k < masks.omega_idx.size(); ++k)
    f.M[masks.omega_idx[k]] = m_omega[static_cast<long>(k)];
  f.L = lfac * f.M;
  f.K = f.L + 2.0 * f.M / n;
  f.K0 = f.L0 + 2.0 * M0 / n;
  for (long p = 0; p < nn; ++p) {
    if (!(f.M[p] >= 0.1 * M0) || !(f.K[p] >= 0.1 * f.K0)) {
      std::ostringstream os;
      os << "lame_from_m: positivity floor violated at node " << p << " (M=" << f.M[p]
         << ", K=" << f.K[p] << ")";
      throw std::invalid_argument(os.str());
    }
  }
  f.mu = (f.M / 2.0).sqrt();
  f.lam = ((2.0 * f.M + n * f.L).sqrt() - (2.0 * f.M).sqrt()) / n;
  f.kk = f.lam + 2.0 * f.mu / n;
  f.nu = f.L / ((n - 1) * f.L + 2.0 * f.M);

  IsotropicParams bg;
  bg.n = n;
  bg.L = f.L0;
  bg.M = M0;
  const SqrtParams s0 = sqrt_lame(bg);
  f.lam0 = s0.lambda;
  f.mu0 = s0.mu;
  f.k0 = s0.k;
  f.nu0 = poisson_ratio(bg);
  return f;
}

DnMap observe_dn(const ElasticAssembly& a) {
  std::vector<GridFunction> ball = exterior_basis(a.masks, 1);
  const std::vector<GridFunction> b2 = exterior_basis(a.masks, 2);
  ball.insert(ball.end(), b2.begin(), b2.end());
  return dn_map(a, ball, ball);
}

Reconstruction reconstruct_lame(const DnData& obs, const GridSpec& grid,
                                const RegionMasks& masks, double M0,
                                const ReconstructionConfig& cfg) {
  if (grid.dim != 1)
    throw std::invalid_argument("reconstruct_lame: one dimensional only");
  if (!grid.same_as(masks.grid))
    throw std::invalid_argument("reconstruct_lame: grid mismatch");
  if (!(M0 > 0.0) || cfg.nu <= -1.0 || cfg.max_iter < 0)
    throw std::invalid_argument("reconstruct_lame: bad configuration");

  const std::vector<long>& om = masks.omega_idx;
  const long np = static_cast<long>(om.size());
  const double s = obs.s;
  const double lfac = 2.0 * cfg.nu;

  auto model_dn = [&](const Eigen::ArrayXd& m) {
    const LameField lf = lame_from_m(grid, masks, cfg.nu, M0, m);
    const ElasticAssembly a = assemble_elastic(lf, masks, s);
    return observe_dn(a).m;
  };

  const Eigen::MatrixXd& target = obs.map1.m;
  const long nr = np > 2 ? np - 2 : 0;
  Eigen::MatrixXd reg = Eigen::MatrixXd::Zero(nr, np);
  for (long k = 0; k + 2 < np; ++k) {
    reg(k, k) = 1.0;
    reg(k, k + 1) = -2.0;
    reg(k, k + 2) = 1.0;
  }

  Eigen::ArrayXd m = Eigen::ArrayXd::Constant(np, M0);
  const Eigen::ArrayXd m0 = m;
  Eigen::MatrixXd dn = model_dn(m);
  if (dn.rows() != target.rows() || dn.cols() != target.cols())
    throw std::invalid_argument("reconstruct_lame: observed map shape mismatch");

  auto objective_of = [&](const Eigen::ArrayXd& mm, const Eigen::MatrixXd& dnm) {
    const Eigen::VectorXd rv = reg * (mm - m0).matrix();
    return (dnm - target).squaredNorm() + cfg.beta * rv.squaredNorm();
  };
  auto errors_of = [&](const Eigen::ArrayXd& mm, double& rm, double& rl) {
    rm = 0.0;
    rl = 0.0;
    if (!cfg.truth) return;
    double num_m = 0.0, den_m = 0.0, num_l = 0.0, den_l = 0.0;
    for (long k = 0; k < np; ++k) {
      const double tm = cfg.truth->M[om[k]];
      const double tl = cfg.truth->L[om[k]];
      num_m += (mm[k] - tm) * (mm[k] - tm);
      den_m += tm * tm;
      num_l += (lfac * mm[k] - tl) * (lfac * mm[k] - tl);
      den_l += tl * tl;
    }
    rm = std::sqrt(num_m / std::max(den_m, 1e-300));
    rl = den_l > 0.0 ? std::sqrt(num_l / den_l) : std::sqrt(num_l);
  };

  Reconstruction out;
  double obj = objective_of(m, dn);
  {
    IterateRecord r0;
    r0.iter = 0;
    r0.objective = obj;
    errors_of(m, r0.rel_m, r0.rel_l);
    out.trace.push_back(r0);
  }

  const double floor_val = cfg.floor_frac * M0;
  const double delta = cfg.fd_step * M0;

  for (int it = 1; it <= cfg.max_iter; ++it) {
    Eigen::MatrixXd jac(target.size(), np);
    for (long j = 0; j < np; ++j) {
      Eigen::ArrayXd mp = m;
      mp[j] += delta;
      const Eigen::MatrixXd dnp = model_dn(mp);
      jac.col(j) =
          Eigen::Map<const Eigen::VectorXd>((dnp - dn).eval().data(), dnp.size()) / delta;
    }
    const Eigen::VectorXd res =
        Eigen::Map<const Eigen::VectorXd>((dn - target).eval().data(), dn.size());
    Eigen::MatrixXd nrm = jac.transpose() * jac + cfg.beta * reg.transpose() * reg;
    nrm.diagonal().array() += 1e-12 * (1.0 + nrm.diagonal().maxCoeff());
    const Eigen::VectorXd grad =
        jac.transpose() * res + cfg.beta * reg.transpose() * (reg * (m - m0).matrix());
    const Eigen::VectorXd dm = nrm.ldlt().solve(-grad);

    double tstep = 1.0;
    bool accepted = false;
    bool projected = false;
    Eigen::ArrayXd mnew;
    Eigen::MatrixXd dnnew;
    double objnew = 0.0;
    for (int ls = 0; ls < 8; ++ls) {
      mnew = m + tstep * dm.array();
      bool proj = false;
      for (long k = 0; k < np; ++k)
        if (mnew[k] < floor_val) {
          mnew[k] = floor_val;
          proj = true;
        }
      dnnew = model_dn(mnew);
      objnew = objective_of(mnew, dnnew);
      if (objnew < obj) {
        accepted = true;
        projected = proj;
        break;
      }
      tstep *= 0.5;
    }
    if (!accepted) break;

    IterateRecord rec;
    rec.iter = it;
    rec.objective = objnew;
    rec.step = (mnew - m).matrix().norm();
    rec.projected = projected;
    errors_of(mnew, rec.rel_m, rec.rel_l);
    const double drop = obj - objnew;
    m = mnew;
    dn = dnnew;
    obj = objnew;
    out.trace.push_back(rec);
    if (drop <= cfg.tol * std::max(obj, 1e-300)) break;
  }

  out.m_omega = m;
  out.lame = lame_from_m(grid, masks, cfg.nu, M0, m);
  errors_of(m, out.rel_m, out.rel_l);
  return out;
}

GaugeDemo gauge_demo_1d(const GridSpec& grid, const RegionSet& regions, double s,
                        double K, const std::vector<double>& m_values,
                        double K_contrast) {
  if (grid.dim != 1) throw std::invalid_argument("gauge_demo_1d: one dimensional only");
  const RegionMasks masks = RegionMasks::build(grid, regions);
  const std::vector<GridFunction> b1 = exterior_basis(masks, 1);
  const std::vector<GridFunction> b2 = exterior_basis(masks, 2);

  auto dn_for = [&](double kmod, double mmod) {
    const LameField lf = make_lame_field(grid, masks, kmod - 2.0 * mmod, mmod, {});
    const ElasticAssembly a = assemble_elastic(lf, masks, s);
    return dn_map(a, b1, b2).m;
  };
  auto rel_dist = [](const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
    return (x - y).norm() / (0.5 * (x.norm() + y.norm()));
  };

  GaugeDemo gd;
  gd.m_values = m_values;
  const long n = static_cast<long>(m_values.size());
  std::vector<Eigen::MatrixXd> maps;
  maps.reserve(m_values.size());
  gd.contrast.resize(n);
  for (long i = 0; i < n; ++i) {
    maps.push_back(dn_for(K, m_values[static_cast<size_t>(i)]));
    gd.contrast[i] = rel_dist(maps.back(), dn_for(K_contrast, m_values[static_cast<size_t>(i)]));
  }
  if (n < 2) return gd;  /* nothing to compare pairwise */
  gd.pairwise = Eigen::MatrixXd::Zero(n, n);
  for (long i = 0; i < n; ++i)
    for (long j = 0; j < i; ++j) {
      const double d = rel_dist(maps[static_cast<size_t>(i)], maps[static_cast<size_t>(j)]);
      gd.pairwise(i, j) = d;
      gd.pairwise(j, i) = d;
    }
  return gd;
}

}  /* namespace fracelast */
