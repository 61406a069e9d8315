#include <fracelast/liouville.hpp>

#include <cmath>
#include <stdexcept>
#include <string>

namespace fracelast {

namespace {

void require_vector(const GridFunction& u, const GridSpec& g, bool pair,
                    const char* where) {
  if (!u.grid.same_as(g))
    throw std::invalid_argument(std::string(where) + ": grid mismatch");
  if (u.rank != 1 || u.pair != pair)
    throw std::invalid_argument(std::string(where) + (pair
                                    ? ": pair of vector fields required"
                                    : ": plain vector field required"));
}

}  // namespace

GammaField GammaField::from_lame(const LameField& lame) {
  GammaField gamma;
  gamma.grid = lame.grid;
  gamma.mu = lame.mu;
  gamma.kk = lame.kk;
  gamma.mu0 = lame.mu0;
  gamma.k0 = lame.k0;
  gamma.norm2 = lame.mu.square() + lame.kk.square();
  if (!(gamma.norm2.minCoeff() > 0.0))
    throw std::invalid_argument("GammaField: coefficient pair degenerates to zero");
  return gamma;
}

QPotential q_potential(const GammaField& gamma, double s, int pad) {
  const GridSpec& g = gamma.grid;
  const int d = g.dim;
  FracParams fp{d, s};
  fp.validate();
  FourierPlan plan(g, pad);

  GridFunction mut = GridFunction::zeros(g, 0);
  GridFunction kkt = GridFunction::zeros(g, 0);
  mut.v.row(0) = (gamma.mu - gamma.mu0).transpose();
  kkt.v.row(0) = (gamma.kk - gamma.k0).transpose();

  const GridFunction fl_mu = frac_laplacian(plan, mut, s);
  const GridFunction fl_kk = frac_laplacian(plan, kkt, s);
  const GridFunction rh_mu = riesz_hessian(plan, mut, s);
  const GridFunction rh_kk = riesz_hessian(plan, kkt, s);

  QPotential qp;
  qp.s = s;
  qp.q = GridFunction::zeros(g, 2);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) {
      Eigen::ArrayXd e = gamma.mu * fp.d2() * rh_mu.v.row(i * d + j).transpose().array() +
                         gamma.kk * fp.d4() * rh_kk.v.row(i * d + j).transpose().array();
      if (i == j)
        e += gamma.mu * fp.d1() * fl_mu.v.row(0).transpose().array() +
             gamma.kk * fp.d3() * fl_kk.v.row(0).transpose().array();
      qp.q.v.row(i * d + j) = (e / gamma.norm2).transpose();
    }
  return qp;
}

GridFunction forward_transform(const GammaField& gamma, const GridFunction& u) {
  require_vector(u, gamma.grid, false, "forward_transform");
  const int d = gamma.grid.dim;
  GridFunction w = GridFunction::zeros(gamma.grid, 1, true);
  for (int c = 0; c < d; ++c) {
    w.v.row(c) = (gamma.mu * u.v.row(c).transpose().array()).transpose();
    w.v.row(d + c) = (gamma.kk * u.v.row(c).transpose().array()).transpose();
  }
  return w;
}

GridFunction back_transform(const GammaField& gamma, const GridFunction& w) {
  require_vector(w, gamma.grid, true, "back_transform");
  const int d = gamma.grid.dim;
  GridFunction u = GridFunction::zeros(gamma.grid, 1);
  for (int c = 0; c < d; ++c)
    u.v.row(c) = ((gamma.mu * w.v.row(c).transpose().array() +
                   gamma.kk * w.v.row(d + c).transpose().array()) /
                  gamma.norm2)
                     .transpose();
  return u;
}

GridFunction pair_contract(const GammaField& gamma, const GridFunction& w) {
  require_vector(w, gamma.grid, true, "pair_contract");
  const int d = gamma.grid.dim;
  GridFunction u = GridFunction::zeros(gamma.grid, 1);
  for (int c = 0; c < d; ++c)
    u.v.row(c) = (gamma.mu * w.v.row(c).transpose().array() +
                  gamma.kk * w.v.row(d + c).transpose().array())
                     .transpose();
  return u;
}

GridFunction gauge_ratio(const GammaField& a, const GammaField& b) {
  if (!a.grid.same_as(b.grid))
    throw std::invalid_argument("gauge_ratio: grid mismatch");
  GridFunction r = GridFunction::zeros(a.grid, 0);
  r.v.row(0) = ((a.mu * b.mu + a.kk * b.kk) / b.norm2).transpose();
  return r;
}

GridFunction apply_q(const QPotential& q, const GridFunction& w) {
  const GridSpec& g = q.q.grid;
  if (!w.grid.same_as(g))
    throw std::invalid_argument("apply_q: grid mismatch");
  if (q.q.rank != 2 || w.rank != 1)
    throw std::invalid_argument("apply_q: matrix potential and vector field required");
  const int d = g.dim;
  const int rows = w.pair ? 2 : 1;
  GridFunction out = GridFunction::zeros(g, 1, w.pair);
  for (int p = 0; p < rows; ++p)
    for (int i = 0; i < d; ++i) {
      Eigen::ArrayXd e = Eigen::ArrayXd::Zero(g.nodes());
      for (int j = 0; j < d; ++j)
        e += q.q.v.row(i * d + j).transpose().array() *
             w.v.row(p * d + j).transpose().array();
      out.v.row(p * d + i) = e.transpose();
    }
  return out;
}

double bq_form(const FourierPlan& plan, const QPotential& q, const GridFunction& w1,
               const GridFunction& w2, double s) {
  require_vector(w1, plan.grid(), true, "bq_form");
  require_vector(w2, plan.grid(), true, "bq_form");
  const GridFunction kin = riesz_d_op(plan, w1, s);
  const GridFunction pot = apply_q(q, w1);
  return l2_inner(kin, w2) - l2_inner(pot, w2);
}

double bq_star(const FourierPlan& plan, const QPotential& q, const GridFunction& w1,
               const GridFunction& w2, double s) {
  return bq_form(plan, q, w2, w1, s);
}

GridFunction solve_transformed(const ElasticAssembly& a, const GammaField& gamma,
                               const GridFunction& f, const GridFunction& g_src,
                               SolveReport* report) {
  if (!gamma.grid.same_as(a.grid))
    throw std::invalid_argument("solve_transformed: grid mismatch");
  require_vector(g_src, gamma.grid, true, "solve_transformed");
  GridFunction force = pair_contract(gamma, g_src);
  force.v /= 0.5 * a.grid.dim + a.s;
  const GridFunction v = solve_dirichlet(a, f, force, report);
  return forward_transform(gamma, v);
}

ReductionCheck reduction_residual(const ElasticAssembly& a, const GridFunction& u,
                                  int pad) {
  const GridSpec& g = a.grid;
  require_vector(u, g, false, "reduction_residual");
  FourierPlan plan(g, pad);
  const GammaField gamma = GammaField::from_lame(a.lame);
  const QPotential qp = q_potential(gamma, a.s, pad);

  const GridFunction w = forward_transform(gamma, u);
  GridFunction lhs_pair = riesz_d_op(plan, w, a.s);
  lhs_pair.v -= apply_q(qp, w).v;
  GridFunction lhs = pair_contract(gamma, lhs_pair);
  lhs.v /= 0.5 * g.dim + a.s;

  std::vector<GridFunction> battery;
  auto push = [&](double cx, double cy, double rad, int comp) {
    GridFunction b = GridFunction::zeros(g, 1);
    b.v.row(comp) = smooth_bump(g, {{cx, cy}}, rad, 1.0).v.row(0);
    battery.push_back(b);
  };
  if (g.dim == 1) {
    for (double c : {-0.45, -0.15, 0.15, 0.45}) push(c, 0.0, 0.5, 0);
    push(0.0, 0.0, 0.85, 0);
  } else {
    int comp = 0;
    for (double cx : {-0.3, 0.3})
      for (double cy : {-0.3, 0.3}) push(cx, cy, 0.6, (comp++) % 2);
    push(0.0, 0.0, 0.8, 0);
  }

  const double hu = h_norm(plan, u, a.s);
  double sab = 0.0, sbb = 0.0;
  std::vector<std::pair<double, double>> pairs;
  std::vector<double> hphi;
  for (const GridFunction& phi : battery) {
    const double av = l2_inner(lhs, phi);
    const double bv = a.form(u, phi);
    pairs.emplace_back(av, bv);
    hphi.push_back(h_norm(plan, phi, a.s));
    sab += av * bv;
    sbb += bv * bv;
  }

  ReductionCheck rc;
  rc.cstar = (sbb > 0.0) ? sab / sbb : 1.0;
  for (size_t k = 0; k < pairs.size(); ++k) {
    const double den = hu * hphi[k];
    if (den <= 0.0) continue;
    const double r = std::abs(pairs[k].first - rc.cstar * pairs[k].second) / den;
    rc.residual = std::max(rc.residual, r);
  }
  return rc;
}

DnMap dn_map_q(const ElasticAssembly& a, const GammaField& gamma, const QPotential& q,
               const std::vector<GridFunction>& basis1,
               const std::vector<GridFunction>& basis2, QDnMode mode,
               std::vector<SolveReport>* reports, int pad) {
  if (!gamma.grid.same_as(a.grid))
    throw std::invalid_argument("dn_map_q: grid mismatch");
  const double scale = 0.5 * a.grid.dim + a.s;

  if (mode == QDnMode::reduced) {
    DnMap dn = dn_map(a, basis1, basis2, reports);
    dn.m *= scale;
    dn.scale = "BQ";
    return dn;
  }

  FourierPlan plan(a.grid, pad);
  const GridFunction zero_f = GridFunction::zeros(a.grid, 1);
  std::vector<GridFunction> tests;
  tests.reserve(basis2.size());
  for (const GridFunction& b : basis2) tests.push_back(forward_transform(gamma, b));

  DnMap dn;
  dn.scale = "BQ";
  dn.m.resize(static_cast<long>(basis2.size()), static_cast<long>(basis1.size()));
  for (size_t i = 0; i < basis1.size(); ++i) {
    SolveReport rep;
    const GridFunction u = solve_dirichlet(a, basis1[i], zero_f, &rep);
    if (reports) reports->push_back(rep);
    const GridFunction w = forward_transform(gamma, u);
    GridFunction op = riesz_d_op(plan, w, a.s);
    op.v -= apply_q(q, w).v;
    for (size_t j = 0; j < basis2.size(); ++j)
      dn.m(static_cast<long>(j), static_cast<long>(i)) = l2_inner(op, tests[j]);
  }
  return dn;
}

}  // namespace fracelast
