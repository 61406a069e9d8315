/*
 * Command line front end.  Every subcommand reads one scenario file,
 * writes its artifacts into --out, and finishes with a run manifest.
 *
 * Exit codes: 0 success, 1 verification failure, 2 configuration
 * error, 3 numerical failure.
 */

#include <fracelast/elastic.hpp>
#include <fracelast/inversion.hpp>
#include <fracelast/liouville.hpp>
#include <fracelast/scenario.hpp>

#include <CLI11.hpp>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <thread>

namespace {

using namespace fracelast;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitVerifyFail = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

struct Options {
  std::string scenario_path;
  std::string out = "out";
  int workers = 0;
  bool strict = false;
  std::vector<int> sweep;
  std::optional<std::uint64_t> seed;
};

struct Stopwatch {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double lap() {
    const auto t1 = std::chrono::steady_clock::now();
    const double sec = std::chrono::duration<double>(t1 - t0).count();
    t0 = t1;
    return sec;
  }
};

int worker_count(const Options& opt) {
  if (opt.workers > 0) return opt.workers;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/* run one job per index on a fixed pool; each job owns its output slot,
 * so the result is identical for every pool size */
void pool_run(int jobs, int workers, const std::function<void(int)>& job) {
  if (jobs <= 0) return;
  const int nt = std::min(workers, jobs);
  if (nt <= 1) {
    for (int i = 0; i < jobs; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<size_t>(nt));
  for (int t = 0; t < nt; ++t)
    pool.emplace_back([&, t] {
      try {
        for (int i = next.fetch_add(1); i < jobs; i = next.fetch_add(1)) job(i);
      } catch (...) {
        errors[static_cast<size_t>(t)] = std::current_exception();
      }
    });
  for (std::thread& th : pool) th.join();
  for (const std::exception_ptr& e : errors)
    if (e) std::rethrow_exception(e);
}

std::vector<int> resolutions_for(const Scenario& sc, const Options& opt) {
  if (!opt.sweep.empty()) return opt.sweep;
  return {sc.grid.n};
}

std::array<double, 2> region_center(const Region& r, int dim) {
  if (r.kind == Region::Kind::Ball) return r.center;
  std::array<double, 2> c{{0.0, 0.0}};
  for (int i = 0; i < dim; ++i)
    c[static_cast<size_t>(i)] =
        0.5 * (r.lo[static_cast<size_t>(i)] + r.hi[static_cast<size_t>(i)]);
  return c;
}

GridFunction window_data(const GridSpec& g, const RegionSet& regions,
                         const Scenario::Forward& fw) {
  const Region& win = fw.window == 1 ? regions.w1 : regions.w2;
  const std::array<double, 2> c = fw.centered ? region_center(win, g.dim) : fw.center;
  if (!win.contains_ball(c, fw.radius, g.dim))
    throw ConfigError("forward: the data bump must stay inside its window");
  GridFunction f = GridFunction::zeros(g, 1);
  f.v.row(fw.component) = smooth_bump(g, c, fw.radius, fw.amplitude).v.row(0);
  return f;
}

void append(RunManifest& man, std::vector<ManifestOutput> rows) {
  for (ManifestOutput& mo : rows) man.outputs.push_back(std::move(mo));
}

RunManifest manifest_for(const Scenario& sc, const Options& opt, const char* command) {
  RunManifest man;
  man.command = command;
  man.version = version_tag();
  man.input_hash = hex64(sc.input_hash);
  if (opt.seed) man.seed = *opt.seed;
  else if (sc.invert) man.seed = sc.invert->seed;
  return man;
}

std::string out_path(const Options& opt, const std::string& name) {
  return opt.out + "/" + name;
}

/* ----- forward: one exterior datum, one displacement field ----- */

int run_forward(const Scenario& sc, const Options& opt) {
  if (!sc.forward) throw ConfigError("forward: scenario has no 'forward' block");
  RunManifest man = manifest_for(sc, opt, "forward");
  Stopwatch sw;
  const std::vector<int> ns = resolutions_for(sc, opt);
  std::vector<std::vector<ManifestOutput>> rows(ns.size());
  std::vector<double> secs(ns.size());
  pool_run(static_cast<int>(ns.size()), worker_count(opt), [&](int i) {
    Stopwatch local;
    const RegionMasks masks = scenario_masks(sc, ns[static_cast<size_t>(i)]);
    const LameField lame = scenario_lame(sc, masks);
    const ElasticAssembly a = assemble_elastic(lame, masks, sc.s);
    const GridFunction f = window_data(masks.grid, sc.regions, *sc.forward);
    SolveReport rep;
    const GridFunction u =
        solve_dirichlet(a, f, GridFunction::zeros(masks.grid, 1), &rep);
    const std::string tag = "_N" + std::to_string(ns[static_cast<size_t>(i)]);
    std::vector<ManifestOutput> out;
    for (auto& mo : write_field(out_path(opt, "data" + tag + ".f64"), f))
      out.push_back(std::move(mo));
    for (auto& mo : write_field(out_path(opt, "solution" + tag + ".f64"), u))
      out.push_back(std::move(mo));
    rows[static_cast<size_t>(i)] = std::move(out);
    secs[static_cast<size_t>(i)] = local.lap();
  });
  for (size_t i = 0; i < ns.size(); ++i) {
    append(man, std::move(rows[i]));
    man.timings.emplace_back("solve_N" + std::to_string(ns[i]), secs[i]);
  }
  man.timings.emplace_back("total", sw.lap());
  man.save(out_path(opt, "manifest.json"));
  return kExitOk;
}

/* ----- dnmap: the exterior measurement matrix ----- */

int run_dnmap(const Scenario& sc, const Options& opt) {
  RunManifest man = manifest_for(sc, opt, "dnmap");
  Stopwatch sw;
  const std::vector<int> ns = resolutions_for(sc, opt);
  std::vector<std::vector<ManifestOutput>> rows(ns.size());
  std::vector<double> secs(ns.size());
  pool_run(static_cast<int>(ns.size()), worker_count(opt), [&](int i) {
    Stopwatch local;
    const RegionMasks masks = scenario_masks(sc, ns[static_cast<size_t>(i)]);
    const LameField lame = scenario_lame(sc, masks);
    const ElasticAssembly a = assemble_elastic(lame, masks, sc.s);
    const DnMap dn = dn_map(a, exterior_basis(masks, 1), exterior_basis(masks, 2));
    const std::string tag = "_N" + std::to_string(ns[static_cast<size_t>(i)]);
    rows[static_cast<size_t>(i)] =
        write_matrix(out_path(opt, "dn" + tag + ".f64"), dn.m, {{"scale", dn.scale}});
    secs[static_cast<size_t>(i)] = local.lap();
  });
  for (size_t i = 0; i < ns.size(); ++i) {
    append(man, std::move(rows[i]));
    man.timings.emplace_back("dn_N" + std::to_string(ns[i]), secs[i]);
  }
  man.timings.emplace_back("total", sw.lap());
  man.save(out_path(opt, "manifest.json"));
  return kExitOk;
}

/* ----- reduce: residual and fitted constant across resolutions ----- */

int run_reduce(const Scenario& sc, const Options& opt) {
  if (!sc.reduce) throw ConfigError("reduce: scenario has no 'reduce' block");
  RunManifest man = manifest_for(sc, opt, "reduce");
  Stopwatch sw;
  const std::vector<int> ns = opt.sweep.empty() ? sc.reduce->resolutions : opt.sweep;
  std::vector<std::vector<double>> table(ns.size());
  pool_run(static_cast<int>(ns.size()), worker_count(opt), [&](int i) {
    const RegionMasks masks = scenario_masks(sc, ns[static_cast<size_t>(i)]);
    const LameField lame = scenario_lame(sc, masks);
    const ElasticAssembly a = assemble_elastic(lame, masks, sc.s);
    GridFunction u = GridFunction::zeros(masks.grid, 1);
    u.v.row(0) = smooth_bump(masks.grid, sc.reduce->center, sc.reduce->radius,
                             sc.reduce->amplitude)
                     .v.row(0);
    const ReductionCheck rc = reduction_residual(a, u, sc.pad);
    table[static_cast<size_t>(i)] = {static_cast<double>(ns[static_cast<size_t>(i)]),
                                     sc.s, rc.residual, rc.cstar};
  });
  append(man, write_csv(out_path(opt, "reduction.csv"), {"n", "s", "residual", "cstar"},
                        table));
  man.constants["cstar"] = table.back()[3];
  man.tolerances["reduction_residual"] = table.back()[2];
  man.timings.emplace_back("total", sw.lap());
  man.save(out_path(opt, "manifest.json"));
  return kExitOk;
}

/* ----- runge: misfit against the penalty weight ----- */

int run_runge(const Scenario& sc, const Options& opt) {
  if (!sc.runge) throw ConfigError("runge: scenario has no 'runge' block");
  RunManifest man = manifest_for(sc, opt, "runge");
  Stopwatch sw;
  const std::vector<int> ns = resolutions_for(sc, opt);
  for (int n : ns) {
    Stopwatch local;
    const RegionMasks masks = scenario_masks(sc, n);
    const LameField lame = scenario_lame(sc, masks);
    const ElasticAssembly a = assemble_elastic(lame, masks, sc.s);
    GridFunction target = GridFunction::zeros(masks.grid, 1);
    target.v.row(sc.runge->component) =
        smooth_bump(masks.grid, sc.runge->center, sc.runge->radius, sc.runge->amplitude)
            .v.row(0);
    const auto sweep = runge_sweep(a, target, sc.runge->window, sc.runge->alphas);
    std::vector<std::vector<double>> table;
    for (const auto& row : sweep) table.push_back({row[0], row[1]});
    const std::string tag = "_N" + std::to_string(n);
    append(man, write_csv(out_path(opt, "runge" + tag + ".csv"), {"alpha", "misfit"},
                          table));
    RungeProblem pb;
    pb.target = target;
    pb.window = sc.runge->window;
    pb.alpha = sc.runge->alphas.back();
    const RungeControl rc = runge_control(a, pb);
    append(man, write_field(out_path(opt, "control" + tag + ".f64"), rc.f));
    man.tolerances["misfit_N" + std::to_string(n)] = rc.misfit;
    man.constants["target_norm_N" + std::to_string(n)] = l2_norm(target);
    man.timings.emplace_back("sweep" + tag, local.lap());
  }
  man.timings.emplace_back("total", sw.lap());
  man.save(out_path(opt, "manifest.json"));
  return kExitOk;
}

/* ----- invert: closed loop from self-generated exterior data ----- */

int run_invert(const Scenario& sc, const Options& opt) {
  if (!sc.invert) throw ConfigError("invert: scenario has no 'invert' block");
  if (sc.grid.dim != 1) throw ConfigError("invert: one dimensional scenarios only");
  RunManifest man = manifest_for(sc, opt, "invert");
  Stopwatch sw;
  const Scenario::Invert& iv = *sc.invert;
  for (int n : resolutions_for(sc, opt)) {
    Stopwatch local;
    const RegionMasks masks = scenario_masks(sc, n);
    const GridSpec& g = masks.grid;
    const long np = static_cast<long>(masks.omega_idx.size());
    Eigen::ArrayXd mtrue(np);
    const GridFunction bump = smooth_bump(g, iv.center, iv.radius, iv.amplitude);
    for (long k = 0; k < np; ++k)
      mtrue[k] = sc.M0 + bump.v(0, masks.omega_idx[static_cast<size_t>(k)]);
    const LameField truth = lame_from_m(g, masks, iv.nu, sc.M0, mtrue);

    DnData data;
    data.map1 = observe_dn(assemble_elastic(truth, masks, sc.s));
    data.s = sc.s;
    data.noise = iv.noise;
    if (iv.noise > 0.0) add_dn_noise(data.map1, iv.noise, opt.seed.value_or(iv.seed));

    ReconstructionConfig cfg;
    cfg.nu = iv.nu;
    cfg.beta = iv.beta;
    cfg.max_iter = iv.max_iter;
    cfg.truth = &truth;
    const Reconstruction rec = reconstruct_lame(data, g, masks, sc.M0, cfg);

    std::vector<std::vector<double>> table;
    for (const IterateRecord& r : rec.trace)
      table.push_back({static_cast<double>(r.iter), r.objective, r.rel_m, r.rel_l, r.step});
    const std::string tag = "_N" + std::to_string(n);
    append(man, write_csv(out_path(opt, "iterates" + tag + ".csv"),
                          {"iter", "objective", "rel_m", "rel_l", "step"}, table));

    GridFunction mrec = GridFunction::zeros(g, 0);
    mrec.v.row(0) = rec.lame.M.transpose();
    GridFunction lrec = GridFunction::zeros(g, 0);
    lrec.v.row(0) = rec.lame.L.transpose();
    GridFunction mtru = GridFunction::zeros(g, 0);
    mtru.v.row(0) = truth.M.transpose();
    append(man, write_field(out_path(opt, "m_recovered" + tag + ".f64"), mrec));
    append(man, write_field(out_path(opt, "l_recovered" + tag + ".f64"), lrec));
    append(man, write_field(out_path(opt, "m_true" + tag + ".f64"), mtru));
    man.tolerances["rel_m" + tag] = rec.rel_m;
    man.tolerances["rel_l" + tag] = rec.rel_l;
    man.timings.emplace_back("invert" + tag, local.lap());
  }
  man.timings.emplace_back("total", sw.lap());
  man.save(out_path(opt, "manifest.json"));
  return kExitOk;
}

/* ----- gauge1d: the exterior maps cannot see inside one class ----- */

int run_gauge1d(const Scenario& sc, const Options& opt) {
  if (!sc.gauge1d) throw ConfigError("gauge1d: scenario has no 'gauge1d' block");
  if (sc.grid.dim != 1) throw ConfigError("gauge1d: one dimensional scenarios only");
  RunManifest man = manifest_for(sc, opt, "gauge1d");
  Stopwatch sw;
  const Scenario::Gauge1d& gd = *sc.gauge1d;
  const GaugeDemo demo =
      gauge_demo_1d(sc.grid, sc.regions, sc.s, gd.k, gd.m_values, gd.k_contrast);

  std::vector<std::string> cols{"m"};
  for (double m : demo.m_values) cols.push_back("d_m" + std::to_string(m));
  std::vector<std::vector<double>> table;
  const long nm = static_cast<long>(demo.m_values.size());
  for (long i = 0; i < nm; ++i) {
    std::vector<double> row{demo.m_values[static_cast<size_t>(i)]};
    for (long j = 0; j < nm; ++j)
      row.push_back(nm >= 2 ? demo.pairwise(i, j) : 0.0);
    table.push_back(std::move(row));
  }
  append(man, write_csv(out_path(opt, "pairwise.csv"), cols, table));

  std::vector<std::vector<double>> ct;
  for (long i = 0; i < nm; ++i)
    ct.push_back({demo.m_values[static_cast<size_t>(i)], demo.contrast[i]});
  append(man, write_csv(out_path(opt, "contrast.csv"), {"m", "distance"}, ct));
  if (nm >= 2) man.tolerances["pairwise_max"] = demo.pairwise.cwiseAbs().maxCoeff();
  man.tolerances["contrast_min"] = demo.contrast.minCoeff();
  man.timings.emplace_back("total", sw.lap());
  man.save(out_path(opt, "manifest.json"));
  return kExitOk;
}

/* ----- verify: the invariant suite with pass/fail reporting ----- */

struct CheckResult {
  std::string name;
  bool pass = false;
  double measured = 0.0;
  double tolerance = 0.0;
  std::string note;
};

CheckResult check_tensor(const Scenario& sc) {
  CheckResult cr{"tensor", false, 0.0, 1e-12, "contraction against the compliance"};
  const int n = sc.grid.dim;
  double worst = 0.0;
  for (double lpar : {sc.L0, 0.4}) {
    IsotropicParams p;
    p.n = n;
    p.L = lpar;
    p.M = sc.M0;
    const DenseTensor<double> c = isotropic_stiffness(p);
    const DenseTensor<double> inv = compliance(p);
    const DenseTensor<double> prod = contract(c, inv, 2);
    /* the product acts as the symmetrizer on matrices */
    DenseTensor<double> e(std::vector<int>{n, n});
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) e({i, j}) = 0.3 * (i + 1) + 0.7 * (j + 1) + (i == j);
    const DenseTensor<double> se = contract(prod, e, 2);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        worst = std::max(worst, std::abs(se({i, j}) - 0.5 * (e({i, j}) + e({j, i}))));
  }
  cr.measured = worst;
  cr.pass = worst <= cr.tolerance;
  return cr;
}

CheckResult check_sqrt(const Scenario& sc, const LameField& lame, bool corrupt) {
  CheckResult cr{"sqrt", false, 0.0, 1e-12, "square of the root against the stiffness"};
  const int n = sc.grid.dim;
  double worst = 0.0;
  const long stride = std::max<long>(1, lame.L.size() / 257);
  for (long p = 0; p < lame.L.size(); p += stride) {
    SqrtParams sp;
    sp.lambda = corrupt ? -lame.lam[p] : lame.lam[p];
    sp.mu = lame.mu[p];
    sp.k = sp.lambda + 2.0 * sp.mu / n;
    const DenseTensor<double> sq = two_point_tensor(sp, sp, n);
    const DenseTensor<double> full = isotropic_rank4<double>(n, lame.L[p], lame.M[p]);
    for (long i = 0; i < sq.size(); ++i)
      worst = std::max(worst, std::abs(sq.data[i] - full.data[i]));
    worst = std::max(worst, std::abs(sp.k - std::sqrt(lame.K[p] / n)));
  }
  cr.measured = worst;
  cr.pass = worst <= cr.tolerance;
  return cr;
}

GridFunction verify_probe(const GridSpec& g, bool pair) {
  GridFunction u = GridFunction::zeros(g, 1, pair);
  u.comp(0, 0) = smooth_bump(g, {{-0.2, 0.1}}, 0.6, 1.0).v.row(0);
  if (g.dim == 2) u.comp(0, 1) = smooth_bump(g, {{0.2, -0.1}}, 0.5, -0.8).v.row(0);
  if (pair) {
    u.comp(1, 0) = smooth_bump(g, {{0.3, -0.2}}, 0.5, 0.7).v.row(0);
    if (g.dim == 2) u.comp(1, 1) = smooth_bump(g, {{-0.1, 0.3}}, 0.6, -0.5).v.row(0);
  }
  return u;
}

CheckResult check_semigroup(const Scenario& sc) {
  CheckResult cr{"semigroup", false, 0.0, 1e-10, "half orders compose to the full order"};
  const FourierPlan plan(sc.grid, sc.pad);
  const SpectralField u = plan.analyze(verify_probe(sc.grid, false));
  const SpectralField two = frac_laplacian(plan, frac_laplacian(plan, u, sc.s / 2.0),
                                           sc.s / 2.0);
  const SpectralField one = frac_laplacian(plan, u, sc.s);
  cr.measured = (two.S - one.S).cwiseAbs().maxCoeff() / one.S.cwiseAbs().maxCoeff();
  cr.pass = cr.measured <= cr.tolerance;
  return cr;
}

CheckResult check_operator_pair(const Scenario& sc) {
  CheckResult cr{"operator-pair", false, 0.0, 1e-10,
                 "second order operator against the laplacian of the primed field"};
  const FourierPlan plan(sc.grid, sc.pad);
  const SpectralField u = plan.analyze(verify_probe(sc.grid, true));
  const SpectralField left = d_op(plan, u, sc.s);
  const SpectralField right = frac_laplacian(plan, prime_op(plan, u, sc.s), 1.0);
  cr.measured = (left.S - right.S).cwiseAbs().maxCoeff() / left.S.cwiseAbs().maxCoeff();
  cr.pass = cr.measured <= cr.tolerance;
  return cr;
}

CheckResult check_reduction(const Scenario& sc, const ElasticAssembly& a, double* cstar) {
  CheckResult cr{"reduction", false, 0.0, 1e-2, "weak residual of the reduced operator"};
  GridFunction u = GridFunction::zeros(a.grid, 1);
  u.v.row(0) = smooth_bump(a.grid, {{-0.2, 0.0}}, 0.9, 1.0).v.row(0);
  if (a.grid.dim == 2) u.v.row(1) = smooth_bump(a.grid, {{0.1, -0.2}}, 0.7, -0.6).v.row(0);
  const ReductionCheck rc = reduction_residual(a, u, sc.pad);
  *cstar = rc.cstar;
  const double nearest =
      std::abs(rc.cstar - 0.5) < std::abs(rc.cstar - 1.0)
          ? (std::abs(rc.cstar - 0.5) < std::abs(rc.cstar - 2.0) ? 0.5 : 2.0)
          : (std::abs(rc.cstar - 1.0) < std::abs(rc.cstar - 2.0) ? 1.0 : 2.0);
  cr.measured = rc.residual;
  cr.pass = rc.residual <= cr.tolerance && std::abs(rc.cstar - nearest) <= 1e-3;
  cr.note = "fitted constant " + std::to_string(rc.cstar);
  return cr;
}

CheckResult check_dn_symmetry(const ElasticAssembly& a) {
  CheckResult cr{"dn-symmetry", false, 0.0, 1e-8, "exterior map against its transpose"};
  const DnMap dn = observe_dn(a);
  cr.measured = (dn.m - dn.m.transpose()).norm() / dn.m.norm();
  cr.pass = cr.measured <= cr.tolerance;
  return cr;
}

CheckResult check_dn_relation(const Scenario& sc, const ElasticAssembly& a,
                              const LameField& lame, double* cfit) {
  CheckResult cr{"dn-relation", false, 0.0, 1e-6,
                 "scaled elastic map against the reduced one"};
  const GammaField gamma = GammaField::from_lame(lame);
  const QPotential qp = q_potential(gamma, sc.s, sc.pad);
  const std::vector<GridFunction> b1 = exterior_basis(a.masks, 1);
  const std::vector<GridFunction> b2 = exterior_basis(a.masks, 2);
  const DnMap de = dn_map(a, b1, b2);
  const DnMap dq = dn_map_q(a, gamma, qp, b1, b2, QDnMode::reduced);
  /* one scalar fitted between the matrices, then entrywise agreement */
  const Eigen::MatrixXd scaled = (0.5 * sc.grid.dim + sc.s) * de.m;
  *cfit = scaled.cwiseProduct(dq.m).sum() / scaled.cwiseProduct(scaled).sum();
  cr.measured = (dq.m - *cfit * scaled).cwiseAbs().maxCoeff() /
                dq.m.cwiseAbs().maxCoeff();
  cr.pass = cr.measured <= cr.tolerance && std::abs(*cfit - 1.0) <= 1e-3;
  cr.note = "fitted constant " + std::to_string(*cfit);
  return cr;
}

CheckResult check_alessandrini(const Scenario& sc, const RegionMasks& masks) {
  CheckResult cr{"alessandrini", false, 0.0, 1e-2, "two path difference identity"};
  const GridSpec& g = masks.grid;
  const long np = static_cast<long>(masks.omega_idx.size());
  const LameField base = scenario_lame(sc, masks);
  auto m_bump = [&](std::array<double, 2> c, double r, double amp) {
    Eigen::ArrayXd m(np);
    const GridFunction b = smooth_bump(g, c, r, amp);
    for (long k = 0; k < np; ++k)
      m[k] = sc.M0 + b.v(0, masks.omega_idx[static_cast<size_t>(k)]);
    return lame_from_m(g, masks, base.nu0, sc.M0, m);
  };
  const LameField s1 = m_bump({{0.1, 0.0}}, 0.5, 0.4 * sc.M0);
  const LameField s2 = m_bump({{-0.2, 0.0}}, 0.45, -0.25 * sc.M0);
  auto source = [&](const Region& win) {
    const std::array<double, 2> c = region_center(win, g.dim);
    GridFunction f = GridFunction::zeros(g, 1);
    const double r = win.kind == Region::Kind::Ball
                         ? 0.5 * win.radius
                         : 0.2 * (win.hi[0] - win.lo[0]);
    f.v.row(0) = smooth_bump(g, c, r, 1.0).v.row(0);
    return f;
  };
  const AlessandriniCheck ac = alessandrini_check(s1, s2, masks, source(sc.regions.w1),
                                                  source(sc.regions.w2), sc.s, sc.pad);
  cr.measured = ac.residual;
  cr.pass = ac.residual <= cr.tolerance;
  return cr;
}

int run_verify(const Scenario& sc, const Options& opt) {
  const Scenario::Verify vf = sc.verify.value_or(Scenario::Verify{});
  static const std::vector<std::string> known{"tensor",       "sqrt",
                                             "semigroup",    "operator-pair",
                                             "reduction",    "dn-symmetry",
                                             "dn-relation",  "alessandrini"};
  std::vector<std::string> wanted = vf.all ? known : vf.checks;
  for (const std::string& name : wanted) {
    bool ok = false;
    for (const std::string& k : known) ok = ok || k == name;
    if (!ok) throw ConfigError("verify: unknown check '" + name + "'");
  }
  auto wants = [&](const char* name) {
    for (const std::string& w : wanted)
      if (w == name) return true;
    return false;
  };

  RunManifest man = manifest_for(sc, opt, "verify");
  Stopwatch total;
  std::vector<CheckResult> results;
  const RegionMasks masks = scenario_masks(sc);
  const LameField lame = scenario_lame(sc, masks);
  double cstar = 1.0;

  /* the assembly is shared by the three exterior-map checks */
  std::optional<ElasticAssembly> assembly;
  auto need_assembly = [&]() -> const ElasticAssembly& {
    if (!assembly) assembly = assemble_elastic(lame, masks, sc.s);
    return *assembly;
  };

  Stopwatch sw;
  auto push = [&](CheckResult cr) {
    man.timings.emplace_back(cr.name, sw.lap());
    man.tolerances[cr.name] = cr.measured;
    results.push_back(std::move(cr));
  };
  if (wants("tensor")) push(check_tensor(sc));
  if (wants("sqrt")) push(check_sqrt(sc, lame, vf.corrupt_lambda));
  if (wants("semigroup")) push(check_semigroup(sc));
  if (wants("operator-pair")) push(check_operator_pair(sc));
  if (wants("reduction")) push(check_reduction(sc, need_assembly(), &cstar));
  if (wants("dn-symmetry")) push(check_dn_symmetry(need_assembly()));
  double cfit = 1.0;
  if (wants("dn-relation")) push(check_dn_relation(sc, need_assembly(), lame, &cfit));
  if (wants("alessandrini")) push(check_alessandrini(sc, masks));
  man.constants["cstar"] = cstar;
  man.constants["cstar_relation"] = cfit;

  bool all_pass = true;
  std::printf("%-14s %-6s %12s %12s  %s\n", "check", "state", "measured", "tolerance",
              "note");
  json report;
  report["scenario"] = sc.source_path;
  report["checks"] = json::array();
  for (const CheckResult& cr : results) {
    all_pass = all_pass && cr.pass;
    std::printf("%-14s %-6s %12.3e %12.3e  %s\n", cr.name.c_str(),
                cr.pass ? "pass" : "FAIL", cr.measured, cr.tolerance, cr.note.c_str());
    report["checks"].push_back({{"name", cr.name},
                                {"pass", cr.pass},
                                {"measured", cr.measured},
                                {"tolerance", cr.tolerance},
                                {"note", cr.note}});
  }
  report["allPass"] = all_pass;
  report["cstar"] = cstar;
  if (results.empty()) std::printf("no checks requested\n");

  const std::string text = report.dump(2) + "\n";
  const std::string path = out_path(opt, "verify_report.json");
  {
    /* reuse the csv writer's atomic behavior through a tiny detour is not
     * worth it; write the report with the same rename pattern */
    namespace fs = std::filesystem;
    fs::create_directories(fs::path(path).parent_path());
    const std::string tmp = path + ".tmp~";
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    os.flush();
    os.close();
    fs::rename(tmp, path);
  }
  ManifestOutput mo;
  mo.file = path;
  mo.bytes = text.size();
  mo.hash = hex64(fnv1a64(text.data(), text.size()));
  man.outputs.push_back(mo);
  man.timings.emplace_back("total", total.lap());
  man.save(out_path(opt, "manifest.json"));
  return all_pass ? kExitOk : kExitVerifyFail;
}

}  /* namespace */

int main(int argc, char** argv) {
  CLI::App app{"fractional elasticity pipeline"};
  app.require_subcommand(1);

  Options opt;
  std::uint64_t seed_arg = 0;
  bool seed_given = false;
  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--scenario", opt.scenario_path, "scenario JSON file")
        ->required();
    cmd->add_option("--out", opt.out, "output directory");
    cmd->add_option("--workers", opt.workers, "worker pool size (0: machine parallelism)");
    cmd->add_flag("--strict", opt.strict, "reject unknown scenario keys");
    cmd->add_option("--resolution-sweep", opt.sweep, "repeat across these grid sizes")
        ->delimiter(',');
    cmd->add_option("--seed", seed_arg, "override the scenario noise seed")
        ->each([&](const std::string&) { seed_given = true; });
  };

  CLI::App* verify = app.add_subcommand("verify", "run the invariant checks");
  CLI::App* forward = app.add_subcommand("forward", "solve one exterior value problem");
  CLI::App* dnmap = app.add_subcommand("dnmap", "assemble the exterior measurement map");
  CLI::App* reduce = app.add_subcommand("reduce", "reduction residual table");
  CLI::App* runge = app.add_subcommand("runge", "approximate control study");
  CLI::App* invert = app.add_subcommand("invert", "closed loop reconstruction");
  CLI::App* gauge1d = app.add_subcommand("gauge1d", "matched bulk modulus demonstration");
  for (CLI::App* cmd : {verify, forward, dnmap, reduce, runge, invert, gauge1d})
    add_common(cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  if (seed_given) opt.seed = seed_arg;
  for (int n : opt.sweep)
    if (n <= 0) {
      std::fprintf(stderr, "error: resolution sweep entries must be positive\n");
      return kExitConfig;
    }

  try {
    const Scenario sc = load_scenario(opt.scenario_path, opt.strict);
    if (app.got_subcommand(verify)) return run_verify(sc, opt);
    if (app.got_subcommand(forward)) return run_forward(sc, opt);
    if (app.got_subcommand(dnmap)) return run_dnmap(sc, opt);
    if (app.got_subcommand(reduce)) return run_reduce(sc, opt);
    if (app.got_subcommand(runge)) return run_runge(sc, opt);
    if (app.got_subcommand(invert)) return run_invert(sc, opt);
    if (app.got_subcommand(gauge1d)) return run_gauge1d(sc, opt);
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return kExitConfig;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "numerical failure: %s\n", e.what());
    return kExitNumerical;
  }
}
