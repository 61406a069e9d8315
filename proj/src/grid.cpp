#include <fracelast/grid.hpp>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace fracelast {

void GridSpec::validate() const {
  if (dim != 1 && dim != 2) throw std::invalid_argument("GridSpec: dim must be 1 or 2");
  if (n < 16 || n % 2 != 0) throw std::invalid_argument("GridSpec: N must be even and >= 16");
  if (half_width <= 0.0) throw std::invalid_argument("GridSpec: half width must be positive");
}

bool Region::contains(double x, double y, int dim) const {
  if (kind == Kind::Box) {
    if (x < lo[0] || x > hi[0]) return false;
    if (dim == 2 && (y < lo[1] || y > hi[1])) return false;
    return true;
  }
  double dx = x - center[0];
  double dy = dim == 2 ? y - center[1] : 0.0;
  return dx * dx + dy * dy < radius * radius;
}

bool Region::contains_ball(const std::array<double, 2>& c, double rad, int dim) const {
  if (kind == Kind::Box) {
    if (c[0] - rad < lo[0] || c[0] + rad > hi[0]) return false;
    if (dim == 2 && (c[1] - rad < lo[1] || c[1] + rad > hi[1])) return false;
    return true;
  }
  double dx = c[0] - center[0];
  double dy = dim == 2 ? c[1] - center[1] : 0.0;
  return std::sqrt(dx * dx + dy * dy) + rad <= radius;
}

RegionSet RegionSet::defaults(int dim) {
  RegionSet r;
  if (dim == 1) {
    r.omega = Region::box1(-1.0, 1.0);
    r.w1 = Region::box1(-3.0, -2.0);
    r.w2 = Region::box1(2.0, 3.0);
  } else {
    r.omega = Region::box2(-1.0, 1.0, -1.0, 1.0);
    r.w1 = Region::ball(-2.5, 0.0, 0.8);
    r.w2 = Region::ball(2.5, 0.0, 0.8);
  }
  return r;
}

RegionMasks RegionMasks::build(const GridSpec& grid, const RegionSet& regions) {
  grid.validate();
  RegionMasks m;
  m.grid = grid;
  m.regions = regions;
  const long nn = grid.nodes();
  m.omega.assign(nn, 0);
  m.w1.assign(nn, 0);
  m.w2.assign(nn, 0);
  for (long p = 0; p < nn; ++p) {
    auto c = grid.coords(p);
    bool inOmega = regions.omega.contains(c[0], c[1], grid.dim);
    bool inW1 = regions.w1.contains(c[0], c[1], grid.dim);
    bool inW2 = regions.w2.contains(c[0], c[1], grid.dim);
    if (inOmega && (inW1 || inW2))
      throw std::invalid_argument("RegionMasks: measurement sets must lie in the exterior");
    if (inW1 && inW2) throw std::invalid_argument("RegionMasks: W1 and W2 overlap");
    m.omega[p] = inOmega;
    m.w1[p] = inW1;
    m.w2[p] = inW2;
    if (inOmega)
      m.omega_idx.push_back(p);
    else
      m.exterior_idx.push_back(p);
    if (inW1) m.w1_idx.push_back(p);
    if (inW2) m.w2_idx.push_back(p);
  }
  if (m.omega_idx.empty() || m.w1_idx.empty() || m.w2_idx.empty())
    throw std::invalid_argument("RegionMasks: every region must contain at least one node");
  return m;
}

GridFunction GridFunction::zeros(const GridSpec& g, int rank, bool pair) {
  if (rank < 0 || rank > 2) throw std::invalid_argument("GridFunction: rank must be 0, 1 or 2");
  GridFunction f;
  f.grid = g;
  f.rank = rank;
  f.pair = pair;
  f.v = Eigen::ArrayXXd::Zero(f.ncomp(), g.nodes());
  return f;
}

double l2_inner(const GridFunction& a, const GridFunction& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("l2_inner: shape mismatch");
  double cell = std::pow(a.grid.h(), a.grid.dim);
  return cell * (a.v * b.v).sum();
}

double l2_norm(const GridFunction& a) { return std::sqrt(l2_inner(a, a)); }

GridFunction restrict_to(const GridFunction& u, const std::vector<std::uint8_t>& mask) {
  if (static_cast<long>(mask.size()) != u.grid.nodes())
    throw std::invalid_argument("restrict_to: mask size mismatch");
  GridFunction out = u;
  for (long p = 0; p < u.grid.nodes(); ++p)
    if (!mask[p]) out.v.col(p).setZero();
  return out;
}

GridFunction extend_by_zero(const GridFunction& u, const std::vector<std::uint8_t>& mask) {
  /* data already lives on the full grid; extension keeps the region and
   * zeroes the rest, so it coincides with restriction to the region */
  return restrict_to(u, mask);
}

GridFunction smooth_bump(const GridSpec& grid, const std::array<double, 2>& center,
                         double radius, double amplitude) {
  grid.validate();
  if (radius <= 0.0) throw std::invalid_argument("smooth_bump: radius must be positive");
  for (int a = 0; a < grid.dim; ++a)
    if (center[a] - radius < -grid.half_width || center[a] + radius > grid.half_width)
      throw std::invalid_argument("smooth_bump: support ball exits the box");

  GridFunction f = GridFunction::zeros(grid, 0);
  for (long p = 0; p < grid.nodes(); ++p) {
    auto c = grid.coords(p);
    double dx = c[0] - center[0];
    double dy = grid.dim == 2 ? c[1] - center[1] : 0.0;
    double rho2 = (dx * dx + dy * dy) / (radius * radius);
    if (rho2 < 1.0) f.v(0, p) = amplitude * std::exp(1.0 - 1.0 / (1.0 - rho2));
  }
  return f;
}

LameField make_lame_field(const GridSpec& grid, const RegionMasks& masks, double L0,
                          double M0, const std::vector<BumpSpec>& bumps) {
  grid.validate();
  if (!grid.same_as(masks.grid)) throw std::invalid_argument("make_lame_field: grid mismatch");
  const int n = grid.dim;
  if (M0 <= 0.0 || L0 + 2.0 * M0 / n <= 0.0)
    throw std::invalid_argument("make_lame_field: background moduli violate positivity");

  LameField f;
  f.grid = grid;
  f.L0 = L0;
  f.M0 = M0;
  const long nn = grid.nodes();
  f.L = Eigen::ArrayXd::Constant(nn, L0);
  f.M = Eigen::ArrayXd::Constant(nn, M0);

  for (const BumpSpec& b : bumps) {
    if (b.param != 0 && b.param != 1)
      throw std::invalid_argument("make_lame_field: bump parameter must select L or M");
    if (!masks.regions.omega.contains_ball(b.center, b.radius, grid.dim))
      throw std::invalid_argument("make_lame_field: bump support leaves omega");
    GridFunction g = smooth_bump(grid, b.center, b.radius, b.amplitude);
    if (b.param == 0)
      f.L += g.v.row(0).transpose();
    else
      f.M += g.v.row(0).transpose();
  }

  f.K = f.L + 2.0 * f.M / n;
  const double K0 = L0 + 2.0 * M0 / n;
  f.K0 = K0;
  for (long p = 0; p < nn; ++p) {
    if (!(f.M[p] >= 0.1 * M0) || !(f.K[p] >= 0.1 * K0)) {
      std::ostringstream os;
      os << "make_lame_field: positivity floor violated at node " << p << " (M=" << f.M[p]
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
  bg.L = L0;
  bg.M = M0;
  SqrtParams s0 = sqrt_lame(bg);
  f.lam0 = s0.lambda;
  f.mu0 = s0.mu;
  f.k0 = s0.k;
  f.nu0 = poisson_ratio(bg);
  return f;
}

}  /* namespace fracelast */
