#pragma once

/*
 * Dense tensor algebra for small isotropic-elasticity tensors.
 *
 * Tensors are stored flat in row-major order with an explicit shape
 * vector.  Everything here is exact (no grids involved): products,
 * k-fold contractions, the rank-4 isotropic stiffness tensor, its
 * square root in closed form, the compliance tensor and the Poisson
 * ratio.  Sizes are tiny (n <= 3, rank <= 4 in practice), so storage
 * is dense and unoptimized on purpose.
 */

#include <Eigen/Dense>

#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace fracelast {

template <typename Scalar = double>
struct DenseTensor {
  std::vector<int> shape;
  Eigen::Array<Scalar, Eigen::Dynamic, 1> data;

  DenseTensor() = default;

  explicit DenseTensor(std::vector<int> shape_) : shape(std::move(shape_)) {
    for (int e : shape)
      if (e <= 0) throw std::invalid_argument("DenseTensor: extents must be positive");
    data = Eigen::Array<Scalar, Eigen::Dynamic, 1>::Zero(size_of(shape));
  }

  static long size_of(const std::vector<int>& sh) {
    long p = 1;
    for (int e : sh) p *= e;
    return p;
  }

  int rank() const { return static_cast<int>(shape.size()); }
  long size() const { return data.size(); }

  long flat_index(std::initializer_list<int> idx) const {
    if (static_cast<int>(idx.size()) != rank())
      throw std::invalid_argument("DenseTensor: index rank mismatch");
    long f = 0;
    int a = 0;
    for (int i : idx) {
      if (i < 0 || i >= shape[a]) throw std::out_of_range("DenseTensor: index out of range");
      f = f * shape[a] + i;
      ++a;
    }
    return f;
  }

  Scalar& operator()(std::initializer_list<int> idx) { return data[flat_index(idx)]; }
  Scalar operator()(std::initializer_list<int> idx) const { return data[flat_index(idx)]; }

  static DenseTensor vector(std::initializer_list<Scalar> vals) {
    DenseTensor t(std::vector<int>{static_cast<int>(vals.size())});
    int i = 0;
    for (Scalar v : vals) t.data[i++] = v;
    return t;
  }

  static DenseTensor identity(int n) {
    DenseTensor t(std::vector<int>{n, n});
    for (int i = 0; i < n; ++i) t.data[i * n + i] = Scalar(1);
    return t;
  }
};

template <typename Scalar>
DenseTensor<Scalar> tensor_product(const DenseTensor<Scalar>& a, const DenseTensor<Scalar>& b) {
  std::vector<int> sh = a.shape;
  sh.insert(sh.end(), b.shape.begin(), b.shape.end());
  DenseTensor<Scalar> out(sh);
  const long nb = b.size();
  for (long i = 0; i < a.size(); ++i)
    out.data.segment(i * nb, nb) = a.data[i] * b.data;
  return out;
}

/* Einstein contraction of the last k indices of a with the first k of b. */
template <typename Scalar>
DenseTensor<Scalar> contract(const DenseTensor<Scalar>& a, const DenseTensor<Scalar>& b, int k) {
  if (k < 1 || k > a.rank() || k > b.rank())
    throw std::invalid_argument("contract: k out of range");
  for (int j = 0; j < k; ++j)
    if (a.shape[a.rank() - k + j] != b.shape[j])
      throw std::invalid_argument("contract: shared extents disagree");

  long inner = 1;
  for (int j = 0; j < k; ++j) inner *= a.shape[a.rank() - k + j];
  const long rows = a.size() / inner;
  const long cols = b.size() / inner;

  std::vector<int> sh(a.shape.begin(), a.shape.end() - k);
  sh.insert(sh.end(), b.shape.begin() + k, b.shape.end());
  if (sh.empty()) sh.push_back(1);  /* full contraction yields a rank-1 singleton */
  DenseTensor<Scalar> out(sh);

  using RowMat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  Eigen::Map<const RowMat> ma(a.data.data(), rows, inner);
  Eigen::Map<const RowMat> mb(b.data.data(), inner, cols);
  Eigen::Map<RowMat> mo(out.data.data(), rows, cols);
  mo = ma * mb;
  return out;
}

struct IsotropicParams {
  int n = 2;       /* spatial dimension */
  double L = 0.0;  /* first Lame parameter */
  double M = 1.0;  /* shear parameter */

  double bulk() const { return L + 2.0 * M / n; }
  bool admissible() const { return n >= 1 && n <= 3 && M > 0.0 && bulk() > 0.0; }
};

struct SqrtParams {
  double lambda = 0.0;
  double mu = 1.0;
  double k = 1.0;  /* k = lambda + 2 mu / n */
};

template <typename Scalar = double>
DenseTensor<Scalar> isotropic_rank4(int n, Scalar lam, Scalar mu) {
  DenseTensor<Scalar> c(std::vector<int>{n, n, n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l)
        for (int m = 0; m < n; ++m)
          c({i, j, l, m}) = lam * (i == j) * (l == m)
                          + mu * ((i == l) * (j == m) + (i == m) * (j == l));
  return c;
}

inline DenseTensor<double> isotropic_stiffness(const IsotropicParams& p) {
  return isotropic_rank4<double>(p.n, p.L, p.M);
}

/* Positive-k branch of the tensor square root; the negative branch is
 * never representable.  mu = sqrt(M/2), lambda = (sqrt(2M+nL)-sqrt(2M))/n,
 * and then k = lambda + 2 mu / n = sqrt(K/n). */
inline SqrtParams sqrt_lame(const IsotropicParams& p) {
  if (p.M <= 0.0) throw std::domain_error("sqrt_lame: shear parameter M must be positive");
  if (p.bulk() <= 0.0) throw std::domain_error("sqrt_lame: bulk modulus K must be positive");
  SqrtParams s;
  s.mu = std::sqrt(p.M / 2.0);
  s.lambda = (std::sqrt(2.0 * p.M + p.n * p.L) - std::sqrt(2.0 * p.M)) / p.n;
  s.k = s.lambda + 2.0 * s.mu / p.n;
  return s;
}

inline DenseTensor<double> sqrt_stiffness(const SqrtParams& s, int n) {
  return isotropic_rank4<double>(n, s.lambda, s.mu);
}

struct TwoPointCoeffs {
  double cTr;   /* coefficient of delta_ij delta_lm */
  double cSym;  /* coefficient of each of delta_il delta_jm and delta_im delta_jl */
};

/* Coefficients of C^{1/2}(x) : C^{1/2}(y) as an isotropic rank-4 tensor.
 * Grouped so that swapping the arguments is bitwise exact. */
inline TwoPointCoeffs two_point_coeffs(const SqrtParams& sx, const SqrtParams& sy, int n) {
  TwoPointCoeffs c;
  c.cTr = n * (sx.lambda * sy.lambda) + 2.0 * (sx.lambda * sy.mu + sy.lambda * sx.mu);
  c.cSym = 2.0 * (sx.mu * sy.mu);
  return c;
}

inline DenseTensor<double> two_point_tensor(const SqrtParams& sx, const SqrtParams& sy, int n) {
  TwoPointCoeffs c = two_point_coeffs(sx, sy, n);
  DenseTensor<double> t(std::vector<int>{n, n, n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l)
        for (int m = 0; m < n; ++m)
          t({i, j, l, m}) = c.cTr * (i == j) * (l == m)
                          + c.cSym * ((i == l) * (j == m) + (i == m) * (j == l));
  return t;
}

inline DenseTensor<double> compliance(const IsotropicParams& p) {
  if (p.M <= 0.0 || p.bulk() <= 0.0)
    throw std::domain_error("compliance: moduli must be positive");
  const double K = p.bulk();
  const int n = p.n;
  DenseTensor<double> s(std::vector<int>{n, n, n, n});
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l)
        for (int m = 0; m < n; ++m)
          s({i, j, l, m}) = (i == l) * (j == m) / (2.0 * p.M)
                          - p.L * (i == j) * (l == m) / (2.0 * n * p.M * K);
  return s;
}

inline double poisson_ratio(const IsotropicParams& p) {
  return p.L / ((p.n - 1) * p.L + 2.0 * p.M);
}

}  /* namespace fracelast */
