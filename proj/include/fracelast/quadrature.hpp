#pragma once

#include <fracelast/grid.hpp>

#include <Eigen/Dense>

namespace fracelast {

// Exact integral of |x-y|^{-n-2s} over the complement of the box [-w,w]^n,
// for x strictly inside the box.  In two dimensions the complement is split
// into four half-planes minus the doubly counted corner quadrants; the corner
// pieces reduce to one-dimensional angular integrals evaluated by a
// double-exponential rule.
double box_complement_integral(const std::array<double, 2>& x, double w, int dim,
                               double s);

// Companion directional weights: the 2x2 matrix integral of
// (y-x)(y-x)^T |x-y|^{-n-2s-2} over the same complement (two dimensions).
// Its trace equals box_complement_integral by construction.
Eigen::Matrix2d box_complement_moments(const std::array<double, 2>& x, double w,
                                       double s);

// Reference pointwise fractional Laplacian by direct singular-integral
// quadrature: cellwise midpoint sum, a second-order Taylor correction for the
// singular cell, and the exact box-complement tail.  Componentwise on any
// field shape.  Independent of the spectral path; used for cross-validation.
GridFunction frac_laplacian_quadrature(const GridFunction& u, double s);

}  // namespace fracelast
