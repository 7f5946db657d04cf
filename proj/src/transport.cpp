#include "jkofp/transport.hpp"

#include <algorithm>
#include <cmath>

namespace jkofp {

namespace {

VecX edge_masses(const Density& rho) {
  const Index n = rho.grid().n();
  VecX F(n + 1);
  F[0] = 0;
  const double h = rho.grid().h();
  for (Index i = 0; i < n; ++i) F[i + 1] = F[i] + h * rho[i];
  F /= F[n];
  F[n] = 1.0;
  return F;
}

// Piecewise-linear evaluation on a known piece, so that knots shared by two
// curves are never evaluated on the wrong side.
double eval_on(const QuantileCurve& q, Index k, double s) {
  const VecX& F = q.knots();
  const VecX& X = q.values();
  return X[k] + (s - F[k]) * (X[k + 1] - X[k]) / (F[k + 1] - F[k]);
}

// Cell averages of the potential with gradient X - Y, where X is the quantile
// of the source and Y of the target. Consecutive averages differ by the
// displacement integrated against the hat function on the shared edge, which
// is computed exactly on the merged knots. Shifted to zero mean.
GridFunction cell_average_potential(const QuantileCurve& x, const QuantileCurve& y) {
  const Grid1D& grid = x.grid();
  const Index nx = grid.n();
  const Index ny = y.grid().n();
  const VecX& Fx = x.knots();
  const VecX& Fy = y.knots();
  VecX inc = VecX::Zero(nx + 1);
  Index i = 0, j = 0;
  double lo = 0;
  while (i < nx && j < ny) {
    const double hi = std::min(Fx[i + 1], Fy[j + 1]);
    if (hi > lo) {
      const double D = Fx[i + 1] - Fx[i];
      const double ru = eval_on(x, i, lo) - eval_on(y, j, lo);
      const double rv = eval_on(x, i, hi) - eval_on(y, j, hi);
      const double tu = (lo - Fx[i]) / D, tv = (hi - Fx[i]) / D;
      const double w = grid.h() / D * (hi - lo) / 6.0;
      inc[i + 1] += w * (2 * ru * tu + ru * tv + rv * tu + 2 * rv * tv);
      inc[i] += w * (2 * ru * (1 - tu) + ru * (1 - tv) + rv * (1 - tu) + 2 * rv * (1 - tv));
      lo = hi;
    }
    if (Fx[i + 1] <= hi) ++i;
    if (Fy[j + 1] <= hi) ++j;
  }
  VecX phi(nx);
  phi[0] = 0;
  for (Index k = 1; k < nx; ++k) phi[k] = phi[k - 1] + inc[k];
  phi.array() -= phi.mean();
  return GridFunction(grid, std::move(phi));
}

// For each node, the cumulative mass at its center.
VecX center_masses(const VecX& F) {
  const Index n = F.size() - 1;
  return 0.5 * (F.head(n) + F.tail(n));
}

}  // namespace

QuantileCurve::QuantileCurve(const Density& rho) : QuantileCurve(rho.grid(), edge_masses(rho)) {}

QuantileCurve::QuantileCurve(const Grid1D& grid, VecX cumulative)
    : grid_(grid), knots_(std::move(cumulative)), values_(grid.edges()) {
  if (knots_.size() != grid_.n() + 1) throw InvalidArgument("quantile curve: need n+1 knots");
  for (Index k = 0; k < grid_.n(); ++k) {
    if (!(knots_[k + 1] > knots_[k])) throw MonotonicityLoss("quantile curve: CDF increment vanishes");
  }
}

Index QuantileCurve::piece(double s) const {
  const auto* begin = knots_.data();
  const auto* end = begin + knots_.size();
  Index k = static_cast<Index>(std::upper_bound(begin, end, s) - begin) - 1;
  return std::clamp<Index>(k, 0, grid_.n() - 1);
}

double QuantileCurve::operator()(double s) const { return eval_on(*this, piece(s), s); }

double QuantileCurve::slope(double s) const {
  const Index k = piece(s);
  return (values_[k + 1] - values_[k]) / (knots_[k + 1] - knots_[k]);
}

GridFunction cdf(const Density& rho) {
  const VecX F = edge_masses(rho);
  return rho.f().with_values(F.tail(rho.grid().n()));
}

QuantileFn quantile(const Density& rho, Index m) {
  if (m < 2) throw InvalidArgument("quantile: need m >= 2");
  const QuantileCurve curve(rho);
  QuantileFn q;
  q.m = m;
  q.s = VecX::LinSpaced(m, 0.5 / m, (m - 0.5) / m);
  q.X.resize(m);
  for (Index j = 0; j < m; ++j) q.X[j] = curve(q.s[j]);
  for (Index j = 0; j + 1 < m; ++j) {
    if (!(q.X[j + 1] > q.X[j])) throw MonotonicityLoss("quantile: values not strictly increasing");
  }
  return q;
}

double w2_squared(const QuantileCurve& x, const QuantileCurve& y) {
  const VecX& Fx = x.knots();
  const VecX& Fy = y.knots();
  const Index nx = x.grid().n();
  const Index ny = y.grid().n();
  Index i = 0, j = 0;
  double lo = 0, acc = 0;
  while (i < nx && j < ny) {
    const double hi = std::min(Fx[i + 1], Fy[j + 1]);
    if (hi > lo) {
      const double ru = eval_on(x, i, lo) - eval_on(y, j, lo);
      const double rv = eval_on(x, i, hi) - eval_on(y, j, hi);
      acc += (hi - lo) * (ru * ru + ru * rv + rv * rv) / 3.0;
      lo = hi;
    }
    if (Fx[i + 1] <= hi) ++i;
    if (Fy[j + 1] <= hi) ++j;
  }
  return acc;
}

double w2_distance(const Density& rho, const Density& g) {
  return std::sqrt(w2_squared(QuantileCurve(rho), QuantileCurve(g)));
}

TransportPlan optimal_plan(const Density& rho, const Density& g) {
  const Grid1D& gx = rho.grid();
  const Grid1D& gy = g.grid();
  if (gx.a() != gy.a() || gx.b() != gy.b()) throw InvalidArgument("optimal_plan: densities live on different domains");
  const QuantileCurve qx(rho), qy(g);

  const VecX cx = center_masses(qx.knots());
  const VecX cy = center_masses(qy.knots());
  VecX T(gx.n()), S(gy.n());
  for (Index i = 0; i < gx.n(); ++i) T[i] = std::clamp(qy(cx[i]), gy.a(), gy.b());
  for (Index i = 0; i < gy.n(); ++i) S[i] = std::clamp(qx(cy[i]), gx.a(), gx.b());

  TransportPlan plan{rho,
                     g,
                     GridFunction(gx, T),
                     GridFunction(gy, S),
                     GridFunction(gx),
                     GridFunction(gy),
                     std::sqrt(w2_squared(qx, qy))};
  plan.T_left = qy(0.0);
  plan.T_right = eval_on(qy, gy.n() - 1, 1.0);
  plan.S_left = qx(0.0);
  plan.S_right = eval_on(qx, gx.n() - 1, 1.0);
  plan.phi = cell_average_potential(qx, qy);
  plan.psi = cell_average_potential(qy, qx);
  return plan;
}

double displacement_sup(const TransportPlan& plan) {
  return (plan.source.grid().nodes() - plan.T.values()).cwiseAbs().maxCoeff();
}

double duality_residual(const TransportPlan& plan) {
  const Grid1D& gx = plan.source.grid();
  const Grid1D& gy = plan.target.grid();
  const VecX& psi = plan.psi.values();
  std::vector<double> offsets;
  offsets.reserve(static_cast<size_t>(gx.n()));
  for (Index i = 1; i + 1 < gx.n(); ++i) {
    const double x = gx.node(i);
    const double t = plan.T[i];
    const double u = (t - gy.node(0)) / gy.h();
    if (u < 0 || u > static_cast<double>(gy.n() - 1)) continue;
    const Index k = std::min<Index>(static_cast<Index>(u), gy.n() - 2);
    const double w = u - static_cast<double>(k);
    const double psi_t = (1 - w) * psi[k] + w * psi[k + 1];
    offsets.push_back(plan.phi[i] + psi_t - 0.5 * (x - t) * (x - t));
  }
  if (offsets.empty()) return 0.0;
  double mean = 0;
  for (double o : offsets) mean += o;
  mean /= static_cast<double>(offsets.size());
  double worst = 0;
  for (double o : offsets) worst = std::max(worst, std::abs(o - mean));
  return worst;
}

}  // namespace jkofp
