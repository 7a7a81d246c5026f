#pragma once

#include <cmath>
#include <algorithm>
#include <complex>
#include <vector>

#include <Eigen/Dense>

namespace dbar::solver {

template <typename Scalar>
struct GmresResult {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> x;
  int iterations = 0;
  double residual = 0;  // ‖b − A x‖ / ‖b‖ recomputed from the returned x
  bool converged = false;
};

// Full (unrestarted) GMRES with modified Gram-Schmidt and Givens rotations,
// starting from x0 = 0. `apply(in, out)` computes out = A·in.
template <typename Scalar, typename Op>
GmresResult<Scalar> gmres(const Op& apply, const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& b, double tol,
                          int max_iter) {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using std::abs;
  using std::conj;
  using std::sqrt;
  const Eigen::Index n = b.size();
  GmresResult<Scalar> res;
  res.x = Vec::Zero(n);
  const double bnorm = b.norm();
  if (bnorm == 0) {
    res.converged = true;
    return res;
  }

  std::vector<Vec> V;
  V.reserve(max_iter + 1);
  V.push_back(b / bnorm);
  // The Hessenberg matrix grows on demand: most solves stop after a few steps.
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  int cap = std::min(max_iter, 16);
  Mat H = Mat::Zero(cap + 1, cap);
  std::vector<Scalar> cs(max_iter), sn(max_iter);
  Vec g = Vec::Zero(max_iter + 1);
  g[0] = bnorm;

  auto conj_s = [](Scalar v) {
    if constexpr (std::is_floating_point_v<Scalar>) return v;
    else return conj(v);
  };

  int k = 0;
  Vec w(n);
  for (; k < max_iter; ++k) {
    if (k == cap) {
      cap = std::min(2 * cap, max_iter);
      H.conservativeResizeLike(Mat::Zero(cap + 1, cap));
    }
    apply(V[k], w);
    for (int i = 0; i <= k; ++i) {
      H(i, k) = V[i].dot(w);  // dot conjugates its left argument
      w -= H(i, k) * V[i];
    }
    double hn = w.norm();
    H(k + 1, k) = hn;
    for (int i = 0; i < k; ++i) {
      Scalar t = cs[i] * H(i, k) + sn[i] * H(i + 1, k);
      H(i + 1, k) = -conj_s(sn[i]) * H(i, k) + cs[i] * H(i + 1, k);
      H(i, k) = t;
    }
    // Rotation zeroing H(k+1,k); cs is real-valued.
    double a = abs(H(k, k));
    double r = std::hypot(a, hn);
    if (r == 0) {
      cs[k] = 1;
      sn[k] = 0;
    } else if (a == 0) {
      cs[k] = 0;
      sn[k] = 1;
    } else {
      cs[k] = a / r;
      sn[k] = H(k, k) / a * (hn / r);
    }
    Scalar hk = H(k, k);
    H(k, k) = cs[k] * hk + sn[k] * H(k + 1, k);
    H(k + 1, k) = 0;
    g[k + 1] = -conj_s(sn[k]) * g[k];
    g[k] = cs[k] * g[k];
    if (abs(g[k + 1]) / bnorm < 0.5 * tol || hn == 0) {
      ++k;
      break;
    }
    V.push_back(w / hn);
  }
  res.iterations = k;
  Vec y = H.topLeftCorner(k, k).template triangularView<Eigen::Upper>().solve(g.head(k));
  for (int i = 0; i < k; ++i) res.x += y[i] * V[i];
  Vec r(n);
  apply(res.x, r);
  res.residual = (b - r).norm() / bnorm;
  res.converged = res.residual < tol;
  return res;
}

}  // namespace dbar::solver
