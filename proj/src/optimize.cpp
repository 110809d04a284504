// Copyright 2026 The swmrs Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "swmrs/optimize.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace swmrs {

namespace {

double safe_eval(const Objective& f, const Eigen::VectorXd& x) {
  const double v = f(x);
  return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
}

}  // namespace

OptimResult nelder_mead(const Objective& f, const Eigen::VectorXd& x0, double step, double ftol,
                        int max_iter) {
  const Eigen::Index n = x0.size();
  std::vector<Eigen::VectorXd> pts(static_cast<std::size_t>(n + 1), x0);
  std::vector<double> val(static_cast<std::size_t>(n + 1));
  for (Eigen::Index k = 0; k < n; ++k) pts[static_cast<std::size_t>(k + 1)](k) += step;
  for (std::size_t k = 0; k < pts.size(); ++k) val[k] = safe_eval(f, pts[k]);

  std::vector<std::size_t> idx(pts.size());
  OptimResult res;
  int it = 0;
  for (; it < max_iter; ++it) {
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return val[a] < val[b]; });
    const std::size_t best = idx.front(), worst = idx.back(), second = idx[idx.size() - 2];
    if (std::abs(val[worst] - val[best]) <= ftol * (std::abs(val[best]) + ftol)) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (std::size_t k : idx)
      if (k != worst) centroid += pts[k];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd xr = centroid + (centroid - pts[worst]);
    const double fr = safe_eval(f, xr);
    if (fr < val[best]) {
      const Eigen::VectorXd xe = centroid + 2.0 * (centroid - pts[worst]);
      const double fe = safe_eval(f, xe);
      if (fe < fr) {
        pts[worst] = xe;
        val[worst] = fe;
      } else {
        pts[worst] = xr;
        val[worst] = fr;
      }
      continue;
    }
    if (fr < val[second]) {
      pts[worst] = xr;
      val[worst] = fr;
      continue;
    }
    const bool outside = fr < val[worst];
    const Eigen::VectorXd xc = outside ? Eigen::VectorXd(centroid + 0.5 * (xr - centroid))
                                       : Eigen::VectorXd(centroid + 0.5 * (pts[worst] - centroid));
    const double fc = safe_eval(f, xc);
    if (fc < (outside ? fr : val[worst])) {
      pts[worst] = xc;
      val[worst] = fc;
      continue;
    }
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (k == best) continue;
      pts[k] = pts[best] + 0.5 * (pts[k] - pts[best]);
      val[k] = safe_eval(f, pts[k]);
    }
  }
  const auto best = static_cast<std::size_t>(std::min_element(val.begin(), val.end()) - val.begin());
  res.x = pts[best];
  res.value = val[best];
  res.iterations = it;
  return res;
}

Eigen::VectorXd central_gradient(const Objective& f, const Eigen::VectorXd& x, double h) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    const double hk = h * std::max(1.0, std::abs(x(k)));
    xp(k) = x(k) + hk;
    const double fp = f(xp);
    xp(k) = x(k) - hk;
    const double fm = f(xp);
    xp(k) = x(k);
    g(k) = (fp - fm) / (2.0 * hk);
  }
  return g;
}

OptimResult bfgs(const Objective& f, const Eigen::VectorXd& x0, const BfgsOptions& opt) {
  const Eigen::Index n = x0.size();
  OptimResult res;
  Eigen::VectorXd x = x0;
  double fx = safe_eval(f, x);
  Eigen::VectorXd g = central_gradient(f, x, opt.fd_step);
  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(n, n);
  auto scaled = [&](const Eigen::VectorXd& gr, double fv) {
    return gr.lpNorm<Eigen::Infinity>() / (opt.relative ? std::max(1.0, std::abs(fv)) : 1.0);
  };

  int it = 0, stalls = 0;
  for (; it < opt.max_iter; ++it) {
    if (!g.allFinite()) break;
    if (scaled(g, fx) < opt.gtol) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd d = -H * g;
    double slope = g.dot(d);
    if (!(slope < 0.0)) {
      H.setIdentity();
      d = -g;
      slope = -g.squaredNorm();
    }
    // keep the first step of a fresh search direction modest
    const double dn = d.lpNorm<Eigen::Infinity>();
    if (dn > 5.0) {
      d *= 5.0 / dn;
      slope *= 5.0 / dn;
    }
    double t = 1.0, fnew = 0.0;
    Eigen::VectorXd xnew;
    bool accepted = false;
    for (int ls = 0; ls < 50; ++ls) {
      xnew = x + t * d;
      fnew = safe_eval(f, xnew);
      if (fnew <= fx + 1e-4 * t * slope) {
        accepted = true;
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      // no further decrease is resolvable at finite-difference precision
      res.converged = scaled(g, fx) < 100.0 * opt.gtol;
      break;
    }
    // accepted steps that no longer change f: the gradient is at noise level
    if (fx - fnew <= 2e-15 * std::max(1.0, std::abs(fx))) {
      if (++stalls >= 3) {
        res.converged = scaled(g, fx) < 100.0 * opt.gtol;
        break;
      }
    } else {
      stalls = 0;
    }
    const Eigen::VectorXd gnew = central_gradient(f, xnew, opt.fd_step);
    const Eigen::VectorXd s = xnew - x, y = gnew - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const double rho = 1.0 / sy;
      if (it == 0) H *= sy / y.squaredNorm();
      const Eigen::MatrixXd V = Eigen::MatrixXd::Identity(n, n) - rho * s * y.transpose();
      H = V * H * V.transpose() + rho * s * s.transpose();
    }
    x = xnew;
    fx = fnew;
    g = gnew;
  }
  res.x = x;
  res.value = fx;
  res.iterations = it;
  res.gradient_norm = g.lpNorm<Eigen::Infinity>();
  if (!res.converged && scaled(g, fx) < opt.gtol) res.converged = true;
  return res;
}

}  // namespace swmrs
