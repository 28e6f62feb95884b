#pragma once

#include <Eigen/Core>

#include <cmath>
#include <deque>
#include <functional>
#include <vector>

namespace primrep {

struct LbfgsOptions {
  int max_iterations = 500;
  int memory = 10;
  double grad_tol = 1e-8;
  double value_tol = 1e-10;
  double armijo = 1e-4;
  int max_backtracks = 40;
};

struct LbfgsResult {
  Eigen::VectorXd x;
  double value = 0;
  double initial_value = 0;
  int iterations = 0;
  bool converged = false;
  bool line_search_failed = false;
  std::vector<double> history;  // objective after every accepted step, starting with the initial value
};

/// Limited-memory BFGS with backtracking (Armijo) line search. Only decreasing
/// steps are accepted, so the returned value never exceeds the initial one.
inline LbfgsResult lbfgs_minimize(const std::function<double(const Eigen::VectorXd&)>& f,
                                  const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& grad,
                                  Eigen::VectorXd x, const LbfgsOptions& opt = {}) {
  using Eigen::VectorXd;
  LbfgsResult r;
  double fx = f(x);
  r.initial_value = fx;
  r.history.push_back(fx);
  VectorXd g = grad(x);
  std::deque<std::pair<VectorXd, VectorXd>> mem;
  bool restarted = false;

  for (r.iterations = 0; r.iterations < opt.max_iterations; ++r.iterations) {
    if (fx <= opt.value_tol || g.norm() <= opt.grad_tol) {
      r.converged = true;
      break;
    }
    // Two-loop recursion.
    VectorXd q = g;
    std::vector<double> alpha(mem.size());
    for (int i = static_cast<int>(mem.size()) - 1; i >= 0; --i) {
      const auto& [s, y] = mem[i];
      alpha[i] = s.dot(q) / y.dot(s);
      q -= alpha[i] * y;
    }
    double gamma = 1.0;
    if (!mem.empty()) gamma = mem.back().first.dot(mem.back().second) / mem.back().second.squaredNorm();
    else gamma = std::min(1.0, 1.0 / std::max(g.norm(), 1e-300));
    VectorXd d = -gamma * q;
    for (std::size_t i = 0; i < mem.size(); ++i) {
      const auto& [s, y] = mem[i];
      const double beta = y.dot(d) / y.dot(s);
      d -= (alpha[i] + beta) * s;
    }
    double slope = g.dot(d);
    if (!(slope < 0)) {
      mem.clear();
      d = -std::min(1.0, 1.0 / g.norm()) * g;
      slope = g.dot(d);
    }

    double step = 1.0;
    bool ok = false;
    VectorXd xn;
    double fn = fx;
    for (int b = 0; b < opt.max_backtracks; ++b, step *= 0.5) {
      xn = x + step * d;
      fn = f(xn);
      if (std::isfinite(fn) && fn <= fx + opt.armijo * step * slope && fn < fx) {
        ok = true;
        break;
      }
    }
    if (!ok) {
      // Retry once from steepest descent with fresh memory before giving up.
      if (!restarted && !mem.empty()) {
        mem.clear();
        restarted = true;
        continue;
      }
      r.line_search_failed = true;
      break;
    }
    restarted = false;
    const VectorXd gn = grad(xn);
    const VectorXd s = xn - x, y = gn - g;
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      mem.emplace_back(s, y);
      if (static_cast<int>(mem.size()) > opt.memory) mem.pop_front();
    }
    x = xn;
    fx = fn;
    g = gn;
    r.history.push_back(fx);
  }
  if (r.iterations >= opt.max_iterations && (fx <= opt.value_tol || g.norm() <= opt.grad_tol)) r.converged = true;
  r.x = std::move(x);
  r.value = fx;
  return r;
}

}  // namespace primrep
