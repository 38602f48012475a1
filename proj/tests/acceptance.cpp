// Acceptance criteria. Prints one PASS/FAIL line per criterion followed by
// indented detail lines; exits non-zero when any criterion fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <string>
#include <vector>

#include "kgm/config.hpp"
#include "kgm/elliptic.hpp"
#include "kgm/generators.hpp"
#include "kgm/harness.hpp"
#include "kgm/reduced.hpp"
#include "oracle.hpp"

using namespace kgm;

namespace {

struct Outcome {
  bool passed = true;
  std::vector<std::string> details;

  void expect(bool ok, const std::string& what, double measured, const char* rel, double threshold) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%s %s: %.6e %s %.6e", ok ? "ok  " : "FAIL", what.c_str(), measured, rel, threshold);
    details.emplace_back(buf);
    passed = passed && ok;
  }
  void le(const std::string& what, double m, double t) { expect(m <= t, what, m, "<=", t); }
  void ge(const std::string& what, double m, double t) { expect(m >= t, what, m, ">=", t); }
  void from(const RunReport& rep, const std::string& name, const std::string& label, bool force_assert = false) {
    const Check* c = rep.find(name);
    if (!c) {
      details.push_back("FAIL " + label + ": check " + name + " missing");
      passed = false;
      return;
    }
    const bool ok = c->passed || (!c->asserted && !force_assert);
    expect(ok && c->passed, label + " [" + name + "]", c->measured, c->relation.c_str(), c->threshold);
    if (!c->note.empty()) details.push_back("     " + c->note);
  }
};

double max_error(const ScalarField& f, const std::function<double(const std::array<double, 3>&)>& exact) {
  double e = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i) e = std::max(e, std::abs(f[i] - exact(f.grid->position(i))));
  return e;
}

Outcome closed_form_chi() {
  Outcome o;
  const double c = 0.75;
  auto face = [](const std::array<double, 3>& x) { return x[0] * x[0] / 2.0 - 1.0 / 6.0; };
  auto cons = [c](const std::array<double, 3>& x) {
    double s = 0.0;
    for (int a = 0; a < 3; ++a) s += (x[a] - 0.5) * (x[a] - 0.5);
    return c * s - c / 4.0;
  };
  const auto g8 = oracle::cube(9), g16 = oracle::cube(17);
  const double f8 = max_error(solve_chi(gen::face_indicator(g8, 1)).chi, face);
  const double f16 = max_error(solve_chi(gen::face_indicator(g16, 1)).chi, face);
  const double c8 = max_error(solve_chi(gen::boundary_constant(g8, c)).chi, cons);
  const double c16 = max_error(solve_chi(gen::boundary_constant(g16, c)).chi, cons);
  o.details.push_back("     face indicator: max error h=1/8 " + std::to_string(f8) + ", h=1/16 " + std::to_string(f16));
  o.details.push_back("     constant 0.75:  max error h=1/8 " + std::to_string(c8) + ", h=1/16 " + std::to_string(c16));
  o.expect(std::abs(f8 / f16 - 4.0) <= 0.6, "face indicator error ratio", f8 / f16, "~", 4.0);
  o.expect(std::abs(c8 / c16 - 4.0) <= 0.6, "constant data error ratio", c8 / c16, "~", 4.0);
  return o;
}

Outcome screened_oracle() {
  Outcome o;
  const auto g = oracle::cube(5);
  std::mt19937_64 rng(20240501);
  double worst = 0.0, worst_round = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto b = gen::random_nodal(g, rng, Space::Neumann);
    const auto rho = gen::random_nodal(g, rng, Space::Neumann);
    const ScreenedOperator op(b);
    const auto phi = solve_screened(op, rho);
    const oracle::Vec ref = oracle::screened_solve(*g, oracle::to_vec(b.values), oracle::to_vec(rho.values));
    const double scale = std::max(1.0, ref.lpNorm<Eigen::Infinity>());
    worst = std::max(worst, (oracle::to_vec(phi.values) - ref).lpNorm<Eigen::Infinity>() / scale);
    const oracle::Vec wr = oracle::weights(*g).cwiseProduct(oracle::to_vec(rho.values));
    worst_round = std::max(worst_round, (oracle::to_vec(apply_screened(op, phi)) - wr).norm() / wr.norm());
  }
  o.le("max deviation from dense LU over 20 pairs", worst, 1e-9);
  o.le("apply after solve relative error", worst_round, 1e-8);
  return o;
}

Outcome maximum_principle() {
  Outcome o;
  const auto g = oracle::cube(9);
  std::mt19937_64 rng(77);
  double worst = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 50; ++trial) {
    ScalarField b = trial % 2 ? gen::half_indicator(g, trial % 3, trial % 4 < 2, 1.0)
                              : gen::random_nodal(g, rng, Space::Neumann);
    auto rho = gen::random_nodal(g, rng, Space::Neumann);
    for (auto& v : rho.values) v = std::abs(v);
    const auto phi = solve_screened(ScreenedOperator(b), rho);
    worst = std::min(worst, *std::min_element(phi.values.begin(), phi.values.end()));
  }
  o.ge("min over 50 solves of min nodal value", worst, -1e-10);
  return o;
}

Outcome decomposition_bounds(const RunReport& rep) {
  Outcome o;
  o.from(rep, "phi.eta_sign", "(a) min A eta");
  o.from(rep, "phi.grad_eta_bound", "(b) |grad eta| / (gamma |qu|_3^2 |mean eta|)");
  o.from(rep, "phi.xi_bound", "(d) |xi|_inf / |chi|_inf");
  o.from(rep, "phi.flux_identity", "flux identity relative error");
  o.from(rep, "phi.eta_mean_lower_bound", "mean eta lower bound");
  return o;
}

Outcome j_consistency(const RunReport& rep) {
  Outcome o;
  o.from(rep, "J.direct_vs_decomposed", "direct vs decomposed");
  o.from(rep, "J.even_sign_flip", "J(u) = J(-u)");
  o.from(rep, "J.even_abs_literal", "J(u) = J(|u|)", true);
  o.from(rep, "J.gradient_fd", "gradient vs central differences");
  return o;
}

Outcome existence() {
  Outcome o;
  auto c = parse_config_text(
      "grid.extent = 1, 1.25, 1.5\n"
      "grid.n = 9, 9, 9\n"
      "solver.tol_grad = 1e-9\n"
      "solve.seeds = 5\n"
      "multistart.k = 4\n");
  const auto grid = build_grid(c);
  const auto p = build_problem(c, grid);
  const auto K = constants_for(c, grid, p.alpha());
  o.ge("|A|", std::abs(p.flux()), 1e-12);
  o.le("|q|_6 |alpha|_1/2 vs delta_hat", p.smallness(), K.delta);
  const RunReport rep = run_solve(c);
  o.le("grad_norm", [&] { const Check* k = rep.find("solve.converged"); return k ? k->measured : 1.0; }(), 1e-6);
  o.from(rep, "solve.nonnegative", "min nodal u after symmetrization");
  const Check* res = rep.find("solve.residual");
  o.le("full-system residual", res ? res->measured : 1.0, 1e-7);
  o.from(rep, "solve.seed_agreement", "J spread over 5 seeds");
  o.from(rep, "solve.J_monotone", "J monotone along accepted steps");
  o.from(rep, "multistart.count", "distinct critical points");
  o.from(rep, "multistart.verified", "undeflated gradient norm");
  o.from(rep, "multistart.distinct", "pairwise distance");
  o.from(rep, "multistart.J_increasing", "strictly increasing J");
  if (!rep.passed()) {
    o.passed = false;
    o.details.push_back("FAIL solve report has failing checks");
  }
  return o;
}

Outcome nonexistence() {
  Outcome o;
  const auto c = parse_config_text(
      "alpha.kind = dipole\n"
      "alpha.axis = 0\n"
      "nonexistence.seeds = 5\n");
  const RunReport rep = run_nonexistence(c);
  bool inside = false;
  for (const auto& [k, v] : rep.values)
    if (k == "hypothesis") inside = v.rfind("inside", 0) == 0;
  o.expect(inside, "product below delta_hat", inside ? 1.0 : 0.0, "==", 1.0);
  o.from(rep, "nonexistence.flux_zero", "|A|");
  o.from(rep, "nonexistence.decay", "worst decay ratio");
  o.from(rep, "nonexistence.identity_slack", "identity slack");
  return o;
}

Outcome blowup() {
  Outcome o;
  const auto g = oracle::cube(9);
  const auto p = ReducedProblem::assemble(1.0, gen::constant(g, 1.0), gen::boundary_constant(g, 1.0));
  const auto u = gen::dirichlet_mode(g, {1, 1, 1});
  std::vector<double> J;
  std::string line = "     J(t u):";
  for (double t : {1.0, 1e-1, 1e-2, 1e-3, 1e-4}) {
    J.push_back(J_value(p, t * u));
    char buf[64];
    std::snprintf(buf, sizeof buf, " %.6e", J.back());
    line += buf;
  }
  o.details.push_back(line);
  o.expect(J[2] < J[3], "J(1e-2 u) < J(1e-3 u)", J[3] - J[2], ">", 0.0);
  o.expect(J[3] < J[4], "J(1e-3 u) < J(1e-4 u)", J[4] - J[3], ">", 0.0);
  return o;
}

}  // namespace

int main() {
  const auto start = std::chrono::steady_clock::now();
  int failed = 0;
  auto run = [&failed](int id, const char* name, double budget_s, const std::function<Outcome()>& f) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = f();
    } catch (const std::exception& e) {
      o.passed = false;
      o.details.push_back(std::string("FAIL exception: ") + e.what());
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (budget_s > 0 && s > budget_s) {
      o.passed = false;
      o.details.push_back("FAIL runtime over budget of " + std::to_string(budget_s) + " s");
    }
    std::printf("criterion %d %-34s %s  (%.2f s)\n", id, name, o.passed ? "PASS" : "FAIL", s);
    for (const auto& d : o.details) std::printf("    %s\n", d.c_str());
    std::fflush(stdout);
    if (!o.passed) ++failed;
  };

  run(1, "closed-form chi", 10, closed_form_chi);
  run(2, "screened solver vs dense oracle", 0, screened_oracle);
  run(3, "maximum principle", 0, maximum_principle);

  RunReport inv;
  const auto t_inv = std::chrono::steady_clock::now();
  inv = run_invariants(RunConfig{});
  const double inv_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_inv).count();
  std::printf("invariant suite at the default 9^3 configuration: %.2f s\n", inv_s);
  run(4, "decomposition bounds", 120, [&] { return decomposition_bounds(inv); });
  run(5, "reduced energy consistency", 0, [&] { return j_consistency(inv); });
  run(6, "existence and nonnegative minimizer", 300, existence);
  run(7, "nonexistence for zero total flux", 120, nonexistence);
  run(8, "blow-up towards the boundary", 0, blowup);

  const double total = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::printf("acceptance: %d of 8 criteria passed (%.1f s)\n", 8 - failed, total);
  return failed == 0 ? 0 : 1;
}
