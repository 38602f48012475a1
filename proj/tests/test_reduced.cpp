#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "kgm/error.hpp"
#include "kgm/generators.hpp"
#include "kgm/reduced.hpp"
#include "oracle.hpp"

using namespace kgm;

namespace {

ReducedProblem unit_problem(const GridPtr& g, double m = 1.0, double alpha = 1.0) {
  return ReducedProblem::assemble(m, gen::constant(g, 1.0), gen::boundary_constant(g, alpha));
}

ScalarField bump(const GridPtr& g) { return gen::dirichlet_mode(g, {1, 1, 1}); }

struct DensePipeline {
  oracle::Vec chi, eta, xi, phi;
  double J = 0.0;
};

// Every piece from Eigen: χ by a bordered LU, η and ξ by dense LU, J by dense quadratic forms.
DensePipeline dense_pipeline(const ReducedProblem& p, const ScalarField& u) {
  const Grid& g = *p.grid();
  const oracle::Vec w = oracle::weights(g);
  const oracle::Mat K = oracle::stiffness(g);
  const double vol = w.sum();
  const oracle::Vec uv = oracle::to_vec(u.values), qv = oracle::to_vec(p.q().values);
  const double A = p.flux();
  DensePipeline d;
  d.chi = oracle::chi(g, oracle::to_vec(boundary_dual(p.alpha())), A);
  const oracle::Vec b = qv.cwiseProduct(uv);
  const oracle::Vec b2 = b.cwiseAbs2();
  d.eta = oracle::screened_solve(g, b, oracle::Vec::Constant(g.size(), A / vol));
  d.xi = oracle::screened_solve(g, b, -b2.cwiseProduct(d.chi));
  d.phi = d.eta + d.xi;
  const oracle::Vec s = d.phi + d.chi;
  const double m2 = p.m() * p.m();
  double potential = 0.0;
  for (Eigen::Index i = 0; i < uv.size(); ++i) potential += w[i] * (m2 - qv[i] * qv[i] * s[i] * s[i]) * uv[i] * uv[i];
  d.J = uv.dot(K * uv) + potential - d.phi.dot(K * d.phi) + 2.0 * A * w.dot(d.phi) / vol;
  return d;
}

double inf_diff(const ScalarField& f, const oracle::Vec& ref) {
  return (oracle::to_vec(f.values) - ref).lpNorm<Eigen::Infinity>();
}

}  // namespace

TEST_CASE("assemble: unit cube with unit flux density") {
  const auto g = oracle::cube(9);
  const auto p = unit_problem(g);
  CHECK(p.flux() == doctest::Approx(6.0).epsilon(1e-13));
  CHECK_FALSE(p.nonexistence_regime());
  const auto c = solve_chi(gen::boundary_constant(g, 1.0));
  CHECK(inf_diff(p.chi().chi, oracle::to_vec(c.chi.values)) == 0.0);
  CHECK(p.smallness() == doctest::Approx(p.q_l6() * p.alpha_half_norm()));
}

TEST_CASE("assemble: zero flux density is the nonexistence regime") {
  const auto g = oracle::cube(5);
  const auto p = unit_problem(g, 1.0, 0.0);
  CHECK(p.flux() == 0.0);
  CHECK(p.chi().chi_inf == 0.0);
  CHECK(p.nonexistence_regime());
}

TEST_CASE("assemble: half-domain coupling is accepted, zero coupling is rejected") {
  const auto g = oracle::cube(5);
  CHECK_NOTHROW(ReducedProblem::assemble(1.0, gen::half_indicator(g, 0, false, 1.0), gen::boundary_constant(g, 1.0)));
  try {
    ReducedProblem::assemble(1.0, gen::constant(g, 0.0), gen::boundary_constant(g, 1.0));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::InvalidArgument);
  }
}

TEST_CASE("lambda diagnostic") {
  const auto g = oracle::cube(9);
  const auto p = ReducedProblem::assemble(1.0, gen::half_indicator(g, 0, false, 1.0), gen::boundary_constant(g, 1.0));
  const auto zero = lambda_diagnostic(p, ScalarField(g, Space::Dirichlet));
  CHECK(zero.qu_l3 == 0.0);
  CHECK_FALSE(zero.member);

  ScalarField right(g, Space::Dirichlet);
  for (std::size_t i = 0; i < g->size(); ++i)
    if (!g->is_boundary(i) && g->position(i)[0] > 0.5) right[i] = 1.0;
  const auto d = lambda_diagnostic(p, right);
  CHECK(d.qu_l3 == 0.0);
  CHECK_FALSE(d.member);
  try {
    phi_of(p, right);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::LambdaViolation);
  }
}

TEST_CASE("lambda diagnostic matches dense summation oracle") {
  const auto g = oracle::cube(5);
  std::mt19937_64 rng(3);
  auto q = gen::random_nodal(g, rng, Space::Neumann);
  const auto p = ReducedProblem::assemble(1.0, q, gen::random_boundary(g, rng));
  const auto u = gen::random_dirichlet(g, rng);
  const oracle::Vec b = oracle::to_vec(q.values).cwiseProduct(oracle::to_vec(u.values));
  const double ref = oracle::lp(oracle::weights(*g), b, 3.0);
  const auto d = lambda_diagnostic(p, u);
  CHECK(std::abs(d.qu_l3 - ref) <= 1e-13 * ref);
  CHECK(d.member);
}

TEST_CASE("phi_of with zero flux density vanishes") {
  const auto g = oracle::cube(5);
  const auto p = unit_problem(g, 1.0, 0.0);
  const auto d = phi_of(p, bump(g));
  for (const auto* f : {&d.eta, &d.xi, &d.phi})
    for (double v : f->values) CHECK(v == 0.0);
}

TEST_CASE("phi_of: sign and flux identity for unit data") {
  const auto g = oracle::cube(9);
  const auto p = unit_problem(g);
  const auto u = bump(g);
  const auto d = phi_of(p, u);
  CHECK(d.min_a_eta >= -1e-10);
  CHECK(d.flux_integral == doctest::Approx(6.0).epsilon(1e-10));
  CHECK(d.all_ok());
  CHECK(d.xi_inf <= d.chi_inf * (1 + 1e-8));
}

TEST_CASE("phi_of and J match the dense pipeline oracle") {
  const auto g = oracle::cube(5);
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    auto q = gen::random_nodal(g, rng, Space::Neumann);
    const auto p = ReducedProblem::assemble(0.5 + trial * 0.3, q, gen::random_boundary(g, rng));
    const auto u = gen::random_dirichlet(g, rng);
    const auto d = phi_of(p, u);
    const auto ref = dense_pipeline(p, u);
    CHECK(inf_diff(p.chi().chi, ref.chi) <= 1e-9 * std::max(1.0, ref.chi.lpNorm<Eigen::Infinity>()));
    CHECK(inf_diff(d.eta, ref.eta) <= 1e-9 * std::max(1.0, ref.eta.lpNorm<Eigen::Infinity>()));
    CHECK(inf_diff(d.xi, ref.xi) <= 1e-9 * std::max(1.0, ref.xi.lpNorm<Eigen::Infinity>()));
    const auto J = evaluate_J(p, u);
    CHECK(std::abs(J.value - ref.J) <= 1e-9 * std::max(1.0, std::abs(ref.J)));
  }
}

TEST_CASE("superposition: phi_of equals one screened solve with the full density") {
  const auto g = oracle::cube(7);
  std::mt19937_64 rng(19);
  const auto p = ReducedProblem::assemble(1.0, gen::gaussian_bump(g, {0.5, 0.5, 0.5}, 0.3, 2.0),
                                          gen::random_boundary(g, rng));
  for (int trial = 0; trial < 5; ++trial) {
    const auto u = gen::random_dirichlet(g, rng);
    const auto d = phi_of(p, u);
    const auto direct = solve_phi(p, u);
    double e = 0.0, s = 0.0;
    for (std::size_t i = 0; i < g->size(); ++i) {
      e = std::max(e, std::abs(d.phi[i] - direct[i]));
      s = std::max(s, std::abs(direct[i]));
    }
    CHECK(e <= 1e-10 * std::max(1.0, s));
  }
}

TEST_CASE("J with zero flux density is the Klein-Gordon energy") {
  const auto g = oracle::cube(7);
  std::mt19937_64 rng(23);
  const double m = 1.7;
  const auto p = unit_problem(g, m, 0.0);
  const auto u = gen::random_dirichlet(g, rng);
  const double l2 = norm(u, NormKind::L2);
  const double expected = gradient_energy(u) + m * m * l2 * l2;
  const auto J = evaluate_J(p, u);
  CHECK(J.value == doctest::Approx(expected).epsilon(1e-13));
  CHECK(J.value_direct == doctest::Approx(expected).epsilon(1e-13));
}

TEST_CASE("direct and decomposed J agree") {
  const auto g = oracle::cube(9);
  std::mt19937_64 rng(29);
  const auto p = ReducedProblem::assemble(1.0, gen::gaussian_bump(g, {0.4, 0.5, 0.6}, 0.3, 1.5),
                                          gen::random_boundary(g, rng));
  for (int trial = 0; trial < 10; ++trial) {
    const auto J = evaluate_J(p, gen::random_dirichlet(g, rng));
    CHECK(std::abs(J.value_direct - J.value_decomposed) <= 1e-9 * std::max(1.0, std::abs(J.value_direct)));
    CHECK(std::abs(J.value - J.value_direct) <= 1e-9 * std::max(1.0, std::abs(J.value)));
  }
}

TEST_CASE("J is even under sign flip and under |u| for one-signed fields") {
  const auto g = oracle::cube(9);
  std::mt19937_64 rng(31);
  const auto p = unit_problem(g);
  for (int trial = 0; trial < 10; ++trial) {
    const auto u = gen::random_dirichlet(g, rng);
    const double a = J_value(p, u), b = J_value(p, -u);
    CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
  }
  auto u = bump(g);
  for (double& v : u.values) v *= v;  // nonnegative, not a single mode
  const double a = J_value(p, u), b = J_value(p, -u);
  ScalarField abs_neg = -u;
  for (double& v : abs_neg.values) v = std::abs(v);
  CHECK(std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(a)));
  CHECK(std::abs(a - J_value(p, abs_neg)) <= 1e-12 * std::max(1.0, std::abs(a)));
}

TEST_CASE("J(u) - J(|u|) on sign-changing fields is exactly the nodal gradient defect") {
  const auto g = oracle::cube(9);
  std::mt19937_64 rng(37);
  const auto p = unit_problem(g);
  for (int trial = 0; trial < 10; ++trial) {
    const auto u = gen::random_dirichlet(g, rng);
    ScalarField a = u;
    for (double& v : a.values) v = std::abs(v);
    const double defect = gradient_energy(u) - gradient_energy(a);
    const double diff = J_value(p, u) - J_value(p, a);
    CHECK(std::abs(diff - defect) <= 1e-12 * std::max(1.0, std::abs(J_value(p, u))));
  }
}

TEST_CASE("gradient: zero data and zero mass gives 2u") {
  const auto g = oracle::cube(7);
  std::mt19937_64 rng(41);
  const auto p = unit_problem(g, 0.0, 0.0);
  const auto u = gen::random_dirichlet(g, rng);
  const auto gr = gradient_J(p, u);
  for (std::size_t i = 0; i < g->size(); ++i) CHECK(gr.riesz[i] == doctest::Approx(2.0 * u[i]).epsilon(1e-9).scale(1.0));
}

TEST_CASE("gradient Riesz map matches the dense Dirichlet oracle") {
  const auto g = oracle::cube(5);
  std::mt19937_64 rng(43);
  const auto p = unit_problem(g);
  const auto u = gen::random_dirichlet(g, rng);
  const auto gr = gradient_J(p, u);
  const oracle::Vec ref = oracle::riesz_dirichlet(*g, oracle::to_vec(gr.dual));
  CHECK(inf_diff(gr.riesz, ref) <= 1e-10 * std::max(1.0, ref.lpNorm<Eigen::Infinity>()));
}

TEST_CASE("gradient is odd") {
  const auto g = oracle::cube(9);
  std::mt19937_64 rng(47);
  const auto p = unit_problem(g);
  for (int trial = 0; trial < 5; ++trial) {
    const auto u = gen::random_dirichlet(g, rng);
    const auto a = gradient_J(p, u), b = gradient_J(p, -u);
    for (std::size_t i = 0; i < g->size(); ++i)
      CHECK(std::abs(a.riesz[i] + b.riesz[i]) <= 1e-12 * std::max(1.0, a.norm));
  }
}

TEST_CASE("gradient matches central finite differences") {
  const auto g = oracle::cube(9);
  std::mt19937_64 rng(53);
  const auto p = ReducedProblem::assemble(1.0, gen::gaussian_bump(g, {0.5, 0.5, 0.5}, 0.3, 1.0),
                                          gen::boundary_constant(g, 1.0));
  const auto K = oracle::stiffness(*g);
  for (int probe = 0; probe < 3; ++probe) {
    const auto u = gen::random_dirichlet(g, rng);
    const auto gr = gradient_J(p, u);
    for (int dir = 0; dir < 10; ++dir) {
      const auto v = gen::random_dirichlet(g, rng);
      const double h = 1e-5;
      const double fd = (J_value(p, u + h * v) - J_value(p, u - h * v)) / (2 * h);
      const double exact = oracle::to_vec(gr.riesz.values).dot(K * oracle::to_vec(v.values));
      CHECK(std::abs(fd - exact) <= 1e-5 * std::max(1.0, std::abs(exact)));
    }
  }
}

TEST_CASE("Hessian action matches differences of the gradient") {
  const auto g = oracle::cube(7);
  std::mt19937_64 rng(59);
  const auto p = unit_problem(g);
  const auto u = gen::random_dirichlet(g, rng);
  const auto phi = solve_phi(p, u);
  const auto v = gen::random_dirichlet(g, rng);
  const auto Hv = hessian_dual_apply(p, u, phi, v);
  const double h = 1e-5;
  const auto gp = gradient_J(p, u + h * v), gm = gradient_J(p, u - h * v);
  double err = 0.0, scale = 0.0;
  for (std::size_t i : g->interior_nodes()) {
    const double fd = (gp.dual[i] - gm.dual[i]) / (2 * h);
    err = std::max(err, std::abs(fd - Hv[i]));
    scale = std::max(scale, std::abs(Hv[i]));
  }
  CHECK(err <= 1e-5 * scale);
}

TEST_CASE("constants: verification sweeps and a closed-form kappa sample") {
  const auto g = oracle::cube(9);
  std::vector<BoundaryField> samples{gen::face_indicator(g, 1), gen::boundary_constant(g, 1.0)};
  ConstantsOptions o;
  const auto k = estimate_constants(g, samples, o);
  CHECK(k.sigma > 0.0);
  CHECK(k.gamma > 0.0);
  CHECK(k.kappa > 0.0);
  CHECK(k.delta == doctest::Approx(1.0 / (k.kappa * k.sigma)));

  std::mt19937_64 rng(61);
  for (int trial = 0; trial < 1000; ++trial) {
    const auto u = gen::random_dirichlet(g, rng, 0.5);
    CHECK(norm(u, NormKind::L3) <= k.sigma * norm(u, NormKind::H10) * (1 + 1e-12));
  }
  ScalarField f(g, Space::Neumann);
  for (std::size_t i = 0; i < g->size(); ++i) f[i] = std::cos(M_PI * g->position(i)[0]);
  const auto centered = f - gen::constant(g, mean(f));
  CHECK(k.gamma >= lp_norm(centered, 3.0) / std::sqrt(gradient_energy(f)));

  const auto chi = solve_chi(samples[0]);
  CHECK(chi.chi_inf == doctest::Approx(1.0 / 3.0).epsilon(1e-2));
  for (std::size_t s = 0; s < samples.size(); ++s)
    CHECK(solve_chi(samples[s]).chi_inf <= k.kappa * h_half_norm(samples[s]) * (1 + 1e-12));
}

TEST_CASE("constants reject degenerate samples") {
  const auto g = oracle::cube(5);
  CHECK_THROWS_AS(estimate_constants(g, {gen::boundary_constant(g, 0.0)}), Error);
}

TEST_CASE("decomposition bounds on random probes") {
  const auto g = oracle::cube(9);
  std::mt19937_64 rng(67);
  const auto alpha = gen::boundary_constant(g, 0.3);
  const auto p = ReducedProblem::assemble(1.0, gen::gaussian_bump(g, {0.5, 0.5, 0.5}, 0.35, 1.0), alpha);
  const auto k = estimate_constants(g, {alpha});
  for (int trial = 0; trial < 10; ++trial) {
    const auto u = gen::random_dirichlet(g, rng);
    const auto d = phi_of(p, u);
    const double qu3 = lambda_diagnostic(p, u).qu_l3;
    CHECK(std::sqrt(gradient_energy(d.eta)) <= grad_eta_bound(k.gamma, qu3, d.eta_mean) * (1 + 1e-6));
    CHECK(std::abs(d.eta_mean) >= eta_mean_lower_bound(p.flux(), k.gamma, qu3, g->volume()) * (1 - 1e-6));
    CHECK(d.all_ok());
  }
}

TEST_CASE("lower and upper bounds bracket J below the smallness threshold") {
  const auto g = oracle::cube(9);
  std::mt19937_64 rng(71);
  const auto alpha = gen::boundary_constant(g, 0.05);
  const auto p = ReducedProblem::assemble(1.0, gen::constant(g, 1.0), alpha);
  const auto k = estimate_constants(g, {alpha, gen::face_indicator(g, 0)});
  REQUIRE(p.smallness() < k.delta);
  for (int trial = 0; trial < 10; ++trial) {
    const auto J = evaluate_J(p, gen::random_dirichlet(g, rng), &k);
    REQUIRE(J.lower_bound.has_value());
    CHECK(J.value >= *J.lower_bound);
    REQUIRE(J.upper_bound.has_value());
    CHECK(J.value <= *J.upper_bound);
  }
}

TEST_CASE("J blows up towards the boundary of the admissible set") {
  const auto g = oracle::cube(9);
  const auto p = unit_problem(g);
  const auto u = bump(g);
  std::vector<double> J;
  for (double t : {1.0, 1e-1, 1e-2, 1e-3, 1e-4}) J.push_back(J_value(p, t * u));
  CHECK(J[2] < J[3]);
  CHECK(J[3] < J[4]);
}

TEST_CASE("full residual: zero pair and the constraint equation") {
  const auto g = oracle::cube(7);
  const auto p0 = unit_problem(g, 1.0, 0.0);
  const auto r0 = full_residual(p0, ScalarField(g, Space::Dirichlet), ScalarField(g, Space::Neumann));
  CHECK(r0.worst_l2() == 0.0);

  const auto p = unit_problem(g);
  std::mt19937_64 rng(73);
  const auto u = gen::random_dirichlet(g, rng);
  const auto r = full_residual(p, u, solve_phi(p, u));
  CHECK(r.phi_equation_max <= 1e-8);
  CHECK(r.phi_boundary_max <= 1e-8);
  CHECK(r.original_phi_equation_l2 <= 1e-8);
  CHECK(r.u_boundary_max == 0.0);
}
