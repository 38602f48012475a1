#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "kgm/config.hpp"
#include "kgm/error.hpp"
#include "kgm/harness.hpp"

using namespace kgm;

namespace {

RunConfig small(const std::string& extra = "") {
  return parse_config_text("grid.n = 7,7,7\ninvariants.n_probe = 8\nconstants.restarts = 4\n" + extra);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("config: parsing, comments and overrides") {
  const auto c = parse_config_text("# comment\ngrid.n = 5, 5, 5  # trailing\nproblem.m = 2.5\nrun.seed = 42\n");
  CHECK(c.effective_grid().n == std::array<int, 3>{5, 5, 5});
  CHECK(c.m == 2.5);
  CHECK(c.seed == 42u);
}

TEST_CASE("config: unknown keys and malformed lines are errors") {
  auto code_of = [](const std::string& text) {
    try {
      parse_config_text(text);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::InvalidArgument;
  };
  CHECK(code_of("grid.bogus = 1\n") == ErrorCode::Config);
  CHECK(code_of("grid.n\n") == ErrorCode::Config);
  CHECK(code_of("solver.tol_lin = -1\n") == ErrorCode::Config);
  CHECK(code_of("solver.tol_grad = abc\n") == ErrorCode::Config);
  CHECK_THROWS_AS(load_config("/nonexistent/kgm.cfg"), Error);
}

TEST_CASE("config: profiles") {
  auto c = parse_config_text("run.profile = fidelity\n");
  CHECK(c.effective_grid().n == std::array<int, 3>{17, 17, 17});
  c = parse_config_text("run.profile = fast\n");
  CHECK(c.effective_grid().n == std::array<int, 3>{9, 9, 9});
  CHECK_THROWS_AS(parse_config_text("run.profile = slow\n"), Error);
}

TEST_CASE("config: seed and tolerances are echoed") {
  const auto c = parse_config_text("run.seed = 99\n");
  const auto echo = c.echo();
  bool seed = false, tol = false;
  for (const auto& [k, v] : echo) {
    if (k == "run.seed" && v == "99") seed = true;
    if (k == "solver.tol_lin") tol = true;
  }
  CHECK(seed);
  CHECK(tol);
}

TEST_CASE("a zero coupling scale is rejected") {
  const auto c = small();
  const auto g = build_grid(c);
  CHECK_THROWS_AS(build_problem(c, g, 0.0), Error);
}

TEST_CASE("invariant suite passes on defaults and lists every check once") {
  const auto rep = run_invariants(small());
  CHECK(rep.passed());
  std::set<std::string> names;
  for (const auto& ch : rep.checks) CHECK(names.insert(ch.name).second);
  for (const char* name : {"phi.eta_sign", "phi.xi_bound", "phi.flux_identity", "phi.grad_eta_bound",
                           "phi.eta_mean_lower_bound", "phi.superposition", "J.direct_vs_decomposed",
                           "J.even_sign_flip", "J.gradient_fd", "J.blowup_near_boundary", "screened.max_principle",
                           "J.lower_bound"})
    CHECK(rep.find(name) != nullptr);
  const std::string text = rep.text();
  CHECK(text.find("result PASS") != std::string::npos);
  CHECK(text.find("config run.seed") != std::string::npos);
}

TEST_CASE("invariant suite with zero flux density skips the eta checks") {
  const auto rep = run_invariants(small("alpha.kind = zero\n"));
  CHECK(rep.passed());
  for (const char* name : {"phi.eta_sign", "phi.flux_identity", "phi.grad_eta_bound", "phi.eta_mean_lower_bound"}) {
    const Check* c = rep.find(name);
    REQUIRE(c != nullptr);
    CHECK(c->note.find("A = 0") != std::string::npos);
  }
}

TEST_CASE("negative control: a loose linear tolerance fails the flux identity") {
  const auto rep = run_invariants(small("solver.tol_lin = 1e-1\n"));
  CHECK_FALSE(rep.passed());
  const Check* c = rep.find("phi.flux_identity");
  REQUIRE(c != nullptr);
  CHECK_FALSE(c->passed);
}

TEST_CASE("sweep: row count, small-product rows and byte-identical CSV") {
  auto c = small("sweep.count = 4\nsweep.t_min = 0.25\nsweep.t_max = 8\n");
  const auto rows = sweep_rows(c);
  CHECK(rows.size() == 4u);
  for (const auto& r : rows)
    if (r.below_delta) {
      CHECK(r.converged);
      CHECK(r.grad_u_l2 > 1e-3);
    }
  const auto dir = std::filesystem::temp_directory_path() / "kgm_sweep_test";
  std::filesystem::remove_all(dir);
  const auto a = sweep_delta(c, (dir / "a").string());
  const auto b = sweep_delta(c, (dir / "b").string());
  const std::string ca = slurp(dir / "a" / "sweep_delta.csv");
  CHECK(ca.rfind("# kgm-sweep-delta v1", 0) == 0);
  CHECK(ca == slurp(dir / "b" / "sweep_delta.csv"));
  CHECK(std::count(ca.begin(), ca.end(), '\n') == 3 + 4);
  std::filesystem::remove_all(dir);
}

TEST_CASE("nonexistence: zero flux decays; a large product is outside the hypothesis") {
  auto rep = run_nonexistence(small("alpha.kind = dipole\nalpha.value = 0.2\nq.value = 0.2\nnonexistence.seeds = 3\n"));
  CHECK(rep.passed());
  const Check* flux = rep.find("nonexistence.flux_zero");
  REQUIRE(flux != nullptr);
  CHECK(flux->measured <= 1e-13);

  rep = run_nonexistence(small("alpha.kind = dipole\nalpha.value = 20\nq.value = 5\nnonexistence.seeds = 2\n"));
  bool gated = false;
  for (const auto& n : rep.notes) gated |= n.find("outside theorem hypothesis") != std::string::npos;
  CHECK(gated);
  for (const auto& ch : rep.checks)
    if (ch.name != "nonexistence.flux_zero") CHECK_FALSE(ch.asserted);
}

TEST_CASE("solve writes field dumps and a report") {
  const auto dir = std::filesystem::temp_directory_path() / "kgm_solve_test";
  std::filesystem::remove_all(dir);
  const auto rep = run_command(small("solve.seeds = 2\n"), "solve", dir.string());
  CHECK(rep.passed());
  for (const char* f : {"report.txt", "u.field", "phi.field", "phi_original.field"})
    CHECK(std::filesystem::exists(dir / f));
  std::filesystem::remove_all(dir);
}

TEST_CASE("residual command checks a supplied pair") {
  const auto dir = std::filesystem::temp_directory_path() / "kgm_residual_test";
  std::filesystem::remove_all(dir);
  auto c = small("solve.seeds = 1\nsolver.tol_grad = 1e-9\n");
  REQUIRE(run_command(c, "solve", dir.string()).passed());
  c.set("residual.u_file", (dir / "u.field").string());
  c.set("residual.phi_file", (dir / "phi.field").string());
  const auto rep = run_residual(c);
  CHECK(rep.passed());
  std::filesystem::remove_all(dir);
}

TEST_CASE("unknown command is rejected") {
  CHECK_THROWS_AS(run_command(small(), "frobnicate", ""), Error);
}
