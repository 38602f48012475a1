#include "kgm/kgm.h"

#include <algorithm>
#include <exception>
#include <new>
#include <string>

#include "kgm/config.hpp"
#include "kgm/error.hpp"
#include "kgm/harness.hpp"
#include "kgm/optimize.hpp"

struct kgm_grid {
  kgm::GridPtr grid;
};

struct kgm_problem {
  kgm::ReducedProblem problem;
};

struct kgm_config {
  kgm::RunConfig config;
};

struct kgm_report {
  kgm::RunReport report;
  std::string text;
};

namespace {

thread_local std::string last_error;

kgm_status to_status(kgm::ErrorCode code) {
  switch (code) {
    case kgm::ErrorCode::InvalidArgument: return KGM_ERR_INVALID_ARGUMENT;
    case kgm::ErrorCode::SpaceMismatch: return KGM_ERR_SPACE_MISMATCH;
    case kgm::ErrorCode::LambdaViolation: return KGM_ERR_LAMBDA_VIOLATION;
    case kgm::ErrorCode::NotConverged: return KGM_ERR_NOT_CONVERGED;
    case kgm::ErrorCode::Io: return KGM_ERR_IO;
    case kgm::ErrorCode::Config: return KGM_ERR_CONFIG;
  }
  return KGM_ERR_INTERNAL;
}

template <class F>
kgm_status guarded(F&& f) {
  try {
    f();
    last_error.clear();
    return KGM_OK;
  } catch (const kgm::Error& e) {
    last_error = e.what();
    return to_status(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return KGM_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return KGM_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return KGM_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) throw kgm::Error(kgm::ErrorCode::InvalidArgument, what);
}

kgm::ScalarField dirichlet_field(const kgm::ReducedProblem& p, const double* u) {
  return kgm::ScalarField(p.grid(), kgm::Space::Dirichlet, std::vector<double>(u, u + p.grid()->size()));
}

}  // namespace

extern "C" {

const char* kgm_api_version(void) { return "1.0.0"; }

const char* kgm_status_string(kgm_status status) {
  switch (status) {
    case KGM_OK: return "ok";
    case KGM_ERR_INVALID_ARGUMENT: return "invalid argument";
    case KGM_ERR_SPACE_MISMATCH: return "space mismatch";
    case KGM_ERR_LAMBDA_VIOLATION: return "field outside the admissible set";
    case KGM_ERR_NOT_CONVERGED: return "solver did not converge";
    case KGM_ERR_IO: return "i/o error";
    case KGM_ERR_CONFIG: return "configuration error";
    case KGM_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* kgm_last_error(void) { return last_error.c_str(); }

kgm_status kgm_grid_create(int dim, const double* extent, const int* n, kgm_grid** out) {
  return guarded([&] {
    require(extent && n && out, "kgm_grid_create: null argument");
    *out = nullptr;
    auto g = kgm::Grid::build(dim, std::span<const double>(extent, std::max(dim, 0)),
                              std::span<const int>(n, std::max(dim, 0)));
    *out = new kgm_grid{std::move(g)};
  });
}

void kgm_grid_destroy(kgm_grid* grid) { delete grid; }

kgm_status kgm_grid_node_count(const kgm_grid* grid, size_t* out) {
  return guarded([&] {
    require(grid && out, "kgm_grid_node_count: null argument");
    *out = grid->grid->size();
  });
}

kgm_status kgm_grid_slot_count(const kgm_grid* grid, size_t* out) {
  return guarded([&] {
    require(grid && out, "kgm_grid_slot_count: null argument");
    *out = grid->grid->slots().size();
  });
}

kgm_status kgm_grid_positions(const kgm_grid* grid, double* xyz) {
  return guarded([&] {
    require(grid && xyz, "kgm_grid_positions: null argument");
    for (std::size_t i = 0; i < grid->grid->size(); ++i) {
      const auto x = grid->grid->position(i);
      std::copy(x.begin(), x.end(), xyz + 3 * i);
    }
  });
}

kgm_status kgm_grid_integrate(const kgm_grid* grid, const double* values, double* out) {
  return guarded([&] {
    require(grid && values && out, "kgm_grid_integrate: null argument");
    const kgm::ScalarField f(grid->grid, kgm::Space::Neumann,
                             std::vector<double>(values, values + grid->grid->size()));
    *out = kgm::integrate(f);
  });
}

kgm_status kgm_problem_create(const kgm_grid* grid, double m, const double* q, const double* alpha,
                              kgm_problem** out) {
  return guarded([&] {
    require(grid && q && alpha && out, "kgm_problem_create: null argument");
    *out = nullptr;
    const auto& g = grid->grid;
    kgm::ScalarField qf(g, kgm::Space::Neumann, std::vector<double>(q, q + g->size()));
    kgm::BoundaryField af(g, std::vector<double>(alpha, alpha + g->slots().size()));
    *out = new kgm_problem{kgm::ReducedProblem::assemble(m, std::move(qf), std::move(af))};
  });
}

void kgm_problem_destroy(kgm_problem* problem) { delete problem; }

kgm_status kgm_problem_flux(const kgm_problem* problem, double* out) {
  return guarded([&] {
    require(problem && out, "kgm_problem_flux: null argument");
    *out = problem->problem.flux();
  });
}

kgm_status kgm_problem_chi(const kgm_problem* problem, double* chi) {
  return guarded([&] {
    require(problem && chi, "kgm_problem_chi: null argument");
    const auto& v = problem->problem.chi().chi.values;
    std::copy(v.begin(), v.end(), chi);
  });
}

kgm_status kgm_evaluate_J(const kgm_problem* problem, const double* u, kgm_j_report* out) {
  return guarded([&] {
    require(problem && u && out, "kgm_evaluate_J: null argument");
    const auto r = kgm::evaluate_J(problem->problem, dirichlet_field(problem->problem, u));
    *out = {r.value, r.value_direct, r.value_decomposed, r.qu_l3, r.eta_mean, r.xi_mean};
  });
}

kgm_status kgm_gradient(const kgm_problem* problem, const double* u, double* gradient, double* norm) {
  return guarded([&] {
    require(problem && u && gradient, "kgm_gradient: null argument");
    const auto& p = problem->problem;
    const auto uf = dirichlet_field(p, u);
    kgm::require_admissible(p, uf);
    const auto g = kgm::gradient_J(p, uf);
    std::copy(g.riesz.values.begin(), g.riesz.values.end(), gradient);
    if (norm) *norm = g.norm;
  });
}

kgm_status kgm_phi(const kgm_problem* problem, const double* u, double* phi) {
  return guarded([&] {
    require(problem && u && phi, "kgm_phi: null argument");
    const auto f = kgm::solve_phi(problem->problem, dirichlet_field(problem->problem, u));
    std::copy(f.values.begin(), f.values.end(), phi);
  });
}

void kgm_minimize_options_default(kgm_minimize_options* opts) {
  if (!opts) return;
  const kgm::MinimizeOptions d;
  opts->tol_grad = d.tol_grad;
  opts->max_iter = d.max_iter;
  opts->nonnegative = d.nonnegative ? 1 : 0;
}

kgm_status kgm_minimize(const kgm_problem* problem, const double* u_init, const kgm_minimize_options* options,
                        double* u_out, kgm_solve_summary* out) {
  return guarded([&] {
    require(problem && u_init, "kgm_minimize: null argument");
    kgm::MinimizeOptions o;
    if (options) {
      o.tol_grad = options->tol_grad;
      o.max_iter = options->max_iter;
      o.nonnegative = options->nonnegative != 0;
    }
    const auto r = kgm::minimize(problem->problem, dirichlet_field(problem->problem, u_init), o);
    if (u_out) std::copy(r.u.values.begin(), r.u.values.end(), u_out);
    if (out) *out = {r.J_value, r.grad_norm, r.iterations, r.converged ? 1 : 0};
  });
}

kgm_status kgm_config_create(kgm_config** out) {
  return guarded([&] {
    require(out, "kgm_config_create: null argument");
    *out = new kgm_config{};
  });
}

kgm_status kgm_config_load(const char* path, kgm_config** out) {
  return guarded([&] {
    require(path && out, "kgm_config_load: null argument");
    *out = nullptr;
    *out = new kgm_config{kgm::load_config(path)};
  });
}

kgm_status kgm_config_parse(const char* text, kgm_config** out) {
  return guarded([&] {
    require(text && out, "kgm_config_parse: null argument");
    *out = nullptr;
    *out = new kgm_config{kgm::parse_config_text(text)};
  });
}

kgm_status kgm_config_set(kgm_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config && key && value, "kgm_config_set: null argument");
    kgm::RunConfig updated = config->config;
    updated.set(key, value);
    updated.validate();
    config->config = std::move(updated);
  });
}

void kgm_config_destroy(kgm_config* config) { delete config; }

kgm_status kgm_run(const kgm_config* config, const char* command, const char* out_dir, kgm_report** out) {
  return guarded([&] {
    require(config && command && out, "kgm_run: null argument");
    *out = nullptr;
    auto* r = new kgm_report{};
    try {
      r->report = kgm::run_command(config->config, command, out_dir ? out_dir : "");
      r->text = r->report.text();
    } catch (...) {
      delete r;
      throw;
    }
    *out = r;
  });
}

const char* kgm_report_text(const kgm_report* report) { return report ? report->text.c_str() : ""; }

int kgm_report_passed(const kgm_report* report) { return report && report->report.passed() ? 1 : 0; }

size_t kgm_report_check_count(const kgm_report* report) { return report ? report->report.checks.size() : 0; }

kgm_status kgm_report_check(const kgm_report* report, size_t index, kgm_check* out) {
  return guarded([&] {
    require(report && out, "kgm_report_check: null argument");
    require(index < report->report.checks.size(), "kgm_report_check: index out of range");
    const auto& c = report->report.checks[index];
    *out = {c.name.c_str(), c.passed ? 1 : 0, c.asserted ? 1 : 0, c.measured, c.threshold};
  });
}

void kgm_report_destroy(kgm_report* report) { delete report; }

}  // extern "C"
