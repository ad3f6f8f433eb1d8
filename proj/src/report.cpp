#include "korn/report.hpp"

#include <cstdio>
#include <fstream>

#include "korn/io.hpp"

namespace korn {

Json config_json(const PipelineConfig& cfg) {
  Json j;
  j["theta"] = cfg.theta;
  j["p"] = cfg.p;
  j["p_prime"] = cfg.p_prime();
  j["r"] = cfg.r();
  j["lambda"] = cfg.lambda();
  j["q_kp"] = cfg.q_kp;
  j["energy_exponent"] = cfg.energy_exponent;
  j["epsilon_rel"] = cfg.epsilon_rel;
  j["max_iters"] = cfg.max_iters;
  j["rho"] = cfg.rho;
  j["seed"] = cfg.seed;
  j["linf_guard"] = cfg.linf_guard;
  j["john_rho_target"] = cfg.john_rho_target;
  return j;
}

Json ledger_json(const ConstantLedger& led) {
  Json j = Json::object();
  for (const auto& [id, e] : led.entries) {
    Json ej;
    ej["lhs"] = e.lhs;
    ej["rhs_core"] = e.rhs_core;
    ej["constant"] = e.constant;
    ej["max"] = e.max_c;
    ej["p95"] = e.p95_c;
    ej["samples"] = e.samples;
    j[id] = ej;
  }
  return j;
}

Json decomposition_json(const PiecewiseDecomposition& d, const PipelineConfig& cfg, const RegularizeResult* reg) {
  Json j;
  j["schema"] = "korn2d-report-v1";
  j["kind"] = "decompose";
  j["config"] = config_json(cfg);
  j["grid"] = Json{{"n", d.grid.n}, {"mu", d.grid.mu}, {"h", d.grid.h()}};
  j["jump_length"] = d.jump_length;
  j["pieces"] = int(d.pieces.size());
  j["main_pieces"] = d.main_piece_count;
  j["merged_pieces"] = d.merged_pieces;
  j["iterations"] = d.iterations;
  j["epsilon"] = d.epsilon;
  j["truncated_generations"] = d.truncated_generations;
  j["window"] = Json{{"valid", d.window.valid},
                     {"j0", d.window.j0},
                     {"i_min", d.window.i_min},
                     {"I", d.window.I},
                     {"I_fill", d.window.I_fill}};
  j["boundary_length"] = d.boundary_length;
  j["boundary_ratio"] = d.boundary_ratio;
  j["v_linf"] = d.v_linf;
  j["grad_v_lp"] = d.grad_v_lp;
  j["grad_v_lp_prime"] = d.grad_v_lp_prime;
  j["e_u_l2"] = d.e_u_l2;
  j["korn_ratio"] = d.korn_ratio;
  j["exceptional_area"] = d.exceptional_area;
  j["rest_area"] = d.rest_area;
  j["e_area_history"] = d.e_area_history;
  j["poincare_rho"] = d.poincare_rho;
  j["poincare_M"] = d.poincare_M;
  Json motions = Json::array();
  for (const auto& pc : d.pieces) {
    if (pc.cells == 0) continue;
    Json m;
    m["omega"] = pc.motion.omega;
    m["b"] = Json::array({pc.motion.b.x, pc.motion.b.y});
    m["cells"] = pc.cells;
    m["area"] = pc.area;
    m["is_z"] = pc.is_z;
    m["absorbed"] = pc.absorbed;
    motions.push_back(m);
  }
  j["motions"] = motions;
  {
    ConstantLedger led;
    if (d.e_u_l2 > 1e-12) {
      led.record("korn_gradient_ratio_p", d.grad_v_lp, d.e_u_l2);
      led.record("korn_gradient_ratio_p_prime", d.grad_v_lp_prime, d.e_u_l2);
    }
    led.record("partition_boundary_vs_jump", d.boundary_length, d.jump_length + 8.0 * d.grid.mu);
    if (d.jump_length > 0) led.record("exceptional_area_vs_jump", d.exceptional_area, d.grid.mu * d.jump_length);
    led.finalize();
    j["ledger"] = ledger_json(led);
  }
  if (reg) {
    Json r;
    r["violated"] = reg->violated;
    r["stages"] = int(reg->stages.size());
    r["boundary_ledger"] = reg->boundary_ledger;
    r["ledger_ratio"] = reg->ledger_ratio;
    r["post_density_worst"] = reg->post_density_worst;
    r["post_density_violations"] = reg->post_density_violations;
    j["regularization"] = r;
  }
  return j;
}

Json coarea_json(const CoareaPartition& cp, double rho) {
  Json j;
  j["schema"] = "korn2d-report-v1";
  j["kind"] = "poincare";
  j["grid"] = Json{{"n", cp.grid.n}, {"mu", cp.grid.mu}};
  j["rho"] = rho;
  j["pieces"] = cp.piece_count;
  j["v_linf"] = cp.v_linf;
  j["single_piece"] = cp.single_piece;
  j["budget_ok"] = cp.budget_ok;
  j["v_bound_ok"] = cp.v_bound_ok;
  Json comps = Json::array();
  for (const auto& c : cp.comps) {
    Json cj;
    cj["M"] = c.M;
    cj["tv"] = c.tv;
    cj["added_perimeter"] = c.added_perimeter;
    cj["levels"] = int(c.levels.size());
    comps.push_back(cj);
  }
  j["components"] = comps;
  return j;
}

Json truncation_json(const TruncationResult& tr, double q) {
  Json j;
  j["schema"] = "korn2d-report-v1";
  j["kind"] = "kornpoincare";
  j["q"] = q;
  j["jump_length"] = tr.jump_length;
  j["M"] = tr.M;
  j["degenerate"] = tr.degenerate;
  j["motion"] = Json{{"omega", tr.motion.omega}, {"b", Json::array({tr.motion.b.x, tr.motion.b.y})}};
  j["levels"] = tr.levels;
  j["e_area"] = tr.e_area;
  j["e_perimeter"] = tr.e_perimeter;
  j["u_minus_a_lq"] = tr.u_minus_a_lq;
  j["u_minus_a_linf"] = tr.u_minus_a_linf;
  j["e_u_l2"] = tr.e_u_l2;
  j["truncation_identity_ok"] = tr.truncation_identity_ok;
  return j;
}

Json suite_json(const SuiteResult& sr, const SuiteConfig& cfg) {
  Json j;
  j["schema"] = "korn2d-report-v1";
  j["kind"] = "verify";
  j["n"] = cfg.n;
  j["mu"] = cfg.mu;
  j["seed"] = cfg.seed;
  j["pass"] = sr.pass;
  j["fixtures_run"] = sr.fixtures_run;
  j["failures"] = sr.failures;
  j["alarms"] = sr.alarms;
  j["config"] = config_json(cfg.pipeline);
  j["ledger"] = ledger_json(sr.ledger);
  return j;
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream f(path);
  if (!f) throw io_error("cannot open for writing: " + path);
  f << j.dump(2) << "\n";
}

}  // namespace korn
