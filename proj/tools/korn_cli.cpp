// korn: batch front-end for the piecewise Korn decomposition pipelines.
//
// Subcommands: decompose | poincare | kornpoincare | verify | sample
// Exit codes: 0 ok, 2 input/parse failure, 3 config inconsistency,
//             4 pipeline diagnostic.

#include <CLI11.hpp>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>

#include "korn/io.hpp"
#include "korn/partition.hpp"
#include "korn/report.hpp"
#include "korn/svg.hpp"

using namespace korn;

namespace {

int log_level() {
  const char* e = std::getenv("KORN_LOG");
  return e ? std::atoi(e) : 0;
}

void logf(int lvl, const char* fmt, ...) {
  if (log_level() < lvl) return;
  va_list ap;
  va_start(ap, fmt);
  std::vfprintf(stderr, fmt, ap);
  std::fprintf(stderr, "\n");
  va_end(ap);
}

bool valid_theta(double t) { return t == 0.5 || t == 0.25 || t == 0.125 || t == 0.0625; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"korn2d: piecewise Korn decompositions of planar displacement fields"};
  app.require_subcommand(1);

  std::string input, out_path, svg_path, fixture = "ramp", corpus = "default";
  double theta = 0.25, p = 1.5, q = 4.0, rho = 2.0, epsilon = 1e-3;
  int max_iters = 12, n = 128, kpieces = 3;
  unsigned long long seed = 0;
  bool linf_guard = false;
  double mu = 1.0;

  auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--theta", theta, "dyadic scale ratio (1/2, 1/4, 1/8, 1/16)");
    cmd->add_option("--p", p, "gradient exponent, 1 <= p < 2");
    cmd->add_option("--q", q, "Korn-Poincare exponent");
    cmd->add_option("--epsilon", epsilon, "relative exceptional-area target");
    cmd->add_option("--max-iters", max_iters, "iteration cap");
    cmd->add_option("--seed", seed, "rng seed");
    cmd->add_flag("--linf-guard", linf_guard, "clamp per-square motions by ||u||_inf");
  };

  auto* cmd_dec = app.add_subcommand("decompose", "piecewise Korn decomposition");
  cmd_dec->add_option("--input", input, "field file")->required();
  cmd_dec->add_option("--out", out_path, "report path (JSON)");
  cmd_dec->add_option("--svg", svg_path, "visualization path (SVG)");
  add_common(cmd_dec);

  auto* cmd_poi = app.add_subcommand("poincare", "piecewise Poincare partition");
  cmd_poi->add_option("--input", input, "field file")->required();
  cmd_poi->add_option("--rho", rho, "perimeter budget parameter")->required();
  cmd_poi->add_option("--out", out_path, "report path (JSON)");

  auto* cmd_kp = app.add_subcommand("kornpoincare", "small-jump Korn-Poincare truncation");
  cmd_kp->add_option("--input", input, "field file")->required();
  cmd_kp->add_option("--out", out_path, "report path (JSON)");
  cmd_kp->add_option("--q", q, "exponent (default 4)");

  auto* cmd_ver = app.add_subcommand("verify", "run the fixture suite");
  cmd_ver->add_option("--corpus", corpus, "corpus name (default)");
  cmd_ver->add_option("--n", n, "grid resolution");
  cmd_ver->add_option("--out", out_path, "report path (JSON)");
  add_common(cmd_ver);

  auto* cmd_smp = app.add_subcommand("sample", "generate fixture fields");
  cmd_smp->add_option("--fixture", fixture, "rigid|ramp|piecewise|balls|crackforest|corner|linear");
  cmd_smp->add_option("--n", n, "grid resolution");
  cmd_smp->add_option("--mu", mu, "domain halfside");
  cmd_smp->add_option("--k", kpieces, "piece/ball count");
  cmd_smp->add_option("--seed", seed, "rng seed");
  cmd_smp->add_option("--out", out_path, "output field path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) ? 2 : 0;
  }

  try {
    if (!valid_theta(theta)) {
      std::fprintf(stderr, "error: --theta %g is not a dyadic ratio in {1/2, 1/4, 1/8, 1/16}\n", theta);
      return 3;
    }
    if (p < 1.0 || p >= 2.0) {
      std::fprintf(stderr, "error: --p must satisfy 1 <= p < 2\n");
      return 3;
    }
    if (q <= p) {
      std::fprintf(stderr, "error: exponents must satisfy p < q\n");
      return 3;
    }

    PipelineConfig cfg;
    cfg.theta = theta;
    cfg.p = p;
    cfg.q_kp = q;
    cfg.epsilon_rel = epsilon;
    cfg.max_iters = max_iters;
    cfg.seed = seed;
    cfg.linf_guard = linf_guard;

    if (cmd_smp->parsed()) {
      DisplacementField u;
      if (fixture == "rigid")
        u = fixtures::rigid(n, mu, 1.0, {0.0, 0.0});
      else if (fixture == "ramp")
        u = fixtures::ramp(n, mu);
      else if (fixture == "piecewise")
        u = fixtures::piecewise_rigid(n, mu, kpieces, seed);
      else if (fixture == "balls")
        u = fixtures::rotating_balls(n, mu, kpieces);
      else if (fixture == "crackforest")
        u = fixtures::crack_forest(n, mu, seed);
      else if (fixture == "corner")
        u = fixtures::detached_corner(n, mu, 0.15 * mu, seed);
      else if (fixture == "linear")
        u = fixtures::linear(n, mu, Mat2{1, 0, 0, 0});
      else {
        std::fprintf(stderr, "error: unknown fixture '%s'\n", fixture.c_str());
        return 3;
      }
      write_field(out_path, u);
      logf(1, "wrote %s (n=%d, mu=%g, %zu jump segments)", out_path.c_str(), n, mu, u.jumps.segments.size());
      return 0;
    }

    if (cmd_ver->parsed()) {
      SuiteConfig sc;
      sc.n = n;
      sc.pipeline = cfg;
      sc.seed = seed;
      if (corpus != "default") {
        std::fprintf(stderr, "error: unknown corpus '%s'\n", corpus.c_str());
        return 3;
      }
      SuiteResult sr = run_suite(sc);
      Json j = suite_json(sr, sc);
      if (!out_path.empty())
        write_json(out_path, j);
      else
        std::printf("%s\n", j.dump(2).c_str());
      for (const auto& fl : sr.failures) std::fprintf(stderr, "FAIL %s\n", fl.c_str());
      for (const auto& al : sr.alarms) std::fprintf(stderr, "ALARM %s\n", al.c_str());
      return sr.pass ? 0 : 4;
    }

    DisplacementField u = read_field(input);
    logf(1, "loaded %s: n=%d mu=%g jumps=%zu", input.c_str(), u.grid.n, u.grid.mu, u.jumps.segments.size());

    if (cmd_poi->parsed()) {
      if (rho <= 0) {
        std::fprintf(stderr, "error: --rho must be positive\n");
        return 3;
      }
      CoareaPartition cp = poincare_split(u, rho);
      Json j = coarea_json(cp, rho);
      if (!out_path.empty())
        write_json(out_path, j);
      else
        std::printf("%s\n", j.dump(2).c_str());
      return 0;
    }

    if (cmd_kp->parsed()) {
      TruncationResult tr = korn_poincare_small_jump(u, q);
      Json j = truncation_json(tr, q);
      if (!out_path.empty())
        write_json(out_path, j);
      else
        std::printf("%s\n", j.dump(2).c_str());
      return 0;
    }

    // decompose
    RegularizeResult reg;
    PiecewiseDecomposition d = decompose_pipeline(u, cfg, &reg);
    Json j = decomposition_json(d, cfg, &reg);
    if (!out_path.empty())
      write_json(out_path, j);
    else
      std::printf("%s\n", j.dump(2).c_str());
    if (!svg_path.empty()) {
      SvgLayers layers;
      layers.field = &u;
      layers.decomposition = &d;
      layers.exceptional = &d.exceptional_cells;
      // rebuild the root covering for the visualization layer when available
      WhitneyCovering cov;
      bool have_cov = false;
      try {
        GenerationWindow win = compute_window(u.grid, cfg.theta);
        if (win.valid) {
          DyadicLayout layout(u.grid.mu, cfg.theta);
          SegmentSet jstar = auxiliary_jump(u.jumps, u.grid.mu, cfg.theta, win.j0);
          BadSquareIndex index = classify_bad(jstar, layout, win, cfg.r());
          AuxPartition aux = build_aux_partition(index, u.jumps, u.grid);
          cov = build_whitney(aux, index);
          have_cov = true;
        }
      } catch (const std::exception& e) {
        logf(1, "svg: covering layer skipped (%s)", e.what());
      }
      if (have_cov) layers.covering = &cov;
      write_svg(svg_path, layers, u.grid.mu);
    }
    return 0;
  } catch (const io_error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const pipeline_error& e) {
    std::fprintf(stderr, "pipeline error: %s\nledger: %s\n", e.what(), e.ledger.c_str());
    return 4;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  }
}
