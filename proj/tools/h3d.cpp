#include <CLI11.hpp>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "h3d/csv.hpp"
#include "h3d/hmatrix.hpp"
#include "h3d/parallel.hpp"
#include "h3d/solver.hpp"

namespace {

using namespace h3d;

struct RunConfig {
  std::string cmd;
  std::string kernel = "laplace3d";
  std::string variant = "hodlr3d";
  std::int64_t n = 0;  // 0: per-command default
  int n_max = 216;
  double eps = 1e-7;
  std::uint64_t seed = 1;
  int n_p = 8;
  int grid_n = 16;
  double match_error = 0.0;  // 0: matched-error mode off
  std::string out;

  std::string comment() const {
    std::ostringstream ss;
    ss << "cmd=" << cmd << " kernel=" << kernel << " variant=" << variant
       << " N=" << n << " nmax=" << n_max << " eps=" << eps << " seed=" << seed
       << " np=" << n_p << " grid_n=" << grid_n << " match_error=" << match_error;
    return ss.str();
  }
};

std::vector<Variant> variants_of(const std::string& name) {
  if (name == "all") {
    return {Variant::Hodlr3d, Variant::Hodlr, Variant::HStrong};
  }
  return {parse_variant(name)};
}

int run_census(const RunConfig& cfg) {
  const std::int64_t n = cfg.n > 0 ? cfg.n : 4096;
  CsvWriter csv(cfg.out);
  csv.comment(cfg.comment());
  csv.header({"variant", "L", "level", "class", "kind", "count_enumerated",
              "count_formula", "formula_mismatch"});
  const PointSet pts =
      generate_points(Distribution::UniformRandom, std::size_t(n), cfg.seed);
  const Octree tree = build_tree(pts, cfg.n_max);
  for (Variant v : variants_of(cfg.variant)) {
    const InteractionLists lists = build_interaction_lists(tree, v);
    const BlockCensus c = census(tree, lists);
    const std::string vn = variant_name(v);
    const std::string depth = CsvWriter::num(c.depth);
    for (const auto& r : c.rows) {
      csv.row({vn, depth, CsvWriter::num(r.level), class_name(r.cls),
               r.dense ? "dense" : "lowrank", CsvWriter::num(r.count), "", ""});
    }
    auto total = [&](const char* cls, const char* kind, std::uint64_t enumerated,
                     std::int64_t formula) {
      const bool has = formula >= 0;
      csv.row({vn, depth, "total", cls, kind, CsvWriter::num(enumerated),
               has ? CsvWriter::num(formula) : std::string{},
               has ? (std::uint64_t(formula) == enumerated ? "no" : "yes")
                   : std::string{}});
    };
    total("all", "dense", c.dense_total, c.formula_dense);
    total("all", "lowrank", c.lowrank_total, -1);
    total("well-separated", "lowrank", c.lowrank_ws, c.formula_ws);
    total("vertex", "lowrank", c.lowrank_vertex, c.formula_vertex);
    total("edge", "lowrank", c.lowrank_edge, c.formula_edge);
    total("face", "lowrank", c.lowrank_face, c.formula_face);
    // Ordered-vs-unordered convention is ambiguous in the closed forms;
    // the halved off-diagonal count is reported alongside.
    csv.row({vn, depth, "total", "all-offdiag-halved", "any",
             CsvWriter::num((c.dense_total - tree.nodes_at(tree.depth) +
                             c.lowrank_total) / 2),
             "", ""});
    csv.row({vn, depth, "total", "coverage", "area", CsvWriter::num(c.coverage_area),
             CsvWriter::num(c.n_squared),
             c.coverage_area == c.n_squared ? "no" : "yes"});
  }
  return 0;
}

int run_rank_study(const RunConfig& cfg) {
  const int n_top = cfg.n > 0 ? static_cast<int>(cfg.n) : 2048;
  std::vector<int> sweep;
  for (int n = 64; n <= n_top; n *= 2) sweep.push_back(n);
  if (sweep.empty()) throw std::invalid_argument("rank-study: N must be >= 64");
  const KernelSpec kernel = parse_kernel(cfg.kernel);
  const RankStudyResult res = rank_study(kernel, sweep, cfg.eps, cfg.seed);

  CsvWriter csv(cfg.out);
  csv.comment(cfg.comment());
  csv.header({"kernel", "class", "N", "rank", "epsilon", "seed"});
  for (const auto& s : res.samples) {
    csv.row({kernel.name, std::string(1, s.cls), CsvWriter::num(s.n),
             CsvWriter::num(s.rank), CsvWriter::num(cfg.eps),
             CsvWriter::num(cfg.seed)});
  }
  CsvWriter slopes(cfg.out.empty() ? "" : cfg.out + ".slopes.csv");
  slopes.comment(cfg.comment());
  slopes.header({"kernel", "class", "slope", "epsilon", "seed"});
  for (const auto& [cls, slope] : res.slope) {
    slopes.row({kernel.name, std::string(1, cls), CsvWriter::num(slope),
                CsvWriter::num(cfg.eps), CsvWriter::num(cfg.seed)});
  }
  return 0;
}

struct BenchRow {
  Variant variant;
  std::int64_t n;
  double eps;
  RepStats st;
  double matvec_s;
  double rel_error;
  std::string matched;
};

BenchRow bench_one(Variant v, const KernelSpec& kernel, std::int64_t n,
                   double eps, const RunConfig& cfg) {
  HmatOptions opt;
  opt.n_max = cfg.n_max;
  opt.epsilon = eps;
  const PointSet pts =
      generate_points(Distribution::UniformRandom, std::size_t(n), cfg.seed);
  const HMatrixRep rep = initialize(pts, kernel, v, opt);

  std::mt19937_64 gen(cfg.seed + 17);
  std::vector<double> x(n);
  for (auto& a : x) a = 2.0 * uniform01(gen) - 1.0;

  MatvecTiming best{};
  std::vector<double> b;
  for (int rep_i = 0; rep_i < 3; ++rep_i) {
    MatvecTiming t;
    b = matvec(rep, x, &t);
    if (rep_i == 0 || t.matvec_seconds < best.matvec_seconds) best = t;
  }
  BenchRow row;
  row.variant = v;
  row.n = n;
  row.eps = eps;
  row.st = stats(rep);
  row.st.matvec_seconds = best.matvec_seconds;
  row.matvec_s = best.matvec_seconds;
  row.rel_error = reference_error(rep, x, b);
  return row;
}

int run_matvec_bench(const RunConfig& cfg) {
  const std::int64_t n_top = cfg.n > 0 ? cfg.n : 32768;
  std::vector<std::int64_t> sweep;
  for (std::int64_t n = n_top;
       n >= std::max<std::int64_t>(8 * cfg.n_max, 1728) && sweep.size() < 6; n /= 2)
    sweep.push_back(n);
  if (sweep.empty()) sweep.push_back(n_top);
  std::reverse(sweep.begin(), sweep.end());
  const KernelSpec kernel = parse_kernel(cfg.kernel);

  CsvWriter csv(cfg.out);
  csv.comment(cfg.comment());
  csv.header({"variant", "kernel", "N", "epsilon", "L", "max_rank", "CR",
              "memory_bytes", "init_s", "matvec_s", "rel_error", "seed",
              "matched"});
  for (Variant v : variants_of(cfg.variant)) {
    for (std::int64_t n : sweep) {
      BenchRow row{};
      if (cfg.match_error > 0.0) {
        // Appendix-style matched-error mode: pick the eps whose measured
        // forward error lands within one order of the target.
        bool found = false;
        BenchRow closest{};
        double closest_gap = 1e300;
        for (double eps : {1e-6, 1e-7, 1e-8, 1e-9, 1e-10}) {
          row = bench_one(v, kernel, n, eps, cfg);
          const double gap =
              std::abs(std::log10(row.rel_error) - std::log10(cfg.match_error));
          if (gap <= 1.0) {
            row.matched = "yes";
            found = true;
            break;
          }
          if (gap < closest_gap) {
            closest_gap = gap;
            closest = row;
          }
        }
        if (!found) {
          row = closest;
          row.matched = "no";
        }
      } else {
        row = bench_one(v, kernel, n, cfg.eps, cfg);
      }
      csv.row({variant_name(row.variant), kernel.name, CsvWriter::num(row.n),
               CsvWriter::num(row.eps), CsvWriter::num(row.st.depth),
               CsvWriter::num(row.st.max_rank),
               CsvWriter::num(row.st.compression_ratio),
               CsvWriter::num(row.st.memory_bytes),
               CsvWriter::num(row.st.init_seconds), CsvWriter::num(row.matvec_s),
               CsvWriter::num(row.rel_error), CsvWriter::num(cfg.seed),
               row.matched});
    }
  }
  return 0;
}

int run_solve_ie(const RunConfig& cfg) {
  const KernelSpec kernel = parse_kernel(cfg.kernel);
  HmatOptions opt;
  opt.n_max = cfg.n_max;
  CsvWriter csv(cfg.out);
  csv.comment(cfg.comment());
  csv.header({"variant", "n", "N", "epsilon", "iters", "solve_s", "fwd_error",
              "seed"});
  for (Variant v : variants_of(cfg.variant)) {
    const IeReport r = ie_experiment(cfg.grid_n, kernel, cfg.eps, v, cfg.seed, opt);
    csv.row({variant_name(v), CsvWriter::num(r.grid_n), CsvWriter::num(r.size),
             CsvWriter::num(r.epsilon), CsvWriter::num(r.iterations),
             CsvWriter::num(r.solve_seconds), CsvWriter::num(r.forward_error),
             CsvWriter::num(r.seed)});
    if (!r.converged) {
      std::cerr << "warning: GMRES did not converge for variant "
                << variant_name(v) << "\n";
    }
  }
  return 0;
}

int run_parallel_bench(const RunConfig& cfg) {
  const std::int64_t n = cfg.n > 0 ? cfg.n : 100000;
  const KernelSpec kernel = parse_kernel(cfg.kernel);
  HmatOptions opt;
  opt.n_max = cfg.n_max;
  opt.epsilon = cfg.eps;
  const PointSet pts =
      generate_points(Distribution::UniformRandom, std::size_t(n), cfg.seed);
  const HMatrixRep rep = initialize(pts, kernel, parse_variant(
      cfg.variant == "all" ? "hodlr3d" : cfg.variant), opt);

  std::mt19937_64 gen(cfg.seed + 17);
  std::vector<double> x(n);
  for (auto& a : x) a = 2.0 * uniform01(gen) - 1.0;

  CsvWriter csv(cfg.out);
  csv.comment(cfg.comment());
  csv.header({"N", "n_p", "matvec_avg_s", "matvec_max_s", "speedup_vs_np2",
              "comm_floats", "seed"});
  double avg_at_2 = 0.0;
  for (int np = 1; np <= cfg.n_p; np *= 2) {
    double avg = 0.0, mx = 0.0;
    std::uint64_t comm = 0;
    for (int it = 0; it < 3; ++it) {
      const ParallelMatvecResult r = parallel_matvec(rep, x, np);
      double a = 0.0, m = 0.0;
      for (double s : r.worker_busy_seconds) {
        a += s;
        m = std::max(m, s);
      }
      a /= double(np);
      if (it == 0 || m < mx) {
        avg = a;
        mx = m;
      }
      comm = r.ledger.lowrank_exchange_floats;
    }
    if (np == 2) avg_at_2 = avg;
    csv.row({CsvWriter::num(n), CsvWriter::num(np), CsvWriter::num(avg),
             CsvWriter::num(mx),
             np >= 2 && avg_at_2 > 0 ? CsvWriter::num(avg_at_2 / avg)
                                     : std::string{},
             CsvWriter::num(comm), CsvWriter::num(cfg.seed)});
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Hierarchical kernel-matrix workbench: octree block census, rank "
      "study, fast matvec benchmarks, integral-equation solves and "
      "distributed-style matvec benchmarks."};
  RunConfig cfg;
  app.add_option("--cmd", cfg.cmd, "census|rank-study|matvec-bench|solve-ie|parallel-bench")
      ->required()
      ->check(CLI::IsMember({"census", "rank-study", "matvec-bench", "solve-ie",
                             "parallel-bench"}));
  app.add_option("--kernel", cfg.kernel, "laplace3d|r4|helmholtz-re")
      ->check(CLI::IsMember({"laplace3d", "r4", "helmholtz-re"}));
  app.add_option("--variant", cfg.variant, "hodlr3d|hodlr|hstrong|all")
      ->check(CLI::IsMember({"hodlr3d", "hodlr", "hstrong", "all"}));
  app.add_option("--N", cfg.n, "problem size (command-specific default)");
  app.add_option("--nmax", cfg.n_max, "leaf size threshold (default 216)");
  app.add_option("--eps", cfg.eps, "ACA tolerance (default 1e-7)");
  app.add_option("--seed", cfg.seed, "RNG seed (default 1)");
  app.add_option("--np", cfg.n_p, "max worker count for parallel-bench")
      ->envname("H3D_WORKERS");
  app.add_option("--grid-n", cfg.grid_n, "tensor grid side for solve-ie");
  app.add_option("--match-error", cfg.match_error,
                 "matched-error mode target for matvec-bench");
  app.add_option("--out", cfg.out, "output CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cfg.cmd == "census") return run_census(cfg);
    if (cfg.cmd == "rank-study") return run_rank_study(cfg);
    if (cfg.cmd == "matvec-bench") return run_matvec_bench(cfg);
    if (cfg.cmd == "solve-ie") return run_solve_ie(cfg);
    if (cfg.cmd == "parallel-bench") return run_parallel_bench(cfg);
    std::cerr << "unknown command\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
