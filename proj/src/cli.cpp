#include <orbitfit/cli.hpp>

#include <orbitfit/flows.hpp>
#include <orbitfit/harness.hpp>
#include <orbitfit/io.hpp>
#include <orbitfit/oracles.hpp>

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace orbitfit {

namespace {

constexpr int kFullScaleRestarts = 100;

struct FlowFlags {
  int restarts = FlowConfig{}.restarts;
  std::uint64_t seed = FlowConfig{}.seed;
  int max_iters = FlowConfig{}.max_iters;
  double tol_grad = FlowConfig{}.grad_tol;
  double tol_obj = FlowConfig{}.obj_tol;
  unsigned threads = 0;
  bool full_scale = false;
  std::string out_path;
  std::string trace_path;

  void attach(CLI::App* cmd) {
    cmd->add_option("--restarts", restarts, "Haar-random restarts")->capture_default_str();
    cmd->add_option("--seed", seed, "master RNG seed")->capture_default_str();
    cmd->add_option("--max-iters", max_iters, "iteration budget per restart")->capture_default_str();
    cmd->add_option("--tol-grad", tol_grad, "stop when sup_j ||Omega_j|| falls below")
        ->capture_default_str();
    cmd->add_option("--tol-obj", tol_obj, "stop on relative objective decrease below, over 10 iterations")
        ->capture_default_str();
    cmd->add_option("--threads", threads, "worker threads, 0 = hardware concurrency")
        ->capture_default_str();
    cmd->add_flag("--full-scale", full_scale, "use 100 restarts");
    cmd->add_option("--out", out_path, "result JSON path (default: standard output)");
    cmd->add_option("--trace", trace_path, "trace CSV path");
  }

  FlowConfig config() const {
    FlowConfig c;
    c.restarts = full_scale ? kFullScaleRestarts : restarts;
    c.seed = seed;
    c.max_iters = max_iters;
    c.grad_tol = tol_grad;
    c.obj_tol = tol_obj;
    return c;
  }
};

void emit(const Json& j, const std::string& path, std::ostream& out) {
  const std::string text = dump_json(j) + "\n";
  if (path.empty())
    out << text;
  else
    write_text(path, text);
}

bool is_problem_document(const Json& j) { return j.is_object() && j.contains("kind"); }

std::vector<double> parse_vector(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(item, &used);
    } catch (const std::exception&) {
      throw ParseError("not a number: '" + item + "'");
    }
    if (used != item.size()) throw ParseError("not a number: '" + item + "'");
    v.push_back(x);
  }
  if (v.empty()) throw ParseError("empty vector");
  return v;
}

Json vector_json(const RVector& v) {
  Json out = Json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(v(k));
  return out;
}

int guarded(std::ostream& err, const std::function<int()>& body) {
  try {
    return body();
  } catch (const ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << '\n';
    return kExitShape;
  } catch (const StructureError& e) {
    err << "error: " << e.what() << '\n';
    return kExitShape;
  } catch (const IoError& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const std::out_of_range& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Best approximation of a matrix by sums of unitary orbits", "orbitfit"};
  app.require_subcommand(1);

  // solve
  auto* solve = app.add_subcommand("solve", "minimize over a problem file with multi-restart flows");
  std::string problem_path;
  bool with_elements = false;
  FlowFlags solve_flags;
  solve->add_option("problem", problem_path, "problem JSON")->required();
  solve->add_flag("--elements", with_elements, "include the best unitaries in the result");
  solve_flags.attach(solve);

  // oracle
  auto* oracle = app.add_subcommand("oracle", "closed-form optima, bounds and feasibility tests");
  oracle->require_subcommand(1);
  std::vector<std::string> files;
  auto* herm_skew = oracle->add_subcommand("herm-skew", "min/max of ||UAU* + VBV* - C||");
  herm_skew->add_option("files", files, "problem JSON, or matrix JSONs A B C")->required();
  std::vector<double> lengths;
  auto* polygon = oracle->add_subcommand("polygon", "convex polygon test on side lengths");
  polygon->add_option("lengths", lengths, "side lengths a_0 ... a_N")->required();
  auto* kyfan = oracle->add_subcommand("kyfan", "Ky Fan necessary condition");
  kyfan->add_option("files", files, "problem JSON, or matrix JSONs A_0 ... A_N")->required();
  double b_re = 0.0, b_im = 0.0;
  auto* scalar_inf = oracle->add_subcommand("scalar-inf", "inf ||S^-1 A S - bI|| over invertible S");
  scalar_inf->add_option("files", files, "matrix JSON A")->required()->expected(1);
  scalar_inf->add_option("--b-re", b_re, "real part of b")->capture_default_str();
  scalar_inf->add_option("--b-im", b_im, "imaginary part of b")->capture_default_str();
  auto* trace_bound = oracle->add_subcommand("trace-bound", "|tr A - tr B| / sqrt(n)");
  trace_bound->add_option("files", files, "matrix JSONs A B")->required()->expected(2);
  std::string v0_text;
  std::vector<std::string> vs_text;
  auto* decomp = oracle->add_subcommand("decomp", "diagonal decomposition by permutation search");
  decomp->add_option("--v0", v0_text, "comma-separated target diagonal")->required();
  decomp->add_option("--v", vs_text, "comma-separated operand diagonal (repeat)")->required();

  // experiment
  auto* experiment = app.add_subcommand("experiment", "reproduce a numerical experiment");
  std::string experiment_name;
  std::optional<std::size_t> orbit_count;
  std::optional<Eigen::Index> dim_n, dim_m;
  std::string variant;
  FlowFlags exp_flags;
  experiment->add_option("name", experiment_name, "example1 | example2 | example4 | example5 | example6")
      ->required();
  experiment->add_option("--N", orbit_count, "number of orbit terms");
  experiment->add_option("--n", dim_n, "rows");
  experiment->add_option("--m", dim_m, "columns");
  experiment->add_option("--variant", variant, "example6 orbit kind: equivalence | similarity");
  exp_flags.attach(experiment);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitParse;
  }

  if (solve->parsed()) {
    return guarded(err, [&] {
      const OrbitProblem problem = load_problem(problem_path);
      for (const auto& w : problem.warnings()) err << "warning: " << w << '\n';
      const MultiRestartResult result =
          multi_restart(problem, solve_flags.config(), solve_flags.threads);
      if (!solve_flags.trace_path.empty()) export_trace(result.runs, solve_flags.trace_path);
      emit(flow_result_json(result, with_elements), solve_flags.out_path, out);
      return int{kExitOk};
    });
  }

  if (experiment->parsed()) {
    return guarded(err, [&] {
      ExperimentSpec spec = ExperimentSpec::defaults(parse_experiment_name(experiment_name));
      if (orbit_count) spec.orbit_count = *orbit_count;
      if (dim_n) spec.n = *dim_n;
      if (dim_m) spec.m = *dim_m;
      if (!dim_m && dim_n && spec.name != ExperimentName::example5) spec.m = *dim_n;
      if (!variant.empty()) spec.kind = parse_orbit_kind(variant);
      spec.flow = exp_flags.config();
      spec.restarts = spec.flow.restarts;
      spec.seed = exp_flags.seed;
      spec.threads = exp_flags.threads;
      const ExperimentReport report = run_experiment(spec);
      if (!exp_flags.trace_path.empty()) export_trace(report, exp_flags.trace_path);
      emit(report_to_json(report), exp_flags.out_path, out);
      return int{kExitOk};
    });
  }

  // oracle subcommands
  return guarded(err, [&] {
    Json report;
    if (herm_skew->parsed()) {
      CMatrix a, b, c;
      if (files.size() == 1) {
        const OrbitProblem p = load_problem(files[0]);
        if (p.size() != 2) throw ShapeError("herm-skew needs a problem with exactly two operands");
        a = p.operands[0];
        b = p.operands[1];
        c = p.target;
      } else if (files.size() == 3) {
        a = load_matrix(files[0]);
        b = load_matrix(files[1]);
        c = load_matrix(files[2]);
      } else {
        throw ParseError("herm-skew takes one problem file or three matrix files");
      }
      const HermSkewOptimum opt = herm_skew_min_max(a, b, c);
      report = Json{{"oracle", "herm-skew"},
                    {"min_value", opt.min_value},
                    {"max_value", opt.max_value},
                    {"min_value_sq", opt.min_value * opt.min_value},
                    {"max_value_sq", opt.max_value * opt.max_value},
                    {"a", vector_json(opt.a)},
                    {"b", vector_json(opt.b)},
                    {"f", vector_json(opt.f)},
                    {"g", vector_json(opt.g)}};
    } else if (polygon->parsed()) {
      report = feasibility_to_json(polygon_check(lengths));
    } else if (kyfan->parsed()) {
      std::vector<CMatrix> mats;
      if (files.size() == 1) {
        const Json doc = load_json(files[0]);
        if (!is_problem_document(doc)) throw ParseError("kyfan needs a problem file or several matrices");
        const OrbitProblem p = problem_from_json(doc);
        mats.push_back(p.target);
        mats.insert(mats.end(), p.operands.begin(), p.operands.end());
      } else {
        for (const auto& f : files) mats.push_back(load_matrix(f));
      }
      report = feasibility_to_json(kyfan_necessary(mats));
    } else if (scalar_inf->parsed()) {
      const CMatrix a = load_matrix(files[0]);
      report = Json{{"oracle", "scalar-inf"},
                    {"value", similarity_to_scalar_inf(a, Complex(b_re, b_im))}};
    } else if (trace_bound->parsed()) {
      const CMatrix a = load_matrix(files[0]);
      const CMatrix b = load_matrix(files[1]);
      report = Json{{"oracle", "trace-bound"}, {"value", similarity_trace_bound(a, b)}};
    } else if (decomp->parsed()) {
      std::vector<std::vector<double>> vs;
      for (const auto& t : vs_text) vs.push_back(parse_vector(t));
      report = feasibility_to_json(diagonal_decomposition_search(parse_vector(v0_text), vs));
    }
    out << dump_json(report) << '\n';
    return int{kExitOk};
  });
}

}  // namespace orbitfit
