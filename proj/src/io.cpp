#include <orbitfit/io.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <type_traits>
#include <variant>

namespace orbitfit {

namespace {

std::string format_real(double x) {
  if (!std::isfinite(x)) return "null";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void emit(const Json& j, int indent, int depth, std::string& out) {
  const auto newline = [&](int d) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * d), ' ');
  };
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        newline(depth + 1);
        out += Json(it.key()).dump();
        out += indent < 0 ? ":" : ": ";
        emit(it.value(), indent, depth + 1, out);
      }
      newline(depth);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      // numeric leaves stay on one line
      const bool flat = std::all_of(j.begin(), j.end(), [](const Json& e) {
        return e.is_primitive() || (e.is_array() && std::all_of(e.begin(), e.end(), [](const Json& x) {
                                      return x.is_primitive();
                                    }));
      });
      out += '[';
      bool first = true;
      for (const auto& e : j) {
        if (!first) out += ',';
        if (flat && !first && indent >= 0) out += ' ';
        first = false;
        if (!flat) newline(depth + 1);
        emit(e, flat ? -1 : indent, depth + 1, out);
      }
      if (!flat) newline(depth);
      out += ']';
      return;
    }
    case Json::value_t::number_float:
      out += format_real(j.get<double>());
      return;
    default:
      out += j.dump();
      return;
  }
}

Complex entry_from_json(const Json& e) {
  if (e.is_number()) return {e.get<double>(), 0.0};
  if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number())
    return {e[0].get<double>(), e[1].get<double>()};
  throw ParseError("matrix entry must be [re, im] or a real number");
}

Json runs_array(const FlowResult& r) {
  return Json{{"restart", r.restart_index},
              {"best_objective", r.best_objective},
              {"status", std::string(to_string(r.status))},
              {"iterations", static_cast<int>(r.trace.size()) - 1}};
}

}  // namespace

CMatrix matrix_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("matrix must be a JSON object");
  if (!j.contains("rows") || !j.contains("cols") || !j.contains("entries"))
    throw ParseError("matrix needs rows, cols and entries");
  if (!j["rows"].is_number_integer() || !j["cols"].is_number_integer())
    throw ParseError("matrix rows/cols must be integers");
  const auto rows = j["rows"].get<long long>();
  const auto cols = j["cols"].get<long long>();
  if (rows <= 0 || cols <= 0) throw ShapeError("matrix dimensions must be positive");
  const Json& entries = j["entries"];
  if (!entries.is_array()) throw ParseError("matrix entries must be an array");
  if (static_cast<long long>(entries.size()) != rows * cols)
    throw ShapeError("matrix has " + std::to_string(entries.size()) + " entries, expected " +
                     std::to_string(rows * cols));
  CMatrix m(rows, cols);
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = entry_from_json(entries[k++]);
  if (!m.allFinite()) throw ParseError("matrix entries must be finite");
  return m;
}

Json matrix_to_json(const CMatrix& m) {
  Json entries = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c)
      entries.push_back(Json::array({m(r, c).real(), m(r, c).imag()}));
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"entries", std::move(entries)}};
}

OrbitProblem problem_from_json(const Json& j) {
  if (!j.is_object()) throw ParseError("problem must be a JSON object");
  if (!j.contains("kind") || !j["kind"].is_string()) throw ParseError("problem needs a kind string");
  if (!j.contains("target")) throw ParseError("problem needs a target");
  if (!j.contains("operands") || !j["operands"].is_array())
    throw ParseError("problem needs an operands array");
  OrbitProblem p;
  try {
    p.kind = parse_orbit_kind(j["kind"].get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw ParseError(e.what());
  }
  p.target = matrix_from_json(j["target"]);
  for (const auto& op : j["operands"]) p.operands.push_back(matrix_from_json(op));
  if (p.operands.empty()) throw ParseError("problem needs at least one operand");
  p.validate();
  return p;
}

Json problem_to_json(const OrbitProblem& problem) {
  Json ops = Json::array();
  for (const auto& a : problem.operands) ops.push_back(matrix_to_json(a));
  return Json{{"kind", std::string(to_string(problem.kind))},
              {"target", matrix_to_json(problem.target)},
              {"operands", std::move(ops)}};
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading '" + path.string() + "'");
  return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  out.flush();
  if (!out) throw IoError("error writing '" + path.string() + "'");
}

Json parse_json(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
}

Json load_json(const std::filesystem::path& path) { return parse_json(read_text(path)); }

OrbitProblem load_problem(const std::filesystem::path& path) {
  return problem_from_json(load_json(path));
}

CMatrix load_matrix(const std::filesystem::path& path) { return matrix_from_json(load_json(path)); }

std::string dump_json(const Json& j, int indent) {
  std::string out;
  emit(j, indent, 0, out);
  return out;
}

Json elements_to_json(const GroupElements& g) {
  Json lefts = Json::array();
  for (const auto& u : g.lefts) lefts.push_back(matrix_to_json(u));
  Json out{{"lefts", std::move(lefts)}};
  if (!g.rights.empty()) {
    Json rights = Json::array();
    for (const auto& v : g.rights) rights.push_back(matrix_to_json(v));
    out["rights"] = std::move(rights);
  }
  return out;
}

Json flow_result_json(const MultiRestartResult& result, bool include_elements) {
  Json runs = Json::array();
  for (const auto& r : result.runs) runs.push_back(runs_array(r));
  Json out{{"best_objective", result.best.best_objective},
           {"best_objective_sq", result.best.trace.back().objective_sq},
           {"status", std::string(to_string(result.best.status))},
           {"restart_index", result.best.restart_index},
           {"stats",
            Json{{"mean", result.stats.mean},
                 {"rmsd", result.stats.rmsd},
                 {"restarts", result.stats.restarts}}},
           {"runs", std::move(runs)}};
  if (include_elements) out["elements"] = elements_to_json(result.best.best_elements);
  return out;
}

Json spec_to_json(const ExperimentSpec& spec) {
  return Json{{"name", std::string(to_string(spec.name))},
              {"n", spec.n},
              {"m", spec.m},
              {"N", spec.orbit_count},
              {"kind", std::string(to_string(spec.kind))},
              {"restarts", spec.restarts},
              {"seed", spec.seed},
              {"flow",
               Json{{"max_iters", spec.flow.max_iters},
                    {"grad_tol", spec.flow.grad_tol},
                    {"obj_tol", spec.flow.obj_tol},
                    {"initial_step", spec.flow.initial_step},
                    {"backtrack_factor", spec.flow.backtrack_factor},
                    {"growth_factor", spec.flow.growth_factor},
                    {"reunitarize_every", spec.flow.reunitarize_every}}}};
}

Json report_to_json(const ExperimentReport& report) {
  Json finals = Json::array();
  for (double x : report.finals) finals.push_back(x);
  Json oracle = report.oracle_kind == OracleKind::none ? Json(nullptr) : Json(report.oracle);
  Json out{{"name", std::string(to_string(report.spec.name))},
           {"spec", spec_to_json(report.spec)},
           {"mean", report.mean},
           {"rmsd", report.rmsd},
           {"oracle", std::move(oracle)},
           {"pass", report.pass},
           {"finals", std::move(finals)},
           {"oracle_kind", std::string(to_string(report.oracle_kind))},
           {"best_objective", report.best_objective}};
  if (report.construction_objective) out["construction_objective"] = *report.construction_objective;
  if (report.kyfan_holds) out["kyfan_holds"] = *report.kyfan_holds;
  return out;
}

Json feasibility_to_json(const FeasibilityReport& report) {
  Json out{{"condition", report.condition}, {"holds", report.holds}};
  std::visit(
      [&out](const auto& w) {
        using W = std::decay_t<decltype(w)>;
        if constexpr (std::is_same_v<W, PolygonWitness>) {
          out["witness"] = Json{{"violating_side", w.violating_side}};
        } else if constexpr (std::is_same_v<W, KyFanWitness>) {
          Json all = Json::array();
          for (const auto& [i, k] : w.all) all.push_back(Json::array({i, k}));
          out["witness"] = Json{{"i", w.matrix_index}, {"k", w.k}, {"violations", std::move(all)}};
        } else if constexpr (std::is_same_v<W, PermutationWitness>) {
          out["witness"] = Json{{"permutations", w.perms}};
        } else {
          out["witness"] = nullptr;
        }
      },
      report.witness);
  return out;
}

void write_trace_csv(std::ostream& out, const std::vector<FlowResult>& runs) {
  out << "restart,iteration,objective_sq,grad_norm,step\n";
  for (const auto& run : runs)
    for (const auto& e : run.trace)
      out << run.restart_index << ',' << e.iteration << ',' << format_real(e.objective_sq) << ','
          << format_real(e.grad_norm) << ',' << format_real(e.step) << '\n';
}

std::vector<TraceRow> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "restart,iteration,objective_sq,grad_norm,step")
    throw ParseError("trace CSV: missing or unexpected header");
  std::vector<TraceRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TraceRow row;
    char* end = nullptr;
    const char* p = line.c_str();
    auto field_int = [&]() {
      const long v = std::strtol(p, &end, 10);
      if (end == p || *end != ',') throw ParseError("trace CSV: bad integer field");
      p = end + 1;
      return static_cast<int>(v);
    };
    auto field_real = [&](bool last) {
      const double v = std::strtod(p, &end);
      if (end == p || (last ? *end != '\0' : *end != ','))
        throw ParseError("trace CSV: bad real field");
      p = end + 1;
      return v;
    };
    row.restart = field_int();
    row.entry.iteration = field_int();
    row.entry.objective_sq = field_real(false);
    row.entry.grad_norm = field_real(false);
    row.entry.step = field_real(true);
    rows.push_back(row);
  }
  return rows;
}

std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path) {
  std::istringstream in(read_text(path));
  return read_trace_csv(in);
}

}  // namespace orbitfit
