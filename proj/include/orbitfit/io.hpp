// File formats: problem/matrix JSON, result/report JSON and trace CSV.
//
// Matrix JSON is {"rows": r, "cols": c, "entries": [[re, im], ...]} in
// row-major order. Reals are written with 17 significant digits so every
// double survives a round trip.

#ifndef ORBITFIT_IO_HPP
#define ORBITFIT_IO_HPP

#include <orbitfit/flows.hpp>
#include <orbitfit/harness.hpp>
#include <orbitfit/oracles.hpp>

#include <json.hpp>

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace orbitfit {

/// Malformed JSON or a document that does not follow the schema.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Json = nlohmann::ordered_json;

CMatrix matrix_from_json(const Json& j);
Json matrix_to_json(const CMatrix& m);

OrbitProblem problem_from_json(const Json& j);
Json problem_to_json(const OrbitProblem& problem);

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

Json parse_json(const std::string& text);
Json load_json(const std::filesystem::path& path);
OrbitProblem load_problem(const std::filesystem::path& path);
CMatrix load_matrix(const std::filesystem::path& path);

/// Serializes with every floating-point value printed as %.17g.
std::string dump_json(const Json& j, int indent = 2);

Json elements_to_json(const GroupElements& g);
Json flow_result_json(const MultiRestartResult& result, bool include_elements);
Json spec_to_json(const ExperimentSpec& spec);
Json report_to_json(const ExperimentReport& report);
Json feasibility_to_json(const FeasibilityReport& report);

struct TraceRow {
  int restart = 0;
  TraceEntry entry;
};

void write_trace_csv(std::ostream& out, const std::vector<FlowResult>& runs);
std::vector<TraceRow> read_trace_csv(std::istream& in);
std::vector<TraceRow> read_trace_csv(const std::filesystem::path& path);

}  // namespace orbitfit

#endif  // ORBITFIT_IO_HPP
