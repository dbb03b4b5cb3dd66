#pragma once

#include "apslab/index.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace apslab::scenario {

using nlohmann::json;

enum class Kind {
  Solve,
  Index,
  ApsShift,
  GraphIdentity,
  DeformSweep,
  FredholmPair,
  PairIdentity,
  Split,
  Cobordism,
  Greens,
  Energy,
  OdeBounds,
  ExtensionBound,
  NormProbe
};

std::string to_string(Kind k);
std::optional<Kind> kind_from_string(const std::string& s);
const std::vector<Kind>& all_kinds();

// schema violation; the message starts with the JSON path of the first offending field
class ParseError : public Error {
 public:
  ParseError(std::string path, const std::string& what) : Error(path + ": " + what), path_(std::move(path)) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// how to build one boundary condition from the end it sits on
struct ConditionSpec {
  enum class Type { Aps, RightReference, Chiral, Transmission, RandomGraph, Graph, Deformed, Complement };
  Type type = Type::Aps;
  double a = 0.0;
  bool closed = false;
  int sign = 1;
  std::optional<std::uint64_t> seed;  // absent: derived from the scenario seed
  std::uint64_t salt = 0;
  GraphSampler sampler;
  double s = 1.0;
  std::shared_ptr<ConditionSpec> inner;
  // explicit graph data: sections as (component, n, copy, fiber, value) lists
  struct Coef {
    int component = 0;
    std::int64_t n = 0;
    int copy = 0;
    int fiber = 0;
    cd value{1.0, 0.0};
  };
  std::vector<std::vector<Coef>> w_plus, w_minus;
  struct Entry {
    Coef from, to;
  };
  std::vector<Entry> g;
};

ConditionFactory make_factory(const ConditionSpec& c, std::uint64_t scenario_seed);

struct ProfileTerm {
  cd c;
  int p = 0;
  cd mu;
};
struct ProfileSpec {
  ConditionSpec::Coef at;
  std::vector<ProfileTerm> terms;
};

struct Tolerances {
  double residual = 1e-10;  // Green, energy, kernel verification
  double inverse = 1e-12;   // D0 S0 Psi - Psi relative
};

struct Scenario {
  std::string id;
  Kind kind = Kind::Index;
  std::uint64_t seed = 0;
  std::optional<int> truncation;
  Tolerances tol;
  std::vector<std::string> warnings;  // unknown keys and similar

  ModelSpec model;
  double rho = 1.0;
  std::optional<ConditionSpec> left, right, cut, b1, b2;
  struct Side {
    ConditionSpec condition;
    bool complement = false;
  };
  std::optional<Side> x, y;
  // aps_shift: explicit (a, b) pairs; a grid expands to all a < b
  std::vector<std::pair<double, double>> shifts;
  int steps = 11;
  int samples = 100;
  int modes = 3;
  double max_abs_lambda = 4.0;
  std::vector<double> lambdas;
  int count = 20;
  double cut1 = 0.0, cut2 = 1.0;
  double cutoff_r = 1.0;
  double growth = 10.0;
  // solve right-hand side: explicit profiles or a seeded random section
  std::vector<ProfileSpec> rhs;
  int rhs_modes = 4;
  bool expect_refusal = false;
  std::optional<long long> expect_index;
};

Scenario parse_scenario(const json& j, const std::string& path = "$");
Scenario parse_scenario_text(const std::string& bytes);
// a file holds one scenario object or {"scenarios": [...]}
std::vector<Scenario> parse_scenario_file(const std::string& bytes);

struct Verdict {
  std::string contract;
  bool pass = false;
  std::string detail;
};

struct IdentityRow {
  std::string name;
  long long lhs = 0;
  long long rhs = 0;
  bool holds = false;
  std::string detail;
};

struct CsvRow {
  std::string scenario_id;
  std::string kind;
  std::optional<long long> index, dim_ker, dim_coker;
  std::optional<double> residual_max;
  bool pass = false;
  double seconds = 0.0;
};

struct Report {
  std::string id;
  std::string kind;
  std::uint64_t seed = 0;
  int truncation = 0;
  json outputs = json::object();
  std::vector<Verdict> verdicts;
  std::vector<IdentityRow> identities;
  std::vector<CsvRow> rows;
  std::vector<std::string> warnings;
  std::string error;
  bool pass = false;
  double seconds = 0.0;

  // first violated contract, or empty
  std::optional<Verdict> first_failure() const;
};

struct RunOptions {
  std::optional<int> truncation;      // overrides the scenario
  std::optional<std::uint64_t> seed;  // overrides the scenario
  bool strict = false;                // warnings fail the scenario
  int default_truncation = 32;
};

// default truncation from APSLAB_DEFAULT_N, else 32
int default_truncation_from_env();

Report run(const Scenario& s, const RunOptions& opt = {});
// worker pool of the given size; reports come back in input order
std::vector<Report> run_all(const std::vector<Scenario>& s, const RunOptions& opt, int jobs);

enum class Format { Json, Csv, Md };
Format format_from_string(const std::string& s);
std::string emit(const std::vector<Report>& reports, Format f);
json to_json(const Report& r);
Report report_from_json(const json& j);
std::vector<Report> reports_from_json(const json& j);

}  // namespace apslab::scenario
