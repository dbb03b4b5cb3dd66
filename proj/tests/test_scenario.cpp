#include "apslab/scenario.hpp"

#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

using namespace apslab;
namespace sc = apslab::scenario;
using sc::json;

namespace {

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string parse_error_of(const std::string& text) {
  try {
    sc::parse_scenario_text(text);
  } catch (const sc::ParseError& e) {
    return e.what();
  }
  return "";
}

const char* kIndexZ = R"({"id": "z", "kind": "index", "seed": 1, "truncation": 64,
  "payload": {"model": {"components": [{"type": "integers"}]}, "rho": 1.0,
              "left": {"type": "aps", "a": 0}, "right": {"type": "right_reference", "a": 0}}})";

}  // namespace

TEST_CASE("scenario parse errors name the offending field") {
  CHECK(parse_error_of(R"({"id": "x", "kind": "nope"})").rfind("$.kind: unknown kind 'nope'", 0) == 0);
  CHECK(parse_error_of(R"({"kind": "index"})").rfind("$.id: missing required field", 0) == 0);
  CHECK(parse_error_of(R"({"id": "x", "kind": "aps_shift", "payload": {"a": "zero", "b": 1}})")
            .rfind("$.payload.a: expected a number", 0) == 0);
  CHECK(parse_error_of(R"({"id": "x", "kind": "aps_shift", "payload": {"a": 1e999, "b": 2}})")
            .rfind("$.payload.a: non-finite number", 0) == 0);
  CHECK(parse_error_of(R"({"id": "x", "kind": "aps_shift", "payload": {"a": 2, "b": 1}})").find("a=2 b=1") !=
        std::string::npos);
  std::string dup = parse_error_of(R"({"id": "x", "kind": "index", "payload": {"model": {"components": [
      {"type": "explicit", "blocks": [{"mode_id": 3, "a": [[1]]}, {"mode_id": 3, "a": [[2]]}]}]}}})");
  CHECK(dup.rfind("$.payload.model.components[0].blocks[1].mode_id: duplicate mode_id 3", 0) == 0);
  CHECK(parse_error_of(R"({"id": "x", "kind": "index", "payload": {"left": {"type": "bogus"}}})")
            .rfind("$.payload.left.type: unknown condition type", 0) == 0);
  CHECK(parse_error_of(R"({"id": "x", "kind": "split"})").rfind("$.payload.cut: missing required field", 0) == 0);
  CHECK(parse_error_of("{not json").rfind("$: malformed JSON", 0) == 0);
  CHECK(parse_error_of(kIndexZ).empty());
}

TEST_CASE("unknown keys warn, and fail only under strict") {
  auto s = sc::parse_scenario_text(R"({"id": "w", "kind": "index", "truncation": 16, "extra": 1,
                                  "payload": {"left": {"type": "aps", "a": 0, "colour": "red"}}})");
  REQUIRE(s.warnings.size() == 2);
  CHECK(s.warnings[0] == "$.payload.left.colour: unknown key ignored");
  CHECK(s.warnings[1] == "$.extra: unknown key ignored");
  CHECK(sc::run(s).pass);
  sc::RunOptions strict;
  strict.strict = true;
  auto r = sc::run(s, strict);
  CHECK_FALSE(r.pass);
  REQUIRE(r.first_failure());
  CHECK(r.first_failure()->contract == "strict schema");
}

TEST_CASE("index scenarios over the integers") {
  auto r0 = sc::run(sc::parse_scenario_text(kIndexZ));
  CHECK(r0.pass);
  CHECK(r0.outputs["index"] == 0);
  CHECK(r0.outputs["certificate"]["n_doubled"] == 128);
  std::string b1 = kIndexZ;
  b1.replace(b1.find("\"a\": 0}"), 7, "\"a\": 1}");
  auto r1 = sc::run(sc::parse_scenario_text(b1));
  CHECK(r1.pass);
  CHECK(r1.outputs["index"] == 1);
  CHECK(r1.outputs["dim_ker"] == 1);
}

TEST_CASE("expected values turn into verdicts with the offending numbers") {
  auto s = sc::parse_scenario_text(R"({"id": "e", "kind": "index", "truncation": 16,
                                  "payload": {"left": {"type": "aps", "a": 1}, "expect": {"index": 0}}})");
  auto r = sc::run(s);
  CHECK_FALSE(r.pass);
  REQUIRE(r.first_failure());
  CHECK(r.first_failure()->contract == "expected index");
  CHECK(r.first_failure()->detail == "expected=0 got=1");
}

TEST_CASE("runtime errors are wrapped with scenario context") {
  auto s = sc::parse_scenario_text(R"({"id": "small", "kind": "index", "truncation": 2,
                                  "payload": {"model": {"components": [{"type": "integers"}], "band": 4}}})");
  auto r = sc::run(s);
  CHECK_FALSE(r.pass);
  CHECK(r.error.rfind("scenario 'small' (index, N=2): ", 0) == 0);
  REQUIRE(r.rows.size() == 1);
  CHECK_FALSE(r.rows[0].pass);
}

TEST_CASE("truncation precedence: flag over scenario over default") {
  auto s = sc::parse_scenario_text(kIndexZ);
  sc::RunOptions opt;
  opt.default_truncation = 20;
  CHECK(sc::run(s, opt).truncation == 64);
  opt.truncation = 12;
  CHECK(sc::run(s, opt).truncation == 12);
  s.truncation.reset();
  opt.truncation.reset();
  CHECK(sc::run(s, opt).truncation == 20);
}

TEST_CASE("cobordism scenario has total zero") {
  auto r = sc::run(sc::parse_scenario_text(R"({"id": "c", "kind": "cobordism", "truncation": 12,
      "payload": {"model": {"components": [{"type": "chiral", "offset": [0.3, 0.0]}]}}})"));
  CHECK(r.pass);
  CHECK(r.outputs["total"] == 0);
  CHECK(r.outputs["left_contribution"] == -r.outputs["right_contribution"].get<int>());
}

TEST_CASE("deformation sweep emits one row per step plus constancy") {
  auto r = sc::run(sc::parse_scenario_text(R"({"id": "d", "kind": "deform_sweep", "seed": 5, "truncation": 12,
      "payload": {"left": {"type": "graph", "a": 0.0, "max_g_norm": 3.0}, "steps": 5}})"));
  CHECK(r.pass);
  REQUIRE(r.rows.size() == 6);
  CHECK(r.rows.back().scenario_id == "d/constancy");
  std::string csv = sc::emit({r}, sc::Format::Csv);
  CHECK(csv.rfind("scenario_id,kind,index,dim_ker,dim_coker,residual_max,pass,seconds\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
  CHECK(csv.find("d/s=0.5,deform_sweep,") != std::string::npos);
}

TEST_CASE("results are deterministic and ordered across worker counts") {
  std::vector<sc::Scenario> all;
  for (int k = 0; k < 6; ++k) {
    auto s = sc::parse_scenario_text(R"({"id": "g", "kind": "graph_identity", "truncation": 12,
        "payload": {"model": {"components": [{"type": "integers", "shift": 0.5, "fiber_dim": 2}]},
                    "left": {"type": "graph", "a": 0.5}}})");
    s.id = "g" + std::to_string(k);
    s.seed = 1000 + k;
    all.push_back(s);
  }
  auto strip = [](std::vector<sc::Report> rs) {
    json out = json::array();
    for (auto& r : rs) {
      json j = sc::to_json(r);
      j.erase("seconds");
      for (auto& row : j["rows"]) row.erase("seconds");
      out.push_back(j);
    }
    return out;
  };
  auto one = sc::run_all(all, {}, 1);
  auto four = sc::run_all(all, {}, 4);
  CHECK(strip(one) == strip(four));
  for (int k = 0; k < 6; ++k) CHECK(four[k].id == "g" + std::to_string(k));
  sc::RunOptions o;
  o.seed = 77;
  auto a = sc::run_all(all, o, 2);
  for (const auto& r : a) CHECK(r.seed == 77);
}

TEST_CASE("json report round-trips and md shows identities side by side") {
  auto r = sc::run(sc::parse_scenario_text(R"({"id": "s", "kind": "aps_shift", "truncation": 12,
      "payload": {"model": {"components": [{"type": "integers", "shift": 0.25}]}, "pairs": [[-1, 1], [0.5, 2.5]]}})"));
  CHECK(r.pass);
  REQUIRE(r.identities.size() == 2);
  CHECK(r.identities[0].lhs == 2);
  CHECK(r.identities[1].rhs == 2);
  auto text = sc::emit({r}, sc::Format::Json);
  auto back = sc::reports_from_json(json::parse(text));
  REQUIRE(back.size() == 1);
  CHECK(sc::to_json(back[0]) == sc::to_json(r));
  auto md = sc::emit({r}, sc::Format::Md);
  CHECK(md.find("| identity | lhs | rhs | holds | detail |") != std::string::npos);
  CHECK(md.find("| aps_shift[-1,1) | 2 | 2 | yes |") != std::string::npos);
}

TEST_CASE("every shipped example scenario parses and passes") {
  int n = 0;
  std::set<std::string> kinds;
  for (const auto& e : std::filesystem::directory_iterator(APSLAB_SCENARIO_DIR)) {
    if (e.path().extension() != ".json") continue;
    CAPTURE(e.path().string());
    for (const auto& s : sc::parse_scenario_file(read_file(e.path()))) {
      CHECK(s.warnings.empty());
      auto r = sc::run(s);
      auto f = r.first_failure();
      CHECK_MESSAGE(r.pass, (f ? f->contract + ": " + f->detail : r.error));
      kinds.insert(r.kind);
      ++n;
    }
  }
  CHECK(n >= 14);
  CHECK(kinds.size() == sc::all_kinds().size());
}
