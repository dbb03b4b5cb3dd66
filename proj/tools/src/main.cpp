#include "apslab/scenario.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace sc = apslab::scenario;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw apslab::Error("cannot open scenario file '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"apslab: cylinder boundary-value scenarios"};
  std::vector<std::string> files;
  std::string out, format = "json";
  std::optional<int> truncation;
  std::optional<std::uint64_t> seed;
  int jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  bool strict = false;
  app.add_option("--scenario,-s", files, "scenario JSON file (repeatable)")->required()->check(CLI::ExistingFile);
  app.add_option("--out,-o", out, "output path (stdout when absent)");
  app.add_option("--format,-f", format, "json, csv or md")->check(CLI::IsMember({"json", "csv", "md"}));
  app.add_option("--truncation,-N", truncation, "overrides the scenario truncation")->check(CLI::Range(1, 100000));
  app.add_option("--seed", seed, "overrides every scenario seed");
  app.add_option("--jobs,-j", jobs, "worker threads")->check(CLI::PositiveNumber);
  app.add_flag("--strict", strict, "unknown keys fail the scenario");
  CLI11_PARSE(app, argc, argv);

  std::vector<sc::Scenario> scenarios;
  try {
    for (const auto& f : files) {
      auto batch = sc::parse_scenario_file(slurp(f));
      for (auto& s : batch) {
        for (const auto& w : s.warnings) std::cerr << f << ": warning: " << w << "\n";
        scenarios.push_back(std::move(s));
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  sc::RunOptions opt;
  opt.truncation = truncation;
  opt.seed = seed;
  opt.strict = strict;
  try {
    opt.default_truncation = sc::default_truncation_from_env();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }

  auto reports = sc::run_all(scenarios, opt, jobs);
  std::string text = sc::emit(reports, sc::format_from_string(format));
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream o(out, std::ios::binary);
    if (!o) {
      std::cerr << "error: cannot write '" << out << "'\n";
      return 2;
    }
    o << text;
  }

  bool all = true;
  for (const auto& r : reports) {
    if (r.pass) continue;
    all = false;
    auto f = r.first_failure();
    std::cerr << "FAIL " << r.id << ": " << (f ? f->contract + ": " + f->detail : r.error) << "\n";
  }
  return all ? 0 : 1;
}
