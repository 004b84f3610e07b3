// SPDX-License-Identifier: Apache-2.0
// One line per criterion; exit status 0 iff every criterion passes.
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "hjbvi/acceptance.hpp"

int main(int argc, char** argv) {
  CLI::App app{"acceptance battery"};
  hjbvi::AcceptanceOptions opt;
  app.add_option("--seed", opt.seed, "battery seed");
  std::string work = "acceptance_work";
  app.add_option("--work-dir", work, "scratch directory for the determinism check");
  app.add_option("--only", opt.only, "criterion ids to run");
  CLI11_PARSE(app, argc, argv);
  opt.work_dir = work;

  int failed = 0;
  const auto results = hjbvi::run_acceptance(opt, [&](const hjbvi::CriterionResult& r) {
    std::printf("%s\n", hjbvi::format_result_line(r).c_str());
    if (!r.pass) std::printf("       detail: %s\n", r.detail.dump().c_str());
    std::fflush(stdout);
    failed += r.pass ? 0 : 1;
  });
  std::printf("%zu criteria, %d failed\n", results.size(), failed);
  return failed == 0 ? 0 : 1;
}
