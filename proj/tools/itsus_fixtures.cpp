// itsus-fixtures: regenerate pinned values and report drift.
#include <iostream>

#include "CLI11.hpp"
#include "itsus/fixtures.h"

#ifndef ITSUS_FIXTURE_DIR
#define ITSUS_FIXTURE_DIR "fixtures/v1"
#endif

int main(int argc, char** argv) {
  CLI::App app{"Check or rewrite the pinned fixture values"};
  std::string dir = ITSUS_FIXTURE_DIR;
  int jobs = 1;
  bool write = false;
  app.add_option("--dir", dir, "fixture directory");
  app.add_option("--jobs", jobs)->check(CLI::PositiveNumber);
  app.add_flag("--write", write, "overwrite the pinned values with freshly computed ones");
  CLI11_PARSE(app, argc, argv);
  try {
    if (write) {
      itsus::write_fixtures(dir, jobs);
      std::cout << "wrote " << dir << '\n';
      return 0;
    }
    const auto r = itsus::regenerate_golden(dir, jobs);
    for (const auto& i : r.items)
      std::cout << (i.ok ? "ok    " : "DRIFT ") << i.name << " pinned=" << itsus::format_double(i.pinned)
                << " current=" << itsus::format_double(i.current) << " tol=" << itsus::format_double(i.tolerance)
                << '\n';
    for (const auto& e : r.errors) std::cout << "ERROR " << e << '\n';
    std::cout << (r.ok() ? "no drift" : "drift detected") << '\n';
    return r.ok() ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
