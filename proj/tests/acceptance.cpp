// Acceptance suite: runs every built-in verification check and prints one
// pass/fail line per criterion. Exit status is the number of failures.

#include <chrono>
#include <cstdio>
#include <map>

#include "verify.hpp"

int main() {
  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  auto results = cennforge::verify::run_checks();
  auto dt = std::chrono::duration<double>(clock::now() - t0).count();

  int failed = 0;
  for (const auto& r : results) {
    if (!r.pass) ++failed;
    std::printf("[%s] criterion %-3s %-52s %s\n", r.pass ? "PASS" : "FAIL", r.id.c_str(),
                r.name.c_str(), r.detail.c_str());
  }
  std::printf("%d/%zu criteria checks passed in %.1f s\n", static_cast<int>(results.size()) - failed,
              results.size(), dt);
  return failed;
}
