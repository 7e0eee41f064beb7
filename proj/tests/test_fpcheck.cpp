#include "mfg/fpcheck.hpp"

#include <doctest.h>

#include <cmath>

using namespace mfg;

TEST_CASE("property battery passes and is deterministic")
{
  auto const a = run_all(20240607);
  auto const b = run_all(20240607);
  REQUIRE(a.size() == b.size());
  CHECK(a.size() >= 18);
  for (std::size_t i = 0; i < a.size(); ++i) {
    INFO(a[i].name << ": worst " << a[i].worst << " tol " << a[i].tol << " at " << a[i].witness);
    CHECK(a[i].pass);
    CHECK(a[i].name == b[i].name);
    CHECK(a[i].worst == b[i].worst);
    if (i > 0) { CHECK(a[i - 1].name < a[i].name); }
  }
  auto const j = to_json(a);
  CHECK(j.size() == a.size());
  CHECK(format_text(a).find(a[0].name) != std::string::npos);
}

TEST_CASE("manufactured Fokker-Planck error decreases at second order")
{
  double const e1 = manufactured_fp_error(16), e2 = manufactured_fp_error(32);
  CHECK(e2 < e1);
  CHECK(std::log2(e1 / e2) >= 1.9);
}
