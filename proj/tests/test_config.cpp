#include <doctest.h>

#include <cmath>
#include <cstring>
#include <functional>
#include <limits>
#include <random>

#include "config.hpp"
#include "errors.hpp"

using namespace bariflex;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("parses keys, numbers and lists") {
  const auto kv = KeyValueFile::parse("# head\n\nname = bariflex\nk = 0.5  \nlist = 1, 2.5, -3\nn = 7\n", "f.cfg");
  CHECK(kv.text("name") == "bariflex");
  CHECK(kv.number("k") == 0.5);
  CHECK(kv.numbers("list") == std::vector<double>{1.0, 2.5, -3.0});
  CHECK(kv.integer("n") == 7);
  CHECK(kv.has("k"));
  CHECK_FALSE(kv.has("missing"));
  CHECK(kv.number_or("missing", 4.0) == 4.0);
}

TEST_CASE("errors carry the origin and line") {
  CHECK(error_of([] { KeyValueFile::parse("a = 1\nno equals here\n", "f.cfg"); }).find("f.cfg:2:") == 0);
  CHECK(error_of([] { KeyValueFile::parse("a = 1\n = 2\n", "f.cfg"); }).find("f.cfg:2:") == 0);
  CHECK(error_of([] { KeyValueFile::parse("a = 1\n\na = 2\n", "f.cfg"); }).find("f.cfg:3:") == 0);
  const auto kv = KeyValueFile::parse("x = 1\ny = abc\nz = 1.5\n", "f.cfg");
  CHECK(error_of([&] { kv.number("y"); }).find("f.cfg:2:") == 0);
  CHECK(error_of([&] { kv.integer("z"); }).find("f.cfg:3:") == 0);
  CHECK(error_of([&] { kv.number("w"); }).find("missing key 'w'") != std::string::npos);
  CHECK_THROWS_AS(KeyValueFile::load("/nonexistent/dir/x.cfg"), ConfigError);
}

TEST_CASE("numbers round-trip exactly") {
  std::mt19937_64 rng(8);
  for (int i = 0; i < 20000; ++i) {
    std::uint64_t bits = rng();
    double v = 0.0;
    std::memcpy(&v, &bits, sizeof v);
    if (!std::isfinite(v)) continue;
    double back = 0.0;
    REQUIRE(parse_number(format_number(v), back));
    CHECK(back == v);
  }
  for (double v : {0.0, 0.1, 1.0 / 3.0, 1e-300, 4.9e-324, 6.02e23, -2.5}) {
    double back = 0.0;
    REQUIRE(parse_number(format_number(v), back));
    CHECK(back == v);
  }
  double x = 0.0;
  CHECK_FALSE(parse_number("1e999", x));
  CHECK_FALSE(parse_number("1.5x", x));
  CHECK_FALSE(parse_number("", x));
  CHECK(format_number(0.5) == "0.5");
  CHECK(format_number(40.0) == "40");
}

TEST_CASE("dump parses back") {
  KeyValueFile kv;
  kv.set("b", 0.1 + 0.2);
  kv.set("a", std::string("text value"));
  kv.set("c", std::vector<double>{1e-9, 3.0});
  const auto back = KeyValueFile::parse(kv.dump());
  CHECK(back.number("b") == 0.1 + 0.2);
  CHECK(back.text("a") == "text value");
  CHECK(back.numbers("c") == std::vector<double>{1e-9, 3.0});
  CHECK(back.dump() == kv.dump());
}

}
