#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <bariflex/bariflex.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

namespace {

struct Fixture {
  bf_fixture* f = nullptr;
  explicit Fixture(const char* spec) { REQUIRE(bf_fixture_open(spec, nullptr, &f) == BF_OK); }
  ~Fixture() { bf_fixture_free(f); }
};

struct Report {
  bf_report* r = nullptr;
  ~Report() { bf_report_free(r); }
  double metric(const char* name) const {
    double v = std::nan("");
    CHECK(bf_report_metric(r, name, &v) == BF_OK);
    return v;
  }
  std::string file(const std::string& name) const {
    for (size_t i = 0; i < bf_report_file_count(r); ++i)
      if (name == bf_report_file_name(r, i)) return bf_report_file_text(r, i);
    return "";
  }
};

}  // namespace

TEST_SUITE("capi") {

TEST_CASE("library metadata") {
  CHECK(std::string(bf_version()).size() > 0);
  CHECK(std::string(bf_status_name(BF_OK)) != std::string(bf_status_name(BF_CONFIG_ERROR)));
  REQUIRE(bf_builtin_fixture_count() == 4);
  CHECK(std::string(bf_builtin_fixture_name(0)) == "bariflex");
  CHECK(bf_builtin_fixture_name(99) == nullptr);
  CHECK(std::filesystem::is_directory(bf_default_fixture_dir()));
  CHECK(std::filesystem::is_regular_file(std::filesystem::path(bf_default_data_dir()) / "compliance_reference.csv"));
}

TEST_CASE("errors map to status codes and messages") {
  bf_fixture* f = nullptr;
  CHECK(bf_fixture_open(nullptr, nullptr, &f) == BF_INVALID_ARGUMENT);
  CHECK(std::string(bf_last_error()).size() > 0);
  CHECK(bf_fixture_open("no_such_gripper", nullptr, &f) == BF_CONFIG_ERROR);
  CHECK(f == nullptr);
  CHECK(std::string(bf_last_error()).find("no_such_gripper") != std::string::npos);
  CHECK(bf_fixture_open("default", nullptr, &f) == BF_OK);
  CHECK(std::string(bf_last_error()).empty());
  CHECK(std::string(bf_fixture_name(f)) == "bariflex");
  bf_report* r = nullptr;
  const bf_fixture* one[] = {f};
  CHECK(bf_run_compliance(one, 1, 0, &r) == BF_INVALID_ARGUMENT);
  CHECK(r == nullptr);
  CHECK(bf_run_speed(nullptr, 1, &r) == BF_INVALID_ARGUMENT);
  bf_fixture_free(f);
  // freeing null handles is a no-op
  bf_fixture_free(nullptr);
  bf_report_free(nullptr);
  bf_state_free(nullptr);
  bf_objects_free(nullptr);
}

TEST_CASE("state stepping") {
  Fixture fx("bariflex");
  bf_state* s = nullptr;
  REQUIRE(bf_state_create(fx.f, 0.0, &s) == BF_OK);
  double open = 0.0;
  CHECK(bf_state_aperture(fx.f, s, &open) == BF_OK);
  CHECK(open == doctest::Approx(0.2).epsilon(0.005));
  for (int i = 0; i < 250; ++i) REQUIRE(bf_state_step(fx.f, s, BF_CMD_CLOSE, 0.0, 1e-3) == BF_OK);
  double closed = 1.0;
  double phi = 0.0;
  CHECK(bf_state_aperture(fx.f, s, &closed) == BF_OK);
  CHECK(bf_state_motor_angle(s, &phi) == BF_OK);
  CHECK(closed < 0.002);
  CHECK(phi > 2.0);
  CHECK(bf_state_step(fx.f, s, BF_CMD_CLOSE, 0.0, -1.0) == BF_INVALID_ARGUMENT);
  bf_state_free(s);
}

TEST_CASE("speed report") {
  Fixture fx("bariflex");
  const bf_fixture* one[] = {fx.f};
  Report rep;
  REQUIRE(bf_run_speed(one, 1, &rep.r) == BF_OK);
  CHECK(bf_report_passed(rep.r) == 1);
  CHECK(rep.metric("bariflex.duration_s") == doctest::Approx(0.180).epsilon(0.03));
  CHECK(rep.file("speed.csv").rfind("fixture,", 0) == 0);
  double v = 0.0;
  CHECK(bf_report_metric(rep.r, "nope", &v) == BF_INVALID_ARGUMENT);
  CHECK(std::string(bf_report_summary(rep.r)).find("PASS") == 0);
}

TEST_CASE("precision report is deterministic per seed") {
  Fixture fx("bariflex");
  Report a;
  Report b;
  REQUIRE(bf_run_precision(fx.f, 3, &a.r) == BF_OK);
  REQUIRE(bf_run_precision(fx.f, 3, &b.r) == BF_OK);
  CHECK(a.file("precision_bariflex.csv") == b.file("precision_bariflex.csv"));
  CHECK(a.metric("std_mm") <= 0.03);
  CHECK(bf_report_passed(a.r) == 1);
}

TEST_CASE("verify report") {
  Fixture fx("finray95");
  Report rep;
  REQUIRE(bf_verify(fx.f, 0, &rep.r) == BF_OK);
  CHECK(bf_report_passed(rep.r) == 1);
  CHECK(rep.file("verify_finray95.csv").size() > 0);
}

TEST_CASE("fixture and object files") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "bariflex_capi";
  fs::remove_all(dir);
  fs::create_directories(dir);
  Fixture fx("finray87");
  REQUIRE(bf_fixture_save(fx.f, dir.c_str()) == BF_OK);
  bf_fixture* back = nullptr;
  REQUIRE(bf_fixture_open("finray87", dir.c_str(), &back) == BF_OK);
  CHECK(std::string(bf_fixture_name(back)) == "finray87");
  bf_fixture_free(back);

  bf_objects* objs = nullptr;
  REQUIRE(bf_objects_open(nullptr, &objs) == BF_OK);
  CHECK(bf_objects_count(objs) == 5);
  const std::string path = (dir / "objects.cfg").string();
  REQUIRE(bf_objects_save(objs, path.c_str()) == BF_OK);
  bf_objects* again = nullptr;
  REQUIRE(bf_objects_open(path.c_str(), &again) == BF_OK);
  CHECK(bf_objects_count(again) == 5);
  bf_objects_free(again);
  bf_objects_free(objs);
  CHECK(bf_objects_open((dir / "missing.cfg").c_str(), &objs) != BF_OK);
  fs::remove_all(dir);
}

}
