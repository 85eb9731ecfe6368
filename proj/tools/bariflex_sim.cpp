// bariflex-sim: command-line front end over the C API.

#include <bariflex/bariflex.h>

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

enum Exit { kOk = 0, kBoundViolated = 1, kConfigError = 2 };

struct Failure {
  int code;
  std::string message;
};

void check(bf_status s, const std::string& what) {
  if (s == BF_OK) return;
  const bool config = s == BF_CONFIG_ERROR || s == BF_INVALID_ARGUMENT || s == BF_IO_ERROR;
  throw Failure{config ? kConfigError : kBoundViolated,
                what + ": " + bf_status_name(s) + ": " + bf_last_error()};
}

struct FixtureDeleter {
  void operator()(bf_fixture* f) const { bf_fixture_free(f); }
};
struct ReportDeleter {
  void operator()(bf_report* r) const { bf_report_free(r); }
};
using FixturePtr = std::unique_ptr<bf_fixture, FixtureDeleter>;
using ReportPtr = std::unique_ptr<bf_report, ReportDeleter>;

struct Options {
  std::string fixture;
  std::string fixture_dir = bf_default_fixture_dir();
  std::string out = "results";
  std::uint64_t seed = 0;
  int jobs = 1;
  int trials = 6;
  int cycles = 200;
  std::string objects;
  std::string reference;
  std::string scenario;
};

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// "all" expands to the four fixtures; otherwise a comma-separated list of
// names or bundle paths.
std::vector<FixturePtr> open_fixtures(const Options& o, const std::string& fallback) {
  std::vector<std::string> specs;
  const std::string spec = o.fixture.empty() ? fallback : o.fixture;
  if (spec == "all") {
    for (size_t i = 0; i < bf_builtin_fixture_count(); ++i) specs.emplace_back(bf_builtin_fixture_name(i));
  } else {
    specs = split_list(spec);
  }
  if (specs.empty()) throw Failure{kConfigError, "no fixture given"};
  std::vector<FixturePtr> out;
  for (const auto& s : specs) {
    bf_fixture* f = nullptr;
    check(bf_fixture_open(s.c_str(), o.fixture_dir.c_str(), &f), "fixture '" + s + "'");
    out.emplace_back(f);
  }
  return out;
}

std::vector<const bf_fixture*> raw(const std::vector<FixturePtr>& fs) {
  std::vector<const bf_fixture*> out;
  for (const auto& f : fs) out.push_back(f.get());
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Failure{kConfigError, "cannot write " + path.string()};
  out << text;
}

// Writes the report files, prints the summary and maps the verdict.
int finish(const Options& o, bf_report* r) {
  std::error_code ec;
  fs::create_directories(o.out, ec);
  if (ec) throw Failure{kConfigError, "cannot create " + o.out + ": " + ec.message()};
  for (size_t i = 0; i < bf_report_file_count(r); ++i) {
    const fs::path p = fs::path(o.out) / bf_report_file_name(r, i);
    write_file(p, bf_report_file_text(r, i));
    std::cout << "wrote " << p.string() << "\n";
  }
  std::cout << bf_report_summary(r);
  return bf_report_passed(r) ? kOk : kBoundViolated;
}

int run_combined(const Options& o, const std::vector<FixturePtr>& fs,
                 bf_status (*one)(const bf_fixture*, std::uint64_t, bf_report**)) {
  int code = kOk;
  for (const auto& f : fs) {
    bf_report* r = nullptr;
    check(one(f.get(), o.seed, &r), bf_fixture_name(f.get()));
    ReportPtr hold(r);
    code = std::max(code, finish(o, r));
  }
  return code;
}

int cmd_synthesize(const Options& o) {
  bf_report* r = nullptr;
  check(bf_synthesize(o.seed, &r), "synthesis");
  ReportPtr hold(r);
  const int code = finish(o, r);
  for (size_t i = 0; i < bf_builtin_fixture_count(); ++i) {
    bf_fixture* f = nullptr;
    check(bf_fixture_open(bf_builtin_fixture_name(i), nullptr, &f), "built-in fixture");
    FixturePtr fx(f);
    check(bf_fixture_save(f, o.out.c_str()), "saving fixture");
    std::cout << "wrote " << (fs::path(o.out) / (std::string(bf_fixture_name(f)) + ".fixture")).string() << "\n";
  }
  return code;
}

int cmd_compliance(const Options& o) {
  const auto fs = open_fixtures(o, "all");
  const auto ptrs = raw(fs);
  bf_report* r = nullptr;
  check(bf_run_compliance(ptrs.data(), ptrs.size(), o.trials, &r), "compliance");
  ReportPtr hold(r);
  return finish(o, r);
}

int cmd_durability(const Options& o) {
  int code = kOk;
  for (const auto& f : open_fixtures(o, "default")) {
    bf_report* r = nullptr;
    check(bf_run_durability(f.get(), o.cycles, &r), "durability");
    ReportPtr hold(r);
    code = std::max(code, finish(o, r));
  }
  return code;
}

int cmd_grasp_matrix(const Options& o) {
  const auto fs = open_fixtures(o, "all");
  const auto ptrs = raw(fs);
  bf_objects* objs = nullptr;
  std::string path = o.objects;
  if (path.empty() && fs::is_regular_file(fs::path(o.fixture_dir) / "objects.cfg")) {
    path = (fs::path(o.fixture_dir) / "objects.cfg").string();
  }
  check(bf_objects_open(path.empty() ? nullptr : path.c_str(), &objs), "objects");
  std::unique_ptr<bf_objects, void (*)(bf_objects*)> hold_objs(objs, bf_objects_free);
  bf_report* r = nullptr;
  check(bf_run_grasp_matrix(ptrs.data(), ptrs.size(), objs, o.jobs, &r), "grasp matrix");
  ReportPtr hold(r);
  return finish(o, r);
}

int cmd_precision(const Options& o) { return run_combined(o, open_fixtures(o, "default"), bf_run_precision); }

int cmd_speed(const Options& o) {
  const auto fs = open_fixtures(o, "default");
  const auto ptrs = raw(fs);
  bf_report* r = nullptr;
  check(bf_run_speed(ptrs.data(), ptrs.size(), &r), "speed");
  ReportPtr hold(r);
  return finish(o, r);
}

int cmd_train(const Options& o) {
  FixturePtr f;
  if (o.scenario.empty()) f = std::move(open_fixtures(o, "default").front());
  bf_report* r = nullptr;
  check(bf_run_training(f.get(), o.scenario.empty() ? nullptr : o.scenario.c_str(), o.fixture_dir.c_str(), o.seed, &r),
        "training");
  ReportPtr hold(r);
  return finish(o, r);
}

int cmd_calibrate(const Options& o) {
  auto fs = open_fixtures(o, "all");
  std::vector<bf_fixture*> ptrs;
  for (auto& f : fs) ptrs.push_back(f.get());
  const std::string ref =
      o.reference.empty() ? (fs::path(bf_default_data_dir()) / "compliance_reference.csv").string() : o.reference;
  bf_report* r = nullptr;
  check(bf_calibrate(ptrs.data(), ptrs.size(), ref.c_str(), &r), "calibration");
  ReportPtr hold(r);
  const int code = finish(o, r);
  for (auto* f : ptrs) {
    check(bf_fixture_save(f, o.out.c_str()), "saving fixture");
    std::cout << "wrote " << (fs::path(o.out) / (std::string(bf_fixture_name(f)) + ".fixture")).string() << "\n";
  }
  return code;
}

int cmd_verify(const Options& o) { return run_combined(o, open_fixtures(o, "all"), bf_verify); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Planar quasistatic simulator of the BaRiFlex gripper and its baselines.", "bariflex-sim"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--fixture", o.fixture, "fixture name, bundle path, 'default' or 'all' (comma-separated list)");
  app.add_option("--fixture-dir", o.fixture_dir, "directory searched for <name>.fixture bundles")
      ->capture_default_str();
  app.add_option("--out", o.out, "output directory")->capture_default_str();
  app.add_option("--seed", o.seed, "random seed")->capture_default_str();
  app.add_option("--jobs", o.jobs, "worker threads for independent trials")->check(CLI::PositiveNumber)
      ->capture_default_str();

  using Cmd = int (*)(const Options&);
  std::vector<std::pair<CLI::App*, Cmd>> cmds;
  auto add = [&](const char* name, const char* help, Cmd fn) {
    CLI::App* sub = app.add_subcommand(name, help);
    cmds.emplace_back(sub, fn);
    return sub;
  };
  add("synthesize", "synthesize the linkage and write the fixture bundles", cmd_synthesize);
  add("compliance", "press-rig force curves", cmd_compliance)
      ->add_option("--trials", o.trials, "presses per fixture")->capture_default_str();
  add("durability", "repeated 40 mm presses", cmd_durability)
      ->add_option("--cycles", o.cycles, "press cycles")->capture_default_str();
  add("grasp-matrix", "5 objects x 5 positions x 4 orientations per fixture", cmd_grasp_matrix)
      ->add_option("--objects", o.objects, "object set file (default: objects.cfg in the fixture dir, else built-in)");
  add("precision", "25 presses against the dial indicator", cmd_precision);
  add("speed", "open-to-closed duration", cmd_speed);
  add("train", "UCB grasp learning with table collisions", cmd_train)
      ->add_option("--scenario", o.scenario, "scenario file (default: built-in cube scenario)");
  add("calibrate", "fit the elastic parameters to reference curves", cmd_calibrate)
      ->add_option("--reference", o.reference, "reference CSV (default: data/compliance_reference.csv)");
  add("verify", "invariant suite of every module", cmd_verify);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    std::cerr << app.help();
    return kConfigError;
  }

  try {
    for (auto& [sub, fn] : cmds) {
      if (sub->parsed()) return fn(o);
    }
  } catch (const Failure& f) {
    std::cerr << "bariflex-sim: " << f.message << "\n";
    return f.code;
  } catch (const std::exception& e) {
    std::cerr << "bariflex-sim: " << e.what() << "\n";
    return kConfigError;
  }
  return kConfigError;
}
