#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sim.hpp"

namespace bariflex::experiments {

// Compliance rig --------------------------------------------------------------

struct ComplianceRow {
  std::string fixture;
  int trial = 0;
  double displacement_mm = 0.0;
  double force_N = 0.0;
  bool operator==(const ComplianceRow&) const = default;
};

struct ComplianceOptions {
  int trials = 6;
  double max_displacement = 0.040;  // [m]
  double step = 0.001;              // [m]
  double force_cap = 60.0;          // [N]
};

/// Presses every fixture `trials` times, returning the finger to its initial
/// position between trials. A capped curve stops at the first sample at or
/// above the cap.
std::vector<ComplianceRow> run_compliance(const std::vector<sim::GripperFixture>& fixtures,
                                          const ComplianceOptions& options = {});

/// Force of one fixture/trial at a displacement; the cap when the curve
/// stopped early, NaN when the displacement was never reached.
double force_at(const std::vector<ComplianceRow>& rows, const std::string& fixture, int trial,
                double displacement_mm, double force_cap = 60.0);

// Durability ------------------------------------------------------------------

struct DurabilityRow {
  int cycle = 0;
  double peak_force_N = 0.0;
  double rest_drift_m = 0.0;
  bool operator==(const DurabilityRow&) const = default;
};

/// Repeated presses to `displacement`, each starting where the last one left
/// the finger.
std::vector<DurabilityRow> run_durability(const sim::GripperFixture& f, int cycles = 200,
                                          double displacement = 0.040);

// Grasp matrix ----------------------------------------------------------------

struct GraspRow {
  std::string fixture;
  std::string object;
  double dx_mm = 0.0;
  double dy_mm = 0.0;
  double theta_deg = 0.0;
  bool success = false;
  std::string reason;  // failure name, "none" on success
  bool operator==(const GraspRow&) const = default;
};

struct GraspMatrixOptions {
  double offset = 0.040;                                // [m]
  std::vector<double> orientations_deg = {0, 15, 30, 45};
  int jobs = 1;
};

/// Centre plus +-offset along x and along y.
std::vector<sim::GraspOffset> grasp_positions(double offset);

/// Every fixture x object x position x orientation; rows in that order
/// whatever the job count.
std::vector<GraspRow> run_grasp_matrix(const std::vector<sim::GripperFixture>& fixtures,
                                       const std::vector<contact::ObjectShape2D>& objects,
                                       const GraspMatrixOptions& options = {});

/// Successes for a fixture, optionally restricted to one object.
int grasp_successes(const std::vector<GraspRow>& rows, const std::string& fixture, const std::string& object = "");

/// Successes for a fixture at one position offset, over all objects and
/// orientations.
int grasp_successes_at(const std::vector<GraspRow>& rows, const std::string& fixture, double dx_mm, double dy_mm);

// Precision -------------------------------------------------------------------

struct PrecisionOptions {
  int presses = 25;
  double indicator_resolution = 25.4e-6;  // [m]
  double target = 3.7597e-3;              // nominal press depth [m]
  double torque_noise = 0.005;            // relative, uniform
  int encoder_noise_counts = 1;           // uniform on the command
  double indicator_preload = 0.5;         // [N]
  double indicator_rate = 50.0;           // [N/m]
  std::uint64_t seed = 0;
};

struct PrecisionResult {
  std::vector<double> readings_mm;
  double mean_mm = 0.0;
  double std_mm = 0.0;
  double max_dev_mm = 0.0;  // largest |reading - mean|
  double command = 0.0;     // motor angle commanded for the nominal depth [rad]
};

/// Fingertip displacement reached by one position-controlled press against
/// the dial indicator, unquantized [m].
double press_indicator(const sim::GripperFixture& f, const PrecisionOptions& options, double command,
                       double torque_scale);

PrecisionResult run_precision(const sim::GripperFixture& f, const PrecisionOptions& options = {});

// Speed -----------------------------------------------------------------------

/// Open-to-closed duration of the commanded motion [s].
double run_speed(const sim::GripperFixture& f);

// CSV -------------------------------------------------------------------------

std::string compliance_csv(const std::vector<ComplianceRow>& rows);
std::string durability_csv(const std::vector<DurabilityRow>& rows);
std::string grasp_csv(const std::vector<GraspRow>& rows);
std::string precision_csv(const PrecisionResult& r);
std::string speed_csv(const std::vector<std::pair<std::string, double>>& rows);

std::vector<ComplianceRow> parse_compliance_csv(const std::string& text);
std::vector<DurabilityRow> parse_durability_csv(const std::string& text);
std::vector<GraspRow> parse_grasp_csv(const std::string& text);
std::vector<double> parse_precision_csv(const std::string& text);
std::vector<std::pair<std::string, double>> parse_speed_csv(const std::string& text);

// Calibration -----------------------------------------------------------------

struct ReferencePoint {
  std::string fixture;
  double displacement_mm = 0.0;
  double force_N = 0.0;
};

/// CSV with columns fixture,displacement_mm,force_N; `#` lines are comments.
std::vector<ReferencePoint> load_reference(const std::string& path);
std::vector<ReferencePoint> parse_reference(const std::string& text, const std::string& origin = "<string>");

struct CalibrationResult {
  std::string fixture;
  std::string parameter;  // "spring_stiffness" or "modulus_scale"
  double value = 0.0;
  double rms_N = 0.0;     // residual over the reference points
};

/// Fits the free elastic parameter of each fixture with reference points:
/// the fingertip spring of bariflex, the modulus scale of the Fin-Ray
/// fingers. The rigid baseline has nothing to fit and is left as is.
std::vector<CalibrationResult> calibrate(std::vector<sim::GripperFixture>& fixtures,
                                         const std::vector<ReferencePoint>& reference);

std::string calibration_csv(const std::vector<CalibrationResult>& rows);

}  // namespace bariflex::experiments
