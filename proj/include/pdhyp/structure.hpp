#pragma once

#include "pdhyp/sampling.hpp"
#include "pdhyp/system.hpp"

#include "json.hpp"

#include <map>
#include <string>
#include <vector>

namespace pdhyp {

enum class Status { Pass, Fail, Skipped };
std::string to_string(Status s);
Status status_from_string(const std::string& s);

struct Verdict {
  std::string name;
  Status status = Status::Skipped;
  double value = 0.0;      // measured residual, margin or constant
  double threshold = 0.0;  // pass limit applied to value
  bool vacuous = false;
  std::string note;
  Vec witness_state;
  Vec witness_direction;
  int witness_family = -1;
};

struct CheckOptions {
  SamplePlan plan;
  DerivativeMode mode = DerivativeMode::FiniteDifference;
  int isotropy_family = 0;  // family tested by B
};

struct StructureReport {
  std::string system;
  std::string mode;
  SamplePlan plan;
  std::vector<Verdict> verdicts;
  std::vector<std::string> implications;
  std::map<std::string, double> constants;  // c_e, det_theta_D, kawashima_margin, certified_radius
  long out_of_domain_calls = 0;

  const Verdict& get(const std::string& name) const;
  bool all_passed() const;  // skipped entries do not count as failures
};

Verdict check_A1(const SystemSpec& sys, const CheckOptions& opt = {});
Verdict check_A2(const SystemSpec& sys, const CheckOptions& opt = {});
Verdict check_A3(const SystemSpec& sys, const CheckOptions& opt = {});
Verdict check_A4(const SystemSpec& sys, const CheckOptions& opt = {});
Verdict check_B(const SystemSpec& sys, const CheckOptions& opt = {});
Verdict check_WD1(const SystemSpec& sys, const CheckOptions& opt = {});
Verdict check_WD2(const SystemSpec& sys, const CheckOptions& opt = {});
Verdict check_D1(const SystemSpec& sys, const CheckOptions& opt = {});
Verdict check_D2(const SystemSpec& sys, const CheckOptions& opt = {});
Verdict check_D3(const SystemSpec& sys, const CheckOptions& opt = {});

// Runs every check on the normalized system. A vacuous A3 is reported as a
// failure here: the report certifies dissipation, which needs Q != 0.
StructureReport run_full_report(const SystemSpec& sys, const CheckOptions& opt = {});

nlohmann::json to_json(const StructureReport& r);
StructureReport structure_report_from_json(const nlohmann::json& j);

nlohmann::json vec_to_json(const Vec& v);
Vec vec_from_json(const nlohmann::json& j);
nlohmann::json mat_to_json(const Mat& m);
Mat mat_from_json(const nlohmann::json& j);

}  // namespace pdhyp
