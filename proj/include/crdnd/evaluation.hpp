#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crdnd/attacks.hpp"
#include "crdnd/data.hpp"
#include "crdnd/model.hpp"

namespace crdnd {

struct AttackEval {
  // fraction of examples whose adversarial iterate is classified correctly
  double robust_accuracy = 0.0;
  // strict mode: an example counts only if both its clean version and its
  // adversarial iterate are classified correctly, making robust <= clean a
  // theorem rather than an empirical pattern
  double strict_robust_accuracy = 0.0;
};

struct AttackReportEntry {
  AttackSpec spec;
  AttackEval eval;
};

struct RobustnessReport {
  static constexpr int kSchemaVersion = 1;
  std::string model_id;
  std::string dataset_id;
  std::uint64_t seed = 0;
  bool deterministic = true;
  std::string timestamp;  // fixed epoch string in deterministic mode
  double clean_accuracy = 0.0;  // percent
  std::vector<AttackReportEntry> attacks;
};

// Percent of argmax-correct predictions; ties resolve to the lowest index.
double evaluate_clean(Model<float>& model, const Dataset& dataset, std::size_t batch_size = 128);

// Generate adversarial examples per batch under `spec` and measure argmax
// accuracy on them. Random starts draw from streams derived from
// (seed, "eval-attack:<name>", batch).
AttackEval evaluate_under_attack(Model<float>& model, const Dataset& dataset,
                                 const AttackSpec& spec, std::uint64_t seed,
                                 std::size_t batch_size = 128);

// Serialize to schema-versioned JSON with deterministic field order.
void generate_report(const RobustnessReport& report, const std::string& path);
RobustnessReport load_report(const std::string& path);

// One flat CSV line per attack for cross-run aggregation.
std::string report_csv_rows(const RobustnessReport& report);

}  // namespace crdnd
