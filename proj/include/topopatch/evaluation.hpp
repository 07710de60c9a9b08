#pragma once

#include <array>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "topopatch/patching.hpp"
#include "topopatch/phantom.hpp"

namespace topopatch {

// A case that is materialized on demand, so large corpora never sit in
// memory at once.
struct CaseRef {
  std::string case_id;
  std::function<Case()> load;
};

std::vector<CaseRef> phantom_corpus(std::size_t count, std::uint64_t seed, const PhantomCorpusParams& params);
// Every subdirectory of `root`, sorted by name.
std::vector<CaseRef> directory_corpus(const std::filesystem::path& root);

// Quality of one patch against the case's ground truth.
//   sensitivity / specificity: the patch window as a predictor of whole tumor
//   recall: share of each region's voxels inside the window (NaN if the
//           region is empty in this case)
struct PatchEvaluation {
  std::size_t patch_index = 0;
  Index3 origin{};
  Shape3 size;
  double tumor_fraction = 0;
  double center_distance = 0;
  double sensitivity = 0;
  double specificity = 0;
  std::array<double, 5> recall{};  // indexed like kAllRegions
  std::optional<double> roi_dice;
  std::vector<std::string> warnings;
};

struct CaseEvaluation {
  std::string case_id;
  std::vector<PatchEvaluation> patches;
  std::optional<std::string> error;
  double seconds = 0;

  // Patch with the highest whole-tumor recall (first on ties).
  const PatchEvaluation& best() const;
  // Field-wise mean over the case's patches.
  PatchEvaluation mean() const;
};

struct Aggregates {
  std::size_t cases = 0;  // successful cases
  double mean_tumor_fraction = 0;
  double median_tumor_fraction = 0;
  double mean_center_distance = 0;
  std::array<double, 5> mean_recall{};  // over cases where the region exists
};

struct StrategyReport {
  Strategy strategy = Strategy::kCca;
  std::vector<CaseEvaluation> cases;  // sorted by case_id
  std::size_t failures = 0;
  std::size_t patch_count = 0;
  double wall_time_s = 0;
  Aggregates best;  // per-case best patch
  Aggregates mean;  // per-case patch mean
};

Aggregates aggregate(const std::vector<CaseEvaluation>& cases, bool use_best);
// Recomputes the aggregates from the rows; throws Error on any mismatch > 1e-12.
void verify_aggregates(const StrategyReport& report);

struct LabelCounts {
  std::array<std::uint64_t, 4> counts{};  // labels 0, 1, 2, 4

  std::uint64_t total() const { return counts[0] + counts[1] + counts[2] + counts[3]; }
  std::uint64_t tumor() const { return counts[1] + counts[2] + counts[3]; }
  double tumor_ratio() const { return total() == 0 ? 0.0 : static_cast<double>(tumor()) / static_cast<double>(total()); }
  LabelCounts& operator+=(const LabelCounts& o);
};

LabelCounts count_labels(const SegMask3D& mask);
LabelCounts count_labels(const SegMask3D& mask, const PatchSpec& window);

struct ImbalanceCase {
  std::string case_id;
  LabelCounts before;
  std::map<Strategy, LabelCounts> after;  // summed over the strategy's patches
};

struct ImbalanceReport {
  std::vector<ImbalanceCase> cases;
  LabelCounts before;
  std::map<Strategy, LabelCounts> after;

  // after[s].tumor_ratio() / before.tumor_ratio(); 0 if there is no tumor.
  double improvement(Strategy s) const;
};

struct CorpusRun {
  std::vector<StrategyReport> reports;  // in the order requested
  ImbalanceReport imbalance;
};

struct EvaluationOptions {
  PatchingConfig patching;
  std::size_t jobs = 1;
};

// Loads each case once and runs every strategy on it. Cases run on `jobs`
// workers; results are reduced in case_id order. A case that fails to load
// or whose strategy throws is recorded as a failed row.
CorpusRun run_corpus(const std::vector<CaseRef>& cases, const std::vector<Strategy>& strategies,
                     const EvaluationOptions& options);

StrategyReport evaluate_strategy(const std::vector<CaseRef>& cases, Strategy strategy,
                                 const EvaluationOptions& options);

// Evaluates patches already generated for `c`.
CaseEvaluation evaluate_patches(const Case& c, const std::vector<Patch>& patches);

std::string strategy_report_csv(const StrategyReport& report);
std::string comparison_csv(const std::vector<StrategyReport>& reports, bool include_timing = true);
std::string comparison_json(const std::vector<StrategyReport>& reports, bool include_timing = true);
std::string imbalance_json(const ImbalanceReport& report);

// report_<strategy>.csv, comparison.csv, comparison.json, imbalance.json.
void write_reports(const CorpusRun& run, const std::filesystem::path& dir, bool include_timing = true);

}  // namespace topopatch
