#include "topopatch/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "json.hpp"

#include "topopatch/metrics.hpp"

namespace topopatch {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

int label_slot(std::uint8_t label) {
  switch (label) {
    case 0: return 0;
    case 1: return 1;
    case 2: return 2;
    default: return 3;
  }
}

std::uint64_t region_count(const LabelCounts& c, Region r) {
  std::uint64_t n = 0;
  for (std::uint8_t label : {1, 2, 4}) {
    if (region_contains(r, label)) n += c.counts[static_cast<std::size_t>(label_slot(label))];
  }
  return n;
}

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return kNaN;
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return kNaN;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool close(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  return std::abs(a - b) <= 1e-12;
}

ordered_json json_num(double v) { return std::isnan(v) ? ordered_json(nullptr) : ordered_json(v); }

}  // namespace

// ---- corpora ---------------------------------------------------------------------

std::vector<CaseRef> phantom_corpus(std::size_t count, std::uint64_t seed, const PhantomCorpusParams& params) {
  std::vector<CaseRef> out;
  for (std::size_t i = 0; i < count; ++i) {
    const PhantomParams p = corpus_phantom_params(seed, i, params);
    const std::string id = phantom_case_id(i);
    const std::uint64_t noise_seed = case_seed(seed, id);
    out.push_back({id, [p, id, noise_seed] { return generate_phantom(noise_seed, p).to_case(id); }});
  }
  return out;
}

std::vector<CaseRef> directory_corpus(const fs::path& root) {
  if (!fs::is_directory(root)) throw LoadError("input directory not found: " + root.string());
  std::vector<fs::path> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory()) dirs.push_back(entry.path());
  }
  std::sort(dirs.begin(), dirs.end());
  std::vector<CaseRef> out;
  for (const auto& d : dirs) out.push_back({d.filename().string(), [d] { return load_case(d); }});
  return out;
}

// ---- per-patch evaluation ---------------------------------------------------------

LabelCounts& LabelCounts::operator+=(const LabelCounts& o) {
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += o.counts[i];
  return *this;
}

LabelCounts count_labels(const SegMask3D& mask) {
  LabelCounts c;
  for (auto v : mask.labels().values()) ++c.counts[static_cast<std::size_t>(label_slot(v))];
  return c;
}

LabelCounts count_labels(const SegMask3D& mask, const PatchSpec& w) {
  if (mask.shape() != w.bounds()) throw ShapeError("label count window does not match the mask");
  LabelCounts c;
  const auto& labels = mask.labels();
  for (std::size_t z = w.origin()[2]; z < w.origin()[2] + w.size().nz; ++z) {
    for (std::size_t y = w.origin()[1]; y < w.origin()[1] + w.size().ny; ++y) {
      const std::uint8_t* row = &labels(w.origin()[0], y, z);
      for (std::size_t x = 0; x < w.size().nx; ++x) ++c.counts[static_cast<std::size_t>(label_slot(row[x]))];
    }
  }
  return c;
}

CaseEvaluation evaluate_patches(const Case& c, const std::vector<Patch>& patches) {
  if (!c.mask) throw ConfigError("case " + c.case_id + " has no ground-truth mask");
  CaseEvaluation ce;
  ce.case_id = c.case_id;
  const SegMask3D& gt = *c.mask;
  const LabelCounts total = count_labels(gt);
  std::optional<Coord3> tumor_center;
  if (total.tumor() != 0) tumor_center = whole_tumor_centroid(gt);

  for (std::size_t k = 0; k < patches.size(); ++k) {
    const Patch& p = patches[k];
    const PatchSpec& spec = p.spec;
    const LabelCounts inside = count_labels(gt, spec);
    PatchEvaluation pe;
    pe.patch_index = k;
    pe.origin = spec.origin();
    pe.size = spec.size();
    pe.tumor_fraction = p.mask_crop ? tumor_fraction(*p.mask_crop) : inside.tumor_ratio();
    pe.roi_dice = p.provenance.roi_dice;
    pe.warnings = p.provenance.warnings;

    ConfusionCounts cc;
    cc.tp = inside.tumor();
    cc.fp = inside.counts[0];
    cc.fn = total.tumor() - inside.tumor();
    cc.tn = total.counts[0] - inside.counts[0];
    pe.sensitivity = cc.tp + cc.fn == 0 ? kNaN : sensitivity(cc);
    pe.specificity = cc.tn + cc.fp == 0 ? kNaN : specificity(cc);
    if (tumor_center) {
      const Coord3 m = spec.center();
      const Coord3& t = *tumor_center;
      pe.center_distance =
          std::sqrt((t[0] - m[0]) * (t[0] - m[0]) + (t[1] - m[1]) * (t[1] - m[1]) + (t[2] - m[2]) * (t[2] - m[2]));
    } else {
      pe.center_distance = kNaN;
    }
    for (std::size_t r = 0; r < kAllRegions.size(); ++r) {
      const std::uint64_t all = region_count(total, kAllRegions[r]);
      pe.recall[r] = all == 0 ? kNaN
                              : static_cast<double>(region_count(inside, kAllRegions[r])) / static_cast<double>(all);
    }
    ce.patches.push_back(std::move(pe));
  }
  return ce;
}

const PatchEvaluation& CaseEvaluation::best() const {
  if (patches.empty()) throw Error("case " + case_id + " has no patches");
  const PatchEvaluation* best = &patches.front();
  for (const auto& p : patches) {
    // NaN recall (no tumor) never replaces the first patch.
    if (p.recall[0] > best->recall[0]) best = &p;
  }
  return *best;
}

PatchEvaluation CaseEvaluation::mean() const {
  if (patches.empty()) throw Error("case " + case_id + " has no patches");
  PatchEvaluation m = patches.front();
  const auto n = static_cast<double>(patches.size());
  const auto avg = [&](auto field) {
    double s = 0;
    for (const auto& p : patches) s += field(p);
    return s / n;
  };
  m.tumor_fraction = avg([](const PatchEvaluation& p) { return p.tumor_fraction; });
  m.center_distance = avg([](const PatchEvaluation& p) { return p.center_distance; });
  m.sensitivity = avg([](const PatchEvaluation& p) { return p.sensitivity; });
  m.specificity = avg([](const PatchEvaluation& p) { return p.specificity; });
  for (std::size_t r = 0; r < m.recall.size(); ++r) {
    m.recall[r] = avg([r](const PatchEvaluation& p) { return p.recall[r]; });
  }
  return m;
}

Aggregates aggregate(const std::vector<CaseEvaluation>& cases, bool use_best) {
  Aggregates a;
  std::vector<double> tf, cd;
  std::array<std::vector<double>, 5> rec;
  for (const auto& c : cases) {
    if (c.error || c.patches.empty()) continue;
    ++a.cases;
    const PatchEvaluation pe = use_best ? c.best() : c.mean();
    tf.push_back(pe.tumor_fraction);
    if (!std::isnan(pe.center_distance)) cd.push_back(pe.center_distance);
    for (std::size_t r = 0; r < rec.size(); ++r) {
      if (!std::isnan(pe.recall[r])) rec[r].push_back(pe.recall[r]);
    }
  }
  a.mean_tumor_fraction = mean_of(tf);
  a.median_tumor_fraction = median_of(tf);
  a.mean_center_distance = mean_of(cd);
  for (std::size_t r = 0; r < rec.size(); ++r) a.mean_recall[r] = mean_of(rec[r]);
  return a;
}

void verify_aggregates(const StrategyReport& report) {
  for (const bool use_best : {true, false}) {
    const Aggregates fresh = aggregate(report.cases, use_best);
    const Aggregates& stored = use_best ? report.best : report.mean;
    bool ok = fresh.cases == stored.cases && close(fresh.mean_tumor_fraction, stored.mean_tumor_fraction) &&
              close(fresh.median_tumor_fraction, stored.median_tumor_fraction) &&
              close(fresh.mean_center_distance, stored.mean_center_distance);
    for (std::size_t r = 0; r < fresh.mean_recall.size(); ++r) ok = ok && close(fresh.mean_recall[r], stored.mean_recall[r]);
    if (!ok) throw Error("aggregates of strategy " + std::string(strategy_name(report.strategy)) + " do not match their rows");
  }
}

double ImbalanceReport::improvement(Strategy s) const {
  const auto it = after.find(s);
  if (it == after.end() || before.tumor_ratio() == 0.0) return 0.0;
  return it->second.tumor_ratio() / before.tumor_ratio();
}

// ---- corpus driver ---------------------------------------------------------------------

CorpusRun run_corpus(const std::vector<CaseRef>& cases_in, const std::vector<Strategy>& strategies,
                     const EvaluationOptions& options) {
  std::vector<CaseRef> cases = cases_in;
  std::sort(cases.begin(), cases.end(), [](const CaseRef& a, const CaseRef& b) { return a.case_id < b.case_id; });

  const std::size_t n = cases.size();
  std::vector<std::vector<CaseEvaluation>> rows(strategies.size(), std::vector<CaseEvaluation>(n));
  std::vector<ImbalanceCase> imbalance(n);

  const auto process = [&](std::size_t i) {
    const std::string& id = cases[i].case_id;
    imbalance[i].case_id = id;
    std::optional<Case> c;
    std::string load_error;
    try {
      c = cases[i].load();
      if (!c->mask) throw ConfigError("case " + id + " has no ground-truth mask");
      imbalance[i].before = count_labels(*c->mask);
    } catch (const std::exception& e) {
      load_error = e.what();
      c.reset();
    }
    for (std::size_t s = 0; s < strategies.size(); ++s) {
      CaseEvaluation& ce = rows[s][i];
      ce.case_id = id;
      if (!c) {
        ce.error = load_error;
        continue;
      }
      const auto t0 = std::chrono::steady_clock::now();
      try {
        const auto patches = generate_patches(*c, strategies[s], options.patching);
        ce = evaluate_patches(*c, patches);
        LabelCounts after;
        for (const auto& p : patches) after += count_labels(*c->mask, p.spec);
        imbalance[i].after[strategies[s]] = after;
      } catch (const std::exception& e) {
        ce = CaseEvaluation{};
        ce.case_id = id;
        ce.error = e.what();
      }
      ce.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    }
  };

  const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) process(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < jobs; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) process(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  CorpusRun run;
  for (std::size_t s = 0; s < strategies.size(); ++s) {
    StrategyReport r;
    r.strategy = strategies[s];
    r.cases = std::move(rows[s]);
    for (const auto& c : r.cases) {
      r.failures += c.error.has_value();
      r.patch_count += c.patches.size();
      r.wall_time_s += c.seconds;
    }
    r.best = aggregate(r.cases, true);
    r.mean = aggregate(r.cases, false);
    run.reports.push_back(std::move(r));
  }
  for (auto& ic : imbalance) {
    run.imbalance.before += ic.before;
    for (const auto& [s, counts] : ic.after) run.imbalance.after[s] += counts;
  }
  run.imbalance.cases = std::move(imbalance);
  return run;
}

StrategyReport evaluate_strategy(const std::vector<CaseRef>& cases, Strategy strategy, const EvaluationOptions& options) {
  return std::move(run_corpus(cases, {strategy}, options).reports.front());
}

// ---- serialization --------------------------------------------------------------------------

std::string strategy_report_csv(const StrategyReport& report) {
  std::ostringstream out;
  out << "case_id,patch_index,x0,y0,z0,sx,sy,sz,tumor_fraction,center_distance,sensitivity,specificity";
  for (Region r : kAllRegions) out << ",recall_" << region_name(r);
  out << ",roi_dice,warnings,error\n";
  for (const auto& c : report.cases) {
    if (c.error) {
      std::string msg = *c.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      std::replace(msg.begin(), msg.end(), '\n', ' ');
      out << c.case_id << ",,,,,,,,,,,,,,,,,,," << msg << '\n';
      continue;
    }
    for (const auto& p : c.patches) {
      out << c.case_id << ',' << p.patch_index << ',' << p.origin[0] << ',' << p.origin[1] << ',' << p.origin[2] << ','
          << p.size.nx << ',' << p.size.ny << ',' << p.size.nz << ',' << num(p.tumor_fraction) << ','
          << num(p.center_distance) << ',' << num(p.sensitivity) << ',' << num(p.specificity);
      for (double r : p.recall) out << ',' << num(r);
      out << ',' << (p.roi_dice ? num(*p.roi_dice) : "") << ',';
      for (std::size_t w = 0; w < p.warnings.size(); ++w) {
        std::string msg = p.warnings[w];
        std::replace(msg.begin(), msg.end(), ',', ';');
        out << (w ? "|" : "") << msg;
      }
      out << ",\n";
    }
  }
  return out.str();
}

std::string comparison_csv(const std::vector<StrategyReport>& reports, bool include_timing) {
  std::ostringstream out;
  out << "strategy,cases,failures,patches";
  for (const char* view : {"best", "mean"}) {
    out << ',' << view << "_mean_tumor_fraction," << view << "_median_tumor_fraction," << view << "_mean_center_distance";
    for (Region r : kAllRegions) out << ',' << view << "_mean_recall_" << region_name(r);
  }
  out << ",wall_time_s\n";
  for (const auto& r : reports) {
    out << strategy_name(r.strategy) << ',' << r.best.cases << ',' << r.failures << ',' << r.patch_count;
    for (const Aggregates* a : {&r.best, &r.mean}) {
      out << ',' << num(a->mean_tumor_fraction) << ',' << num(a->median_tumor_fraction) << ','
          << num(a->mean_center_distance);
      for (double v : a->mean_recall) out << ',' << num(v);
    }
    out << ',' << num(include_timing ? r.wall_time_s : 0.0) << '\n';
  }
  return out.str();
}

namespace {

ordered_json aggregates_json(const Aggregates& a) {
  ordered_json j;
  j["cases"] = a.cases;
  j["mean_tumor_fraction"] = json_num(a.mean_tumor_fraction);
  j["median_tumor_fraction"] = json_num(a.median_tumor_fraction);
  j["mean_center_distance"] = json_num(a.mean_center_distance);
  ordered_json rec = ordered_json::object();
  for (std::size_t r = 0; r < kAllRegions.size(); ++r) rec[region_name(kAllRegions[r])] = json_num(a.mean_recall[r]);
  j["mean_recall"] = rec;
  return j;
}

ordered_json counts_json(const LabelCounts& c) {
  ordered_json j;
  j["label_0"] = c.counts[0];
  j["label_1"] = c.counts[1];
  j["label_2"] = c.counts[2];
  j["label_4"] = c.counts[3];
  j["tumor_ratio"] = c.tumor_ratio();
  return j;
}

}  // namespace

std::string comparison_json(const std::vector<StrategyReport>& reports, bool include_timing) {
  ordered_json rows = ordered_json::array();
  for (const auto& r : reports) {
    ordered_json j;
    j["strategy"] = strategy_name(r.strategy);
    j["failures"] = r.failures;
    j["patches"] = r.patch_count;
    j["best"] = aggregates_json(r.best);
    j["mean"] = aggregates_json(r.mean);
    j["wall_time_s"] = include_timing ? r.wall_time_s : 0.0;
    rows.push_back(j);
  }
  return rows.dump(2) + "\n";
}

std::string imbalance_json(const ImbalanceReport& report) {
  ordered_json j;
  j["before"] = counts_json(report.before);
  ordered_json after = ordered_json::object();
  for (const auto& [s, counts] : report.after) {
    ordered_json e = counts_json(counts);
    e["improvement"] = report.improvement(s);
    after[std::string(strategy_name(s))] = e;
  }
  j["after"] = after;
  ordered_json cases = ordered_json::array();
  for (const auto& c : report.cases) {
    ordered_json e;
    e["case_id"] = c.case_id;
    e["before"] = counts_json(c.before);
    ordered_json a = ordered_json::object();
    for (const auto& [s, counts] : c.after) a[std::string(strategy_name(s))] = counts_json(counts);
    e["after"] = a;
    cases.push_back(e);
  }
  j["cases"] = cases;
  return j.dump(2) + "\n";
}

void write_reports(const CorpusRun& run, const fs::path& dir, bool include_timing) {
  fs::create_directories(dir);
  for (const auto& r : run.reports) {
    verify_aggregates(r);
    write_file_atomic(dir / ("report_" + std::string(strategy_name(r.strategy)) + ".csv"), strategy_report_csv(r));
  }
  write_file_atomic(dir / "comparison.csv", comparison_csv(run.reports, include_timing));
  write_file_atomic(dir / "comparison.json", comparison_json(run.reports, include_timing));
  write_file_atomic(dir / "imbalance.json", imbalance_json(run.imbalance));
}

}  // namespace topopatch
