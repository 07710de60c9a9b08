#include "topopatch/cli.hpp"

#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "topopatch/evaluation.hpp"
#include "topopatch/metrics.hpp"
#include "topopatch/patching.hpp"
#include "topopatch/phantom.hpp"

namespace topopatch {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::mutex g_log_mutex;

void log_line(const char* level, const std::string& msg) {
  std::lock_guard<std::mutex> lock(g_log_mutex);
  std::cerr << "[" << level << "] " << msg << '\n';
}

// Minimum contrast (in noise sigmas) at which ROI extraction is expected to work.
constexpr double kLowSignalContrast = 4.0;

struct CommonOptions {
  std::vector<std::string> paths;
  std::string out;
  std::size_t jobs = 1;
  std::string format = "raw";
};

struct PatchOptions {
  std::size_t size = kPatchSide;
  std::size_t min_voxels = 20;
  std::size_t stride = 64;
  int connectivity = 0;
  int yen_levels = RoiParams{}.yen_levels;
  double sigma = RoiParams{}.sigma;
  int radius = RoiParams{}.radius;
  int se_radius = RoiParams{}.se_radius;
  std::uint64_t seed = 0;
  std::uint64_t seeded_seed = kDefaultSeededSeed;
  std::string centroid = "union";
};

void add_patch_options(CLI::App* app, PatchOptions& o) {
  app->add_option("--size", o.size, "Patch side length in voxels")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--min-voxels", o.min_voxels, "Components with fewer voxels are discarded")->capture_default_str();
  app->add_option("--stride", o.stride, "Stride of the overlapping tiling")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--connectivity", o.connectivity, "Neighborhood: 0 (full), 4/8 in 2D, 6/18/26 in 3D")
      ->capture_default_str()
      ->check(CLI::IsMember({0, 4, 6, 8, 18, 26}));
  app->add_option("--yen-levels", o.yen_levels, "Yen thresholds; the top class forms the ROI")
      ->capture_default_str()
      ->check(CLI::Range(1, 255));
  app->add_option("--sigma", o.sigma, "Gaussian blur sigma")->capture_default_str()->check(CLI::PositiveNumber);
  app->add_option("--radius", o.radius, "Gaussian kernel radius")->capture_default_str()->check(CLI::Range(0, 64));
  app->add_option("--se-radius", o.se_radius, "Structuring element radius for open/close")
      ->capture_default_str()
      ->check(CLI::Range(1, 64));
  app->add_option("--patch-seed", o.seed, "Seed of the random strategy")->capture_default_str();
  app->add_option("--seeded-seed", o.seeded_seed, "Seed of the random_seeded strategy")->capture_default_str();
  app->add_option("--centroid", o.centroid, "CCA anchor: union of kept components or largest one")
      ->capture_default_str()
      ->check(CLI::IsMember({"union", "largest"}));
}

PatchingConfig to_config(const PatchOptions& o) {
  PatchingConfig c;
  c.size = o.size;
  c.stride = o.stride;
  c.seed = o.seed;
  c.seeded_seed = o.seeded_seed;
  RoiParams roi;
  roi.sigma = o.sigma;
  roi.radius = o.radius;
  roi.yen_levels = o.yen_levels;
  roi.se_radius = o.se_radius;
  c.cca.size = o.size;
  c.cca.roi = roi;
  c.cca.min_voxels = o.min_voxels;
  c.cca.connectivity = o.connectivity;
  c.cca.centroid_mode = o.centroid == "largest" ? CentroidMode::kLargest : CentroidMode::kUnion;
  c.tda.size = o.size;
  c.tda.roi = roi;
  // A 3D connectivity value has no meaning for the 2D method.
  c.tda.connectivity = (o.connectivity == 4 || o.connectivity == 8) ? o.connectivity : 0;
  return c;
}

ordered_json config_json(const PatchOptions& o) {
  ordered_json j;
  j["size"] = o.size;
  j["min_voxels"] = o.min_voxels;
  j["stride"] = o.stride;
  j["connectivity"] = o.connectivity;
  j["yen_levels"] = o.yen_levels;
  j["sigma"] = o.sigma;
  j["radius"] = o.radius;
  j["se_radius"] = o.se_radius;
  j["patch_seed"] = o.seed;
  j["seeded_seed"] = o.seeded_seed;
  j["centroid"] = o.centroid;
  return j;
}

void add_common_options(CLI::App* app, CommonOptions& o, const std::string& paths_help) {
  app->add_option("paths", o.paths, paths_help);
  app->add_option("-o,--out", o.out, std::string("Output directory (env ") + kOutputEnv + ")")->envname(kOutputEnv);
  app->add_option("-j,--jobs", o.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

// Splits the positional list into inputs and the output directory. The
// output comes from -o / the environment when given, else the last path.
std::vector<std::string> split_output(CommonOptions& o, std::size_t min_inputs) {
  std::vector<std::string> inputs = o.paths;
  if (o.out.empty()) {
    if (inputs.size() < min_inputs + 1) throw ConfigError("missing output directory");
    o.out = inputs.back();
    inputs.pop_back();
  }
  if (inputs.size() < min_inputs) throw ConfigError("missing input path");
  return inputs;
}

bool looks_like_case(const fs::path& dir) {
  const std::string id = dir.filename().string();
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind(id + "_", 0) == 0) return true;
  }
  return false;
}

// Each input is either a case directory or a directory of case directories.
std::vector<CaseRef> collect_cases(const std::vector<std::string>& inputs) {
  std::vector<CaseRef> out;
  for (const auto& in : inputs) {
    fs::path p = fs::path(in).lexically_normal();
    if (p.filename().empty()) p = p.parent_path();
    if (!fs::is_directory(p)) throw ConfigError("input is not a directory: " + in);
    if (looks_like_case(p)) {
      out.push_back({p.filename().string(), [p] { return load_case(p); }});
    } else {
      auto more = directory_corpus(p);
      out.insert(out.end(), more.begin(), more.end());
    }
  }
  std::set<std::string> seen;
  for (const auto& c : out) {
    if (!seen.insert(c.case_id).second) throw ConfigError("duplicate case id: " + c.case_id);
  }
  return out;
}

VolumeFormat parse_format(const std::string& s) { return s == "nifti" ? VolumeFormat::kNifti : VolumeFormat::kRawF32; }
const char* format_ext(VolumeFormat f) { return f == VolumeFormat::kNifti ? ".nii.gz" : ".raw"; }

ordered_json index_json(const Index3& i) { return ordered_json::array({i[0], i[1], i[2]}); }
ordered_json coord_json(const Coord3& c) { return ordered_json::array({c[0], c[1], c[2]}); }
ordered_json shape_json(const Shape3& s) { return ordered_json::array({s.nx, s.ny, s.nz}); }

// Runs fn(i) for i in [0, n) on `jobs` threads.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t jobs, Fn&& fn) {
  jobs = std::max<std::size_t>(1, std::min(jobs, n));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < jobs; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

// ---- extract ----------------------------------------------------------------------

struct ExtractOptions {
  CommonOptions common;
  PatchOptions patch;
  std::string strategy = "cca";
  bool debug = false;
};

void extract_case(const CaseRef& ref, const ExtractOptions& o, Strategy strategy, const fs::path& out_root) {
  const auto t0 = std::chrono::steady_clock::now();
  const Case c = ref.load();
  const VolumeFormat fmt = parse_format(o.common.format);
  const PatchingConfig config = to_config(o.patch);

  RoiStages stages;
  const bool want_stages = o.debug && strategy == Strategy::kCca;
  const auto patches = generate_patches(c, strategy, config, want_stages ? &stages : nullptr);

  const fs::path dir = out_root / c.case_id;
  fs::create_directories(dir);
  ordered_json manifest;
  manifest["case_id"] = c.case_id;
  manifest["strategy"] = strategy_name(strategy);
  manifest["params"] = config_json(o.patch);
  manifest["shape"] = shape_json(c.shape());
  manifest["size"] = shape_json(patches.front().spec.size());
  manifest["origin"] = index_json(patches.front().spec.origin());
  ordered_json all_warnings = ordered_json::array();
  for (const auto& p : patches) {
    for (const auto& w : p.provenance.warnings) all_warnings.push_back(w);
  }
  manifest["warnings"] = all_warnings;
  if (c.mask && count_true(c.mask->whole_tumor()) != 0) manifest["tumor_centroid"] = coord_json(whole_tumor_centroid(*c.mask));

  ordered_json list = ordered_json::array();
  for (std::size_t k = 0; k < patches.size(); ++k) {
    const Patch& p = patches[k];
    ordered_json e;
    e["index"] = k;
    e["origin"] = index_json(p.spec.origin());
    e["size"] = shape_json(p.spec.size());
    e["warnings"] = p.provenance.warnings;
    e["anchor"] = p.provenance.anchor ? coord_json(*p.provenance.anchor) : ordered_json(nullptr);
    if (strategy == Strategy::kCca) {
      e["components_found"] = p.provenance.components_found;
      e["components_kept"] = p.provenance.components_kept;
    }
    if (p.provenance.slice_index) e["slice_index"] = *p.provenance.slice_index;
    e["roi_dice"] = p.provenance.roi_dice ? ordered_json(*p.provenance.roi_dice) : ordered_json(nullptr);
    ordered_json files = ordered_json::object();
    const std::string stem = c.case_id + "_p" + std::to_string(k) + "_";
    for (const auto& [name, vol] : p.data) {
      const std::string file = stem + name + format_ext(fmt);
      save_volume(vol, dir / file, fmt);
      files[name] = file;
    }
    if (p.mask_crop) {
      const std::string file = stem + "seg" + format_ext(fmt);
      save_mask(*p.mask_crop, dir / file);
      files["seg"] = file;
    }
    e["files"] = files;
    list.push_back(e);
  }
  manifest["patches"] = list;
  write_file_atomic(dir / (c.case_id + "_manifest.json"), manifest.dump(2) + "\n");

  if (want_stages && !stages.stages.empty()) dump_roi_stages(stages, dir / "debug", c.case_id);

  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::ostringstream msg;
  msg << c.case_id << ": " << patches.size() << " patch(es), origin " << patches.front().spec.origin()[0] << ','
      << patches.front().spec.origin()[1] << ',' << patches.front().spec.origin()[2] << " in " << secs << " s";
  log_line("info", msg.str());
  for (const auto& w : all_warnings) log_line("warn", c.case_id + ": " + w.get<std::string>());
}

int cmd_extract(ExtractOptions& o) {
  const auto strategy = parse_strategy(o.strategy);
  if (!strategy) throw ConfigError("unknown strategy: " + o.strategy);
  const auto inputs = split_output(o.common, 1);
  const auto cases = collect_cases(inputs);
  if (cases.empty()) throw ConfigError("no cases found");
  const fs::path out_root = o.common.out;
  fs::create_directories(out_root);

  std::atomic<std::size_t> failures{0};
  parallel_for(cases.size(), o.common.jobs, [&](std::size_t i) {
    try {
      extract_case(cases[i], o, *strategy, out_root);
    } catch (const std::exception& e) {
      ++failures;
      log_line("error", cases[i].case_id + ": " + e.what());
    }
  });
  log_line("info", std::to_string(cases.size() - failures) + "/" + std::to_string(cases.size()) + " cases extracted");
  return failures == 0 ? kExitOk : kExitCaseFailure;
}

// ---- evaluate ------------------------------------------------------------------------

struct EvaluateOptions {
  CommonOptions common;
  PatchOptions patch;
  std::string strategies = "cca,tda2d,centered_crop,fixed_quadrant,random,random_seeded,overlapping";
  std::size_t phantoms = 0;
  std::uint64_t seed = 0;
  double contrast = PhantomCorpusParams{}.contrast;
  std::string placement = "interior";
  bool no_timing = false;
};

std::vector<Strategy> parse_strategy_list(const std::string& csv) {
  std::vector<Strategy> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto s = parse_strategy(item);
    if (!s) throw ConfigError("unknown strategy: " + item);
    if (std::find(out.begin(), out.end(), *s) != out.end()) throw ConfigError("strategy listed twice: " + item);
    out.push_back(*s);
  }
  if (out.empty()) throw ConfigError("no strategies given");
  return out;
}

PhantomCorpusParams corpus_params(double contrast, const std::string& placement) {
  PhantomCorpusParams p;
  p.contrast = contrast;
  p.placement = placement == "anywhere" ? Placement::kAnywhere : Placement::kInterior;
  return p;
}

int cmd_evaluate(EvaluateOptions& o) {
  const auto strategies = parse_strategy_list(o.strategies);
  std::vector<CaseRef> cases;
  if (o.phantoms > 0) {
    if (!split_output(o.common, 0).empty()) throw ConfigError("--phantoms and input directories are exclusive");
    cases = phantom_corpus(o.phantoms, o.seed, corpus_params(o.contrast, o.placement));
  } else {
    cases = collect_cases(split_output(o.common, 1));
  }
  if (cases.empty()) throw ConfigError("no cases found");

  EvaluationOptions eo;
  eo.patching = to_config(o.patch);
  eo.jobs = o.common.jobs;
  const CorpusRun run = run_corpus(cases, strategies, eo);
  write_reports(run, o.common.out, !o.no_timing);

  std::size_t failures = 0;
  for (const auto& r : run.reports) {
    failures += r.failures;
    for (const auto& c : r.cases) {
      if (c.error) log_line("error", std::string(strategy_name(r.strategy)) + " " + c.case_id + ": " + *c.error);
    }
    std::ostringstream msg;
    msg << strategy_name(r.strategy) << ": " << r.best.cases << " cases, mean tumor fraction "
        << r.best.mean_tumor_fraction << ", mean center distance " << r.best.mean_center_distance;
    log_line("info", msg.str());
  }
  return failures == 0 ? kExitOk : kExitCaseFailure;
}

// ---- phantom ----------------------------------------------------------------------------

struct PhantomOptions {
  CommonOptions common;
  std::size_t count = 5;
  std::uint64_t seed = 0;
  double contrast = PhantomCorpusParams{}.contrast;
  double noise = PhantomCorpusParams{}.noise_sigma;
  double min_semi = PhantomCorpusParams{}.min_semi_axis;
  double max_semi = PhantomCorpusParams{}.max_semi_axis;
  std::string placement = "interior";
};

int cmd_phantom(PhantomOptions& o) {
  if (!split_output(o.common, 0).empty()) throw ConfigError("phantom takes only an output directory");
  if (o.min_semi > o.max_semi) throw ConfigError("--min-semi exceeds --max-semi");
  PhantomCorpusParams corpus = corpus_params(o.contrast, o.placement);
  corpus.noise_sigma = o.noise;
  corpus.min_semi_axis = o.min_semi;
  corpus.max_semi_axis = o.max_semi;
  const VolumeFormat fmt = parse_format(o.common.format);
  const fs::path root = o.common.out;
  fs::create_directories(root);
  const bool low_signal = o.contrast < kLowSignalContrast;

  std::vector<ordered_json> entries(o.count);
  std::atomic<std::size_t> failures{0};
  parallel_for(o.count, o.common.jobs, [&](std::size_t i) {
    const std::string id = phantom_case_id(i);
    try {
      const PhantomParams p = corpus_phantom_params(o.seed, i, corpus);
      const Phantom ph = generate_phantom(case_seed(o.seed, id), p);
      const fs::path dir = root / id;
      fs::create_directories(dir);
      save_volume(ph.volume, dir / (id + "_flair" + format_ext(fmt)), fmt);
      const fs::path seg = dir / (id + "_seg" + format_ext(fmt));
      save_mask(ph.mask, seg);
      ordered_json e;
      e["case_id"] = id;
      e["seed"] = ph.seed;
      e["shape"] = shape_json(p.shape);
      e["center"] = coord_json(p.center);
      e["semi_axes"] = coord_json(p.semi_axes);
      e["contrast"] = p.contrast;
      e["noise_sigma"] = p.noise_sigma;
      e["tumor_voxels"] = count_true(ph.mask.whole_tumor());
      e["low_signal"] = low_signal;
      entries[i] = e;
    } catch (const std::exception& e) {
      ++failures;
      log_line("error", id + ": " + e.what());
    }
  });

  ordered_json manifest;
  manifest["count"] = o.count;
  manifest["seed"] = o.seed;
  manifest["contrast"] = o.contrast;
  manifest["low_signal"] = low_signal;
  manifest["cases"] = ordered_json::array();
  for (auto& e : entries) {
    if (!e.is_null()) manifest["cases"].push_back(e);
  }
  write_file_atomic(root / "phantoms.json", manifest.dump(2) + "\n");
  if (low_signal) log_line("warn", "contrast below 4 noise sigmas; ROI extraction is not expected to isolate the tumor");
  return failures == 0 ? kExitOk : kExitCaseFailure;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Tumor-centered patch extraction for brain MRI volumes"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "topopatch 1.0");

  ExtractOptions ex;
  auto* extract = app.add_subcommand("extract", "Extract patches from case directories");
  add_common_options(extract, ex.common, "Case directories or directories of cases, then the output directory");
  add_patch_options(extract, ex.patch);
  extract->add_option("--strategy", ex.strategy, "cca, tda2d, centered_crop, fixed_quadrant, random, random_seeded, overlapping")
      ->capture_default_str();
  extract->add_option("--format", ex.common.format, "Patch file format")
      ->capture_default_str()
      ->check(CLI::IsMember({"raw", "nifti"}));
  extract->add_flag("--debug", ex.debug, "Dump intermediate ROI stages (cca)");
  extract->add_option("--seed", ex.patch.seed, "Alias of --patch-seed");

  EvaluateOptions ev;
  auto* evaluate = app.add_subcommand("evaluate", "Compare patching strategies against ground-truth masks");
  add_common_options(evaluate, ev.common, "Input directories (unless --phantoms), then the output directory");
  add_patch_options(evaluate, ev.patch);
  evaluate->add_option("--strategies", ev.strategies, "Comma-separated strategy list")->capture_default_str();
  evaluate->add_option("--phantoms", ev.phantoms, "Evaluate on N synthetic phantoms instead of inputs")->capture_default_str();
  evaluate->add_option("--seed", ev.seed, "Phantom corpus seed")->capture_default_str();
  evaluate->add_option("--contrast", ev.contrast, "Phantom tumor contrast in noise sigmas")->capture_default_str();
  evaluate->add_option("--placement", ev.placement, "Phantom tumor placement")
      ->capture_default_str()
      ->check(CLI::IsMember({"interior", "anywhere"}));
  evaluate->add_flag("--no-timing", ev.no_timing, "Write zero wall times so reports are byte-identical across runs");

  PhantomOptions ph;
  auto* phantom = app.add_subcommand("phantom", "Write a synthetic phantom corpus");
  add_common_options(phantom, ph.common, "Output directory");
  phantom->add_option("--count", ph.count, "Number of cases")->capture_default_str();
  phantom->add_option("--seed", ph.seed, "Corpus seed")->capture_default_str();
  phantom->add_option("--contrast", ph.contrast, "Tumor contrast in noise sigmas")->capture_default_str()->check(CLI::NonNegativeNumber);
  phantom->add_option("--noise", ph.noise, "Noise sigma")->capture_default_str()->check(CLI::NonNegativeNumber);
  phantom->add_option("--min-semi", ph.min_semi, "Smallest semi-axis")->capture_default_str()->check(CLI::PositiveNumber);
  phantom->add_option("--max-semi", ph.max_semi, "Largest semi-axis")->capture_default_str()->check(CLI::PositiveNumber);
  phantom->add_option("--placement", ph.placement, "Tumor placement")
      ->capture_default_str()
      ->check(CLI::IsMember({"interior", "anywhere"}));
  phantom->add_option("--format", ph.common.format, "Volume file format")
      ->capture_default_str()
      ->check(CLI::IsMember({"raw", "nifti"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*extract) return cmd_extract(ex);
    if (*evaluate) return cmd_evaluate(ev);
    return cmd_phantom(ph);
  } catch (const ConfigError& e) {
    log_line("error", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    log_line("error", e.what());
    return kExitCaseFailure;
  }
}

}  // namespace topopatch
