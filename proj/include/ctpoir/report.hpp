#pragma once

// Case analysis (lung and infected masks -> volumes -> PoIR), the JSON case
// report, and benchmark evaluation in the layout of the paper's m-Dice table.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "ctpoir/error.hpp"
#include "ctpoir/grid.hpp"
#include "ctpoir/mask_ops.hpp"
#include "ctpoir/metrics.hpp"
#include "ctpoir/parallel.hpp"
#include "ctpoir/preprocess.hpp"
#include "ctpoir/region_filter.hpp"
#include "ctpoir/seg_harness.hpp"
#include "ctpoir/threshold_seg.hpp"
#include "ctpoir/volume_io.hpp"

namespace ctpoir {

inline constexpr const char* kReportSchema = "ctpoir.report/1";
inline constexpr const char* kSummarySchema = "ctpoir.summary/1";
inline constexpr const char* kBuiltinScorerName = "builtin-logistic/1";

enum class MaskSourceKind { Threshold, ProbMap, Mask };
enum class FilterMode { None, Builtin, Sidecar };

inline std::string to_string(MaskSourceKind k) {
  switch (k) {
    case MaskSourceKind::Threshold: return "threshold";
    case MaskSourceKind::ProbMap: return "probmap";
    case MaskSourceKind::Mask: return "mask";
  }
  return "?";
}

inline std::string to_string(FilterMode m) {
  switch (m) {
    case FilterMode::None: return "none";
    case FilterMode::Builtin: return "builtin";
    case FilterMode::Sidecar: return "sidecar";
  }
  return "?";
}

struct MaskSource {
  MaskSourceKind kind = MaskSourceKind::Threshold;
  int threshold_hu = 0;
  fs::path path;
  double tau = 0.5;

  static MaskSource threshold(int t) { return {MaskSourceKind::Threshold, t, {}, 0.5}; }
  static MaskSource probmap(fs::path p, double tau = 0.5) { return {MaskSourceKind::ProbMap, 0, std::move(p), tau}; }
  static MaskSource mask(fs::path p) { return {MaskSourceKind::Mask, 0, std::move(p), 0.5}; }
};

struct AnalysisConfig {
  MaskSource lung = MaskSource::threshold(kDefaultLungThreshold);
  MaskSource infected = MaskSource::threshold(kDefaultInfectedThreshold);
  FilterMode filter = FilterMode::Builtin;
  FilterConfig filter_config;
  fs::path scores;  // sidecar CSV, FilterMode::Sidecar only
  int threads = 1;
};

// Stage parameters as recorded in the report.
struct PipelineRecord {
  std::string lung_source;
  std::optional<int> lung_threshold_hu;
  std::optional<double> lung_tau;
  std::string infected_source;
  std::optional<int> infected_threshold_hu;
  std::optional<double> infected_tau;
  std::string filter;
  std::optional<double> filter_threshold;
  std::optional<std::size_t> min_region_voxels;
  std::string scorer;
  std::size_t regions_total = 0;
  std::size_t regions_kept = 0;

  friend bool operator==(const PipelineRecord&, const PipelineRecord&) = default;
};

struct SliceArea {
  int z = 0;
  double lung_mm2 = 0;
  double infected_mm2 = 0;
  friend bool operator==(const SliceArea&, const SliceArea&) = default;
};

struct CaseReport {
  std::string case_id;
  Dims dims;
  Spacing spacing;
  std::size_t lung_voxels = 0;
  std::size_t infected_voxels = 0;
  double lung_volume_mm3 = 0;
  double infected_volume_mm3 = 0;
  double poir_fraction = 0;
  std::vector<SliceArea> per_slice;
  PipelineRecord pipeline;

  friend bool operator==(const CaseReport&, const CaseReport&) = default;
};

struct CaseAnalysis {
  CaseReport report;
  BinaryMask3D lung;
  BinaryMask3D infected;  // filtered and restricted to the lung
  std::vector<ScoredRegion> regions;
};

// ---- JSON ----------------------------------------------------------------

namespace report_detail {

template <typename T>
void put_opt(nlohmann::json& j, const char* key, const std::optional<T>& v) {
  j[key] = v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

template <typename T>
std::optional<T> get_opt(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<T>();
}

}  // namespace report_detail

inline nlohmann::json to_json(const PipelineRecord& p) {
  using report_detail::put_opt;
  nlohmann::json j;
  j["lung_source"] = p.lung_source;
  put_opt(j, "lung_threshold_hu", p.lung_threshold_hu);
  put_opt(j, "lung_tau", p.lung_tau);
  j["infected_source"] = p.infected_source;
  put_opt(j, "infected_threshold_hu", p.infected_threshold_hu);
  put_opt(j, "infected_tau", p.infected_tau);
  j["filter"] = p.filter;
  put_opt(j, "filter_threshold", p.filter_threshold);
  put_opt(j, "min_region_voxels", p.min_region_voxels);
  j["scorer"] = p.scorer;
  j["regions_total"] = p.regions_total;
  j["regions_kept"] = p.regions_kept;
  return j;
}

inline nlohmann::json to_json(const CaseReport& r) {
  nlohmann::json j;
  j["schema"] = kReportSchema;
  j["case_id"] = r.case_id;
  j["dims"] = {r.dims.nx, r.dims.ny, r.dims.nz};
  j["spacing"] = {r.spacing.sx, r.spacing.sy, r.spacing.sz};
  j["lung_voxels"] = r.lung_voxels;
  j["infected_voxels"] = r.infected_voxels;
  j["lung_volume_mm3"] = r.lung_volume_mm3;
  j["infected_volume_mm3"] = r.infected_volume_mm3;
  j["poir_fraction"] = r.poir_fraction;
  j["poir_percent"] = r.poir_fraction * 100.0;
  auto& slices = j["per_slice"] = nlohmann::json::array();
  for (const auto& s : r.per_slice) slices.push_back({{"z", s.z}, {"lung_mm2", s.lung_mm2}, {"infected_mm2", s.infected_mm2}});
  j["pipeline"] = to_json(r.pipeline);
  return j;
}

inline CaseReport report_from_json(const nlohmann::json& j) {
  using report_detail::get_opt;
  try {
    if (j.at("schema").get<std::string>() != kReportSchema)
      throw Error(ErrorKind::Parse, "unsupported report schema " + j.at("schema").dump());
    CaseReport r;
    r.case_id = j.at("case_id").get<std::string>();
    const auto& d = j.at("dims");
    r.dims = {d.at(0).get<int>(), d.at(1).get<int>(), d.at(2).get<int>()};
    const auto& s = j.at("spacing");
    r.spacing = {s.at(0).get<double>(), s.at(1).get<double>(), s.at(2).get<double>()};
    r.lung_voxels = j.at("lung_voxels").get<std::size_t>();
    r.infected_voxels = j.at("infected_voxels").get<std::size_t>();
    r.lung_volume_mm3 = j.at("lung_volume_mm3").get<double>();
    r.infected_volume_mm3 = j.at("infected_volume_mm3").get<double>();
    r.poir_fraction = j.at("poir_fraction").get<double>();
    for (const auto& e : j.at("per_slice"))
      r.per_slice.push_back({e.at("z").get<int>(), e.at("lung_mm2").get<double>(), e.at("infected_mm2").get<double>()});
    const auto& p = j.at("pipeline");
    auto& q = r.pipeline;
    q.lung_source = p.at("lung_source").get<std::string>();
    q.lung_threshold_hu = get_opt<int>(p, "lung_threshold_hu");
    q.lung_tau = get_opt<double>(p, "lung_tau");
    q.infected_source = p.at("infected_source").get<std::string>();
    q.infected_threshold_hu = get_opt<int>(p, "infected_threshold_hu");
    q.infected_tau = get_opt<double>(p, "infected_tau");
    q.filter = p.at("filter").get<std::string>();
    q.filter_threshold = get_opt<double>(p, "filter_threshold");
    q.min_region_voxels = get_opt<std::size_t>(p, "min_region_voxels");
    q.scorer = p.at("scorer").get<std::string>();
    q.regions_total = p.at("regions_total").get<std::size_t>();
    q.regions_kept = p.at("regions_kept").get<std::size_t>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("report: ") + e.what());
  }
}

namespace report_detail {

inline MaskSource source_from_json(const nlohmann::json& j, MaskSource fallback) {
  if (j.contains("source")) {
    const auto s = j.at("source").get<std::string>();
    if (s == "threshold") fallback.kind = MaskSourceKind::Threshold;
    else if (s == "probmap") fallback.kind = MaskSourceKind::ProbMap;
    else if (s == "mask") fallback.kind = MaskSourceKind::Mask;
    else throw Error(ErrorKind::InvalidArgument, "unknown mask source '" + s + "'");
  }
  if (j.contains("threshold_hu")) fallback.threshold_hu = j.at("threshold_hu").get<int>();
  if (j.contains("path")) fallback.path = j.at("path").get<std::string>();
  if (j.contains("tau")) fallback.tau = j.at("tau").get<double>();
  return fallback;
}

}  // namespace report_detail

// Reads the "lung", "infected" and "filter" sections of a config object;
// absent keys keep the values already in `base`.
inline AnalysisConfig analysis_config_from_json(const nlohmann::json& j, AnalysisConfig base = {}) {
  try {
    if (j.contains("lung")) base.lung = report_detail::source_from_json(j.at("lung"), base.lung);
    if (j.contains("infected")) base.infected = report_detail::source_from_json(j.at("infected"), base.infected);
    if (j.contains("filter")) {
      const auto& f = j.at("filter");
      if (f.contains("mode")) {
        const auto m = f.at("mode").get<std::string>();
        if (m == "none") base.filter = FilterMode::None;
        else if (m == "builtin") base.filter = FilterMode::Builtin;
        else if (m == "sidecar") base.filter = FilterMode::Sidecar;
        else throw Error(ErrorKind::InvalidArgument, "unknown filter mode '" + m + "'");
      }
      if (f.contains("threshold")) base.filter_config.threshold = f.at("threshold").get<double>();
      if (f.contains("min_region_voxels")) base.filter_config.min_region_voxels = f.at("min_region_voxels").get<std::size_t>();
      if (f.contains("scores")) base.scores = f.at("scores").get<std::string>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("config: ") + e.what());
  }
  return base;
}

// ---- analysis ------------------------------------------------------------

namespace report_detail {

template <typename Fn>
auto staged(const char* stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw e.with_stage(stage);
  }
}

inline BinaryMask3D load_source_mask(const MaskSource& src, const CtVolume& volume) {
  BinaryMask3D m;
  if (src.kind == MaskSourceKind::ProbMap) {
    m = binarize(load_probmaps(src.path), src.tau);
  } else {
    m = read_mask(src.path);
  }
  require_same_dims(volume, m, "volume and mask source");
  return m;
}

}  // namespace report_detail

inline CaseReport make_report(const std::string& case_id, const BinaryMask3D& lung, const BinaryMask3D& infected,
                              PipelineRecord pipeline = {}) {
  require_same_dims(lung, infected, "lung and infected masks");
  CaseReport r;
  r.case_id = case_id;
  r.dims = lung.dims();
  r.spacing = lung.spacing();
  r.lung_voxels = lung.count();
  r.infected_voxels = infected.count();
  r.lung_volume_mm3 = volume_mm3(lung);
  r.infected_volume_mm3 = volume_mm3(infected);
  r.poir_fraction = poir(infected, lung);
  const double px_mm2 = lung.spacing().sx * lung.spacing().sy;
  for (int z = 0; z < lung.dims().nz; ++z) {
    const auto l = lung.slice(z), i = infected.slice(z);
    r.per_slice.push_back({z, double(std::count(l.begin(), l.end(), 1)) * px_mm2,
                           double(std::count(i.begin(), i.end(), 1)) * px_mm2});
  }
  r.pipeline = std::move(pipeline);
  return r;
}

// preprocess -> lung mask -> infected mask -> region filter -> restrict to
// lung -> volumes -> PoIR. Errors carry the name of the failing stage.
inline CaseAnalysis analyze_case(const CtVolume& volume, const AnalysisConfig& config) {
  using report_detail::staged;
  PipelineRecord rec;
  const auto gray = staged("preprocess", [&] {
    validate_geometry(volume.dims(), volume.spacing());
    return normalize_to_gray(clip_hu(volume));
  });

  CaseAnalysis out;
  out.lung = staged("segment_lung", [&] {
    rec.lung_source = to_string(config.lung.kind);
    if (config.lung.kind == MaskSourceKind::Threshold) {
      rec.lung_threshold_hu = config.lung.threshold_hu;
      return segment_by_threshold(volume, config.lung.threshold_hu);
    }
    if (config.lung.kind == MaskSourceKind::ProbMap) rec.lung_tau = config.lung.tau;
    return report_detail::load_source_mask(config.lung, volume);
  });

  auto infected = staged("segment_infected", [&] {
    rec.infected_source = to_string(config.infected.kind);
    if (config.infected.kind == MaskSourceKind::Threshold) {
      rec.infected_threshold_hu = config.infected.threshold_hu;
      return infected_candidate(volume, out.lung, config.infected.threshold_hu);
    }
    if (config.infected.kind == MaskSourceKind::ProbMap) rec.infected_tau = config.infected.tau;
    return report_detail::load_source_mask(config.infected, volume);
  });

  infected = staged("filter", [&] {
    rec.filter = to_string(config.filter);
    if (config.filter == FilterMode::None) {
      rec.scorer = "none";
      return infected;
    }
    rec.filter_threshold = config.filter_config.threshold;
    rec.min_region_voxels = config.filter_config.min_region_voxels;
    auto cands = extract_candidates(infected, gray);
    if (config.filter == FilterMode::Builtin) {
      rec.scorer = kBuiltinScorerName;
      out.regions = score_regions(std::move(cands), BuiltinScorer{}, config.threads);
    } else {
      rec.scorer = "sidecar:" + config.scores.filename().string();
      out.regions = score_regions(std::move(cands), SidecarScorer::from_file(config.scores), config.threads);
    }
    auto kept = filter_regions(out.regions, config.filter_config, infected);
    rec.regions_total = out.regions.size();
    rec.regions_kept = std::size_t(std::count_if(out.regions.begin(), out.regions.end(), [&](const auto& c) {
      return c.score >= config.filter_config.threshold && c.region.size() >= config.filter_config.min_region_voxels;
    }));
    return kept;
  });

  out.infected = intersect(infected, out.lung);
  out.report = staged("quantify", [&] { return make_report(volume.case_id, out.lung, out.infected, rec); });
  return out;
}

// ---- benchmark evaluation ------------------------------------------------

inline constexpr const char* kStructureLung = "intact lung";
inline constexpr const char* kStructureInfected = "infected region";

struct TruthCase {
  std::string case_id;
  BinaryMask3D lung;
  BinaryMask3D infected;
};

// One method's masks for one case; either structure may be absent.
struct PredictedCase {
  std::string method;
  std::string case_id;
  std::optional<BinaryMask3D> lung;
  std::optional<BinaryMask3D> infected;
};

struct SummaryRow {
  std::string method;
  std::string structure;
  double m_dice = 0;
  std::size_t cases = 0;
  friend bool operator==(const SummaryRow&, const SummaryRow&) = default;
};

struct PoirPair {
  std::string case_id;
  double predicted = 0;
  double truth = 0;
  friend bool operator==(const PoirPair&, const PoirPair&) = default;
};

struct MetricsSummary {
  std::vector<SummaryRow> rows;
  std::string poir_lung_method;
  std::string poir_infected_method;
  std::vector<PoirPair> poir_pairs;
  double pearson_r = 0;
  double mape_percent = 0;
  friend bool operator==(const MetricsSummary&, const MetricsSummary&) = default;
};

struct EvaluateOptions {
  // Methods whose masks give the predicted PoIR. Empty: the method with the
  // highest m-Dice for that structure.
  std::string poir_lung_method;
  std::string poir_infected_method;
  int threads = 1;
};

// m-Dice per (method, structure) over every truth case, then Pearson and
// mAPE between predicted and true PoIR. Rows are ordered by method name,
// lung before infected; cases are aggregated in case_id order.
inline MetricsSummary evaluate_benchmark(std::vector<TruthCase> truth, const std::vector<PredictedCase>& preds,
                                         const EvaluateOptions& opt = {}) {
  if (truth.empty()) throw Error(ErrorKind::EmptyList, "no ground-truth cases");
  std::sort(truth.begin(), truth.end(), [](const auto& a, const auto& b) { return a.case_id < b.case_id; });
  for (std::size_t i = 1; i < truth.size(); ++i)
    if (truth[i].case_id == truth[i - 1].case_id)
      throw Error(ErrorKind::InvalidArgument, "duplicate case " + truth[i].case_id);

  // (method, case) -> prediction
  std::map<std::string, std::map<std::string, const PredictedCase*>> by_method;
  for (const auto& p : preds) {
    auto& slot = by_method[p.method][p.case_id];
    if (slot) throw Error(ErrorKind::InvalidArgument, "duplicate prediction " + p.method + "/" + p.case_id);
    slot = &p;
  }
  for (const auto& [method, cases] : by_method)
    for (const auto& [case_id, p] : cases) {
      const bool known = std::any_of(truth.begin(), truth.end(), [&](const auto& t) { return t.case_id == case_id; });
      if (!known) throw Error(ErrorKind::InvalidArgument, method + ": no ground truth for case " + case_id);
    }

  auto find = [&](const std::string& method, const TruthCase& t) -> const PredictedCase* {
    const auto it = by_method.at(method).find(t.case_id);
    return it == by_method.at(method).end() ? nullptr : it->second;
  };

  MetricsSummary s;
  std::map<std::string, double> best_lung, best_inf;
  for (const auto& [method, cases] : by_method) {
    for (int structure = 0; structure < 2; ++structure) {
      const bool lung = structure == 0;
      const bool any = std::any_of(cases.begin(), cases.end(), [&](const auto& kv) {
        return lung ? kv.second->lung.has_value() : kv.second->infected.has_value();
      });
      if (!any) continue;
      std::vector<double> dices(truth.size());
      parallel_for(truth.size(), opt.threads, [&](std::size_t k) {
        const auto* p = find(method, truth[k]);
        const auto& m = lung ? (p ? p->lung : std::nullopt) : (p ? p->infected : std::nullopt);
        if (!m)
          throw Error(ErrorKind::InvalidArgument, method + ": missing " + (lung ? "lung" : "infected") +
                                                      " prediction for case " + truth[k].case_id);
        dices[k] = dice(*m, lung ? truth[k].lung : truth[k].infected);
      });
      const double md = mean_of(dices);
      s.rows.push_back({method, lung ? kStructureLung : kStructureInfected, md, truth.size()});
      (lung ? best_lung : best_inf)[method] = md;
    }
  }
  if (s.rows.empty()) throw Error(ErrorKind::EmptyList, "no predictions");

  auto pick = [](const std::map<std::string, double>& scores, const std::string& wanted, const char* what) {
    if (!wanted.empty()) {
      if (!scores.count(wanted))
        throw Error(ErrorKind::InvalidArgument, std::string("no ") + what + " predictions for method " + wanted);
      return wanted;
    }
    if (scores.empty()) throw Error(ErrorKind::EmptyList, std::string("no ") + what + " predictions");
    auto best = scores.begin();
    for (auto it = scores.begin(); it != scores.end(); ++it)
      if (it->second > best->second) best = it;
    return best->first;
  };
  s.poir_lung_method = pick(best_lung, opt.poir_lung_method, "lung");
  s.poir_infected_method = pick(best_inf, opt.poir_infected_method, "infected");

  PairedSeries series;
  for (const auto& t : truth) {
    const auto& lung = *find(s.poir_lung_method, t)->lung;
    const auto& inf = *find(s.poir_infected_method, t)->infected;
    require_same_dims(lung, inf, "predicted lung and infected masks");
    const double pred = poir(intersect(inf, lung), lung);
    const double gt = poir(t.infected, t.lung);
    s.poir_pairs.push_back({t.case_id, pred, gt});
    series.add(pred, gt);
  }
  s.pearson_r = pearson(series);
  s.mape_percent = mape(series);
  return s;
}

inline nlohmann::json to_json(const MetricsSummary& s) {
  nlohmann::json j;
  j["schema"] = kSummarySchema;
  auto& rows = j["rows"] = nlohmann::json::array();
  for (const auto& r : s.rows)
    rows.push_back({{"method", r.method}, {"structure", r.structure}, {"m_dice", r.m_dice}, {"cases", r.cases}});
  j["poir_lung_method"] = s.poir_lung_method;
  j["poir_infected_method"] = s.poir_infected_method;
  auto& pairs = j["poir_pairs"] = nlohmann::json::array();
  for (const auto& p : s.poir_pairs)
    pairs.push_back({{"case_id", p.case_id}, {"predicted", p.predicted}, {"truth", p.truth}});
  j["pearson_r"] = s.pearson_r;
  j["mape_percent"] = s.mape_percent;
  return j;
}

inline MetricsSummary summary_from_json(const nlohmann::json& j) {
  try {
    if (j.at("schema").get<std::string>() != kSummarySchema)
      throw Error(ErrorKind::Parse, "unsupported summary schema " + j.at("schema").dump());
    MetricsSummary s;
    for (const auto& r : j.at("rows"))
      s.rows.push_back({r.at("method").get<std::string>(), r.at("structure").get<std::string>(),
                        r.at("m_dice").get<double>(), r.at("cases").get<std::size_t>()});
    s.poir_lung_method = j.at("poir_lung_method").get<std::string>();
    s.poir_infected_method = j.at("poir_infected_method").get<std::string>();
    for (const auto& p : j.at("poir_pairs"))
      s.poir_pairs.push_back({p.at("case_id").get<std::string>(), p.at("predicted").get<double>(),
                              p.at("truth").get<double>()});
    s.pearson_r = j.at("pearson_r").get<double>();
    s.mape_percent = j.at("mape_percent").get<double>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Parse, std::string("summary: ") + e.what());
  }
}

// Plain-text table: one line per method, one column per structure.
inline std::string format_table(const MetricsSummary& s) {
  std::vector<std::string> methods;
  for (const auto& r : s.rows)
    if (std::find(methods.begin(), methods.end(), r.method) == methods.end()) methods.push_back(r.method);
  std::size_t w = 6;
  for (const auto& m : methods) w = std::max(w, m.size());
  auto cell = [&](const std::string& m, const char* structure) -> std::string {
    for (const auto& r : s.rows)
      if (r.method == m && r.structure == structure) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3f", r.m_dice);
        return buf;
      }
    return "-";
  };
  auto pad = [](std::string v, std::size_t n) {
    v.resize(std::max(n, v.size()), ' ');
    return v;
  };
  std::string out = pad("Method", w) + "  " + pad(kStructureLung, 15) + "  " + kStructureInfected + "\n";
  for (const auto& m : methods)
    out += pad(m, w) + "  " + pad(cell(m, kStructureLung), 15) + "  " + cell(m, kStructureInfected) + "\n";
  char tail[128];
  std::snprintf(tail, sizeof tail, "Pearson r = %.3f, mAPE = %.1f%% (lung: %s, infected: %s)\n", s.pearson_r,
                s.mape_percent, s.poir_lung_method.c_str(), s.poir_infected_method.c_str());
  return out + tail;
}

// Reads a mask file, or a probability map binarized at tau.
inline BinaryMask3D read_mask_or_probmap(const fs::path& header, double tau = 0.5) {
  const auto h = read_header(header);
  if (h.dtype == "f32") return binarize(load_probmaps(header), tau);
  return read_mask(header);
}

// Directory layout:
//   gt_dir/<case>/lung.json, gt_dir/<case>/infected.json
//   pred_dir/<method>/<case>/lung.json and/or infected.json
// Prediction files may be masks (u8) or probability maps (f32, cut at tau).
inline MetricsSummary evaluate_directories(const fs::path& pred_dir, const fs::path& gt_dir, double tau = 0.5,
                                           const EvaluateOptions& opt = {}) {
  auto subdirs = [](const fs::path& dir) {
    if (!fs::is_directory(dir)) throw Error(ErrorKind::Io, "not a directory: " + dir.string());
    std::vector<fs::path> out;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory()) out.push_back(e.path());
    std::sort(out.begin(), out.end());
    return out;
  };
  std::vector<TruthCase> truth;
  for (const auto& c : subdirs(gt_dir))
    truth.push_back({c.filename().string(), read_mask(c / "lung.json"), read_mask(c / "infected.json")});
  std::vector<PredictedCase> preds;
  for (const auto& m : subdirs(pred_dir))
    for (const auto& c : subdirs(m)) {
      PredictedCase p{m.filename().string(), c.filename().string(), std::nullopt, std::nullopt};
      if (fs::exists(c / "lung.json")) p.lung = read_mask_or_probmap(c / "lung.json", tau);
      if (fs::exists(c / "infected.json")) p.infected = read_mask_or_probmap(c / "infected.json", tau);
      preds.push_back(std::move(p));
    }
  return evaluate_benchmark(std::move(truth), preds, opt);
}

}  // namespace ctpoir
