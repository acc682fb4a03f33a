// ctpoir: command line front end for the CT PoIR pipeline.
//
// Exit codes: 0 success, 2 bad input (files, arguments, config), 3 a
// pipeline stage failed.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "ctpoir/dicom.hpp"
#include "ctpoir/netpbm.hpp"
#include "ctpoir/phantom.hpp"
#include "ctpoir/report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ctpoir;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitPipeline = 3;

struct Globals {
  std::string config_path;
  int threads = 0;
  std::uint64_t seed = 0;
  json config = json::object();
  bool seed_given = false;
};

// Reads --config and fills in threads/seed unless given on the command line.
void load_config(Globals& g, bool threads_given) {
  if (!g.config_path.empty()) {
    const auto bytes = detail::read_file_bytes(g.config_path);
    try {
      g.config = json::parse(bytes.begin(), bytes.end());
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Parse, g.config_path + ": " + e.what());
    }
    if (!g.config.is_object()) throw Error(ErrorKind::Parse, g.config_path + ": expected a JSON object");
    try {
      if (!threads_given && g.config.contains("threads")) g.threads = g.config.at("threads").get<int>();
      if (!g.seed_given && g.config.contains("seed")) {
        g.seed = g.config.at("seed").get<std::uint64_t>();
        g.seed_given = true;
      }
    } catch (const json::exception& e) {
      throw Error(ErrorKind::Parse, g.config_path + ": " + e.what());
    }
  }
  if (g.threads <= 0) g.threads = default_threads();
}

// Internal header file, or a directory holding a DICOM series.
CtVolume load_volume(const fs::path& path, int threads) {
  if (fs::is_directory(path)) return read_dicom_series(path, threads);
  return read_internal(path);
}

void write_json(const fs::path& path, const json& j) { detail::write_text(path, j.dump(2) + "\n"); }

std::string percent(double fraction) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f%%", fraction * 100.0);
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantify the proportion of infected lung (PoIR) in chest CT"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "JSON configuration file")->check(CLI::ExistingFile);
  auto* threads_opt = app.add_option("--threads", g.threads, "Worker threads (default: hardware concurrency)");
  auto* seed_opt = app.add_option("--seed", g.seed, "Random seed (phantom noise, DICOM file shuffling)");

  // convert
  auto* convert = app.add_subcommand("convert", "Read a DICOM series into the internal volume format");
  std::string convert_in, convert_out, convert_id;
  convert->add_option("dicom_dir", convert_in, "Directory of DICOM slices")->required()->check(CLI::ExistingDirectory);
  convert->add_option("--out", convert_out, "Output header (.json)")->required();
  convert->add_option("--case-id", convert_id, "Override the case id");

  // bootstrap
  auto* bootstrap = app.add_subcommand("bootstrap", "Initial lung/infected masks from fixed HU thresholds");
  std::string boot_in, boot_out;
  int t_lung = kDefaultLungThreshold, t_inf = kDefaultInfectedThreshold;
  bootstrap->add_option("volume", boot_in, "Volume header or DICOM directory")->required();
  bootstrap->add_option("--out-dir", boot_out, "Output directory")->required();
  bootstrap->add_option("--t-lung", t_lung, "Lung threshold (HU)")->capture_default_str();
  bootstrap->add_option("--t-inf", t_inf, "Infected threshold (HU)")->capture_default_str();

  // segment
  auto* segment = app.add_subcommand("segment", "Binarize a 2.5D probability map into a mask");
  std::string seg_in, seg_probmaps, seg_out, seg_probmap_out;
  int seg_threshold = 0;
  double seg_tau = 0.5;
  segment->add_option("volume", seg_in, "Volume header or DICOM directory")->required();
  auto* seg_pm = segment->add_option("--probmaps", seg_probmaps, "Probability map from an external segmenter");
  auto* seg_bt = segment->add_option("--builtin-threshold", seg_threshold, "Use the HU-threshold reference segmenter");
  seg_pm->excludes(seg_bt);
  segment->add_option("--tau", seg_tau, "Binarization cut (p >= tau)")->capture_default_str();
  segment->add_option("--out", seg_out, "Output mask header")->required();
  segment->add_option("--probmap-out", seg_probmap_out, "Also write the averaged probability map");

  // patches
  auto* patches = app.add_subcommand("patches", "Export per-slice region patches as PGM");
  std::string patch_mask, patch_vol, patch_out;
  patches->add_option("mask", patch_mask, "Candidate mask header")->required();
  patches->add_option("volume", patch_vol, "Volume header or DICOM directory")->required();
  patches->add_option("--out-dir", patch_out, "Output directory")->required();

  // filter
  auto* filter = app.add_subcommand("filter", "Drop candidate regions scored below the threshold");
  std::string filt_mask, filt_vol, filt_scores, filt_out, filt_scores_out;
  bool filt_builtin = false;
  FilterConfig filt_cfg;
  filter->add_option("mask", filt_mask, "Candidate mask header")->required();
  filter->add_option("volume", filt_vol, "Volume header or DICOM directory")->required();
  auto* f_scores = filter->add_option("--scores", filt_scores, "Sidecar CSV region_id,score")->check(CLI::ExistingFile);
  auto* f_builtin = filter->add_flag("--builtin", filt_builtin, "Use the built-in heuristic scorer");
  f_scores->excludes(f_builtin);
  filter->add_option("--threshold", filt_cfg.threshold, "Keep regions with score >= threshold")
      ->capture_default_str()
      ->check(CLI::Range(0.0, 1.0));
  filter->add_option("--min-voxels", filt_cfg.min_region_voxels, "Minimum region size")->capture_default_str();
  filter->add_option("--out", filt_out, "Output mask header")->required();
  filter->add_option("--scores-out", filt_scores_out, "Write the region scores as CSV");

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Full case analysis and PoIR report");
  std::string an_in, an_out, an_scores, an_filter, an_case;
  std::optional<int> an_lung_t, an_inf_t;
  std::string an_lung_pm, an_lung_mask, an_inf_pm, an_inf_mask;
  std::optional<double> an_tau, an_filter_t;
  std::optional<std::size_t> an_min_vox;
  analyze->add_option("volume", an_in, "Volume header or DICOM directory")->required();
  analyze->add_option("--out-dir", an_out, "Output directory (report.json, lung.json, infected.json)")->required();
  auto* al_t = analyze->add_option("--lung-threshold", an_lung_t, "Lung from HU threshold (default -200)");
  auto* al_p = analyze->add_option("--lung-probmap", an_lung_pm, "Lung from a probability map");
  auto* al_m = analyze->add_option("--lung-mask", an_lung_mask, "Lung from a mask file");
  al_t->excludes(al_p)->excludes(al_m);
  al_p->excludes(al_m);
  auto* ai_t = analyze->add_option("--infected-threshold", an_inf_t, "Infected = lung voxels above T (default -750)");
  auto* ai_p = analyze->add_option("--infected-probmap", an_inf_pm, "Infected from a probability map");
  auto* ai_m = analyze->add_option("--infected-mask", an_inf_mask, "Infected from a mask file");
  ai_t->excludes(ai_p)->excludes(ai_m);
  ai_p->excludes(ai_m);
  analyze->add_option("--tau", an_tau, "Binarization cut for probability maps (default 0.5)");
  analyze->add_option("--filter", an_filter, "Region filter: none, builtin or sidecar (default builtin)")
      ->check(CLI::IsMember({"none", "builtin", "sidecar"}));
  analyze->add_option("--scores", an_scores, "Sidecar CSV for --filter sidecar");
  analyze->add_option("--filter-threshold", an_filter_t, "Region keep threshold (default 0.45)");
  analyze->add_option("--min-voxels", an_min_vox, "Minimum kept region size (default 1)");
  analyze->add_option("--case-id", an_case, "Override the case id");

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "m-Dice table, Pearson r and mAPE over a benchmark");
  std::string ev_pred, ev_gt, ev_out;
  EvaluateOptions ev_opt;
  double ev_tau = 0.5;
  evaluate->add_option("--pred-dir", ev_pred, "Predictions: <method>/<case>/{lung,infected}.json")
      ->required()
      ->check(CLI::ExistingDirectory);
  evaluate->add_option("--gt-dir", ev_gt, "Ground truth: <case>/{lung,infected}.json")
      ->required()
      ->check(CLI::ExistingDirectory);
  evaluate->add_option("--out", ev_out, "Summary JSON")->required();
  evaluate->add_option("--tau", ev_tau, "Cut for probability-map predictions")->capture_default_str();
  evaluate->add_option("--poir-lung-method", ev_opt.poir_lung_method, "Method giving the lung for PoIR");
  evaluate->add_option("--poir-infected-method", ev_opt.poir_infected_method, "Method giving the infection for PoIR");

  // overlay
  auto* overlay = app.add_subcommand("overlay", "Per-slice PPM images with lung and infected contours");
  std::string ov_in, ov_lung, ov_inf, ov_out;
  overlay->add_option("volume", ov_in, "Volume header or DICOM directory")->required();
  overlay->add_option("--lung", ov_lung, "Lung mask header")->required();
  overlay->add_option("--infected", ov_inf, "Infected mask header")->required();
  overlay->add_option("--out-dir", ov_out, "Output directory")->required();

  // phantom
  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic CT phantom with exact ground truth");
  std::string ph_spec, ph_out, ph_preset = "default";
  bool ph_dicom = false;
  phantom->add_option("--spec", ph_spec, "Phantom spec JSON (overrides the preset)")->check(CLI::ExistingFile);
  phantom->add_option("--preset", ph_preset, "default, decoys, paper or paper-decoys")
      ->capture_default_str()
      ->check(CLI::IsMember({"default", "decoys", "paper", "paper-decoys"}));
  phantom->add_option("--out-dir", ph_out, "Output directory")->required();
  phantom->add_flag("--dicom", ph_dicom, "Also write a DICOM series to <out-dir>/dicom");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitInput;
  }
  g.seed_given = seed_opt->count() > 0;

  try {
    load_config(g, threads_opt->count() > 0);

    if (convert->parsed()) {
      auto v = read_dicom_series(convert_in, g.threads);
      if (!convert_id.empty()) v.case_id = convert_id;
      write_internal(v, convert_out);
      std::cout << v.case_id << ": " << v.dims().nx << "x" << v.dims().ny << "x" << v.dims().nz << "\n";

    } else if (bootstrap->parsed()) {
      const auto v = load_volume(boot_in, g.threads);
      const auto labels = bootstrap_labels(v, t_lung, t_inf);
      write_mask(labels.lung, fs::path(boot_out) / "lung.json");
      write_mask(labels.infected, fs::path(boot_out) / "infected.json");
      std::cout << "lung " << labels.lung.count() << " voxels, infected " << labels.infected.count() << " voxels\n";

    } else if (segment->parsed()) {
      if (seg_pm->count() == 0 && seg_bt->count() == 0)
        throw Error(ErrorKind::InvalidArgument, "segment needs --probmaps or --builtin-threshold");
      const auto v = load_volume(seg_in, g.threads);
      ProbabilityMap3D pm;
      if (seg_pm->count()) {
        pm = load_probmaps(seg_probmaps);
        require_same_dims(v, pm, "volume and probability map");
      } else {
        const auto gray = normalize_to_gray(clip_hu(v));
        pm = run_25d(gray, MaskStackSegmenter(segment_by_threshold(v, seg_threshold)), g.threads);
      }
      const auto mask = binarize(pm, seg_tau);
      write_mask(mask, seg_out);
      if (!seg_probmap_out.empty()) write_probmap(pm, seg_probmap_out);
      std::cout << mask.count() << " voxels\n";

    } else if (patches->parsed()) {
      const auto mask = read_mask(patch_mask);
      const auto v = load_volume(patch_vol, g.threads);
      const auto cands = extract_candidates(mask, normalize_to_gray(clip_hu(v)));
      std::string index = "region_id,voxels,z_min,z_max,patches\n";
      for (const auto& c : cands) {
        for (const auto& p : c.patches) {
          char name[64];
          std::snprintf(name, sizeof name, "region_%05d_z%04d.pgm", p.region_id, p.slice);
          write_pgm(fs::path(patch_out) / name, p.side, p.side, p.gray);
        }
        index += std::to_string(c.region.id) + "," + std::to_string(c.region.size()) + "," +
                 std::to_string(c.region.z_min) + "," + std::to_string(c.region.z_max) + "," +
                 std::to_string(c.patches.size()) + "\n";
      }
      detail::write_text(fs::path(patch_out) / "regions.csv", index);
      std::cout << cands.size() << " regions\n";

    } else if (filter->parsed()) {
      if (!filt_builtin && filt_scores.empty())
        throw Error(ErrorKind::InvalidArgument, "filter needs --scores or --builtin");
      const auto mask = read_mask(filt_mask);
      const auto v = load_volume(filt_vol, g.threads);
      auto cands = extract_candidates(mask, normalize_to_gray(clip_hu(v)));
      const auto scored = filt_builtin ? score_regions(std::move(cands), BuiltinScorer{}, g.threads)
                                       : score_regions(std::move(cands), SidecarScorer::from_file(filt_scores), g.threads);
      const auto kept = filter_regions(scored, filt_cfg, mask);
      write_mask(kept, filt_out);
      if (!filt_scores_out.empty()) {
        std::string csv = "region_id,score\n";
        for (const auto& c : scored) {
          char buf[64];
          std::snprintf(buf, sizeof buf, "%d,%.17g\n", c.region.id, c.score);
          csv += buf;
        }
        detail::write_text(filt_scores_out, csv);
      }
      std::cout << scored.size() << " regions, " << kept.count() << " of " << mask.count() << " voxels kept\n";

    } else if (analyze->parsed()) {
      AnalysisConfig cfg;
      if (g.config.contains("analysis")) cfg = analysis_config_from_json(g.config.at("analysis"), cfg);
      if (an_lung_t) cfg.lung = MaskSource::threshold(*an_lung_t);
      if (!an_lung_pm.empty()) cfg.lung = MaskSource::probmap(an_lung_pm, cfg.lung.tau);
      if (!an_lung_mask.empty()) cfg.lung = MaskSource::mask(an_lung_mask);
      if (an_inf_t) cfg.infected = MaskSource::threshold(*an_inf_t);
      if (!an_inf_pm.empty()) cfg.infected = MaskSource::probmap(an_inf_pm, cfg.infected.tau);
      if (!an_inf_mask.empty()) cfg.infected = MaskSource::mask(an_inf_mask);
      if (an_tau) cfg.lung.tau = cfg.infected.tau = *an_tau;
      if (!an_filter.empty())
        cfg.filter = an_filter == "none" ? FilterMode::None : an_filter == "builtin" ? FilterMode::Builtin : FilterMode::Sidecar;
      if (!an_scores.empty()) cfg.scores = an_scores;
      if (an_filter_t) cfg.filter_config.threshold = *an_filter_t;
      if (an_min_vox) cfg.filter_config.min_region_voxels = *an_min_vox;
      if (cfg.filter == FilterMode::Sidecar && cfg.scores.empty())
        throw Error(ErrorKind::InvalidArgument, "--filter sidecar needs --scores");
      cfg.threads = g.threads;

      auto v = load_volume(an_in, g.threads);
      if (!an_case.empty()) v.case_id = an_case;
      const auto result = analyze_case(v, cfg);
      const fs::path out(an_out);
      write_json(out / "report.json", to_json(result.report));
      write_mask(result.lung, out / "lung.json");
      write_mask(result.infected, out / "infected.json");
      std::cout << result.report.case_id << ": PoIR " << percent(result.report.poir_fraction) << " ("
                << result.report.infected_volume_mm3 << " / " << result.report.lung_volume_mm3 << " mm3)\n";

    } else if (evaluate->parsed()) {
      ev_opt.threads = g.threads;
      const auto summary = evaluate_directories(ev_pred, ev_gt, ev_tau, ev_opt);
      write_json(ev_out, to_json(summary));
      std::cout << format_table(summary);

    } else if (overlay->parsed()) {
      const auto v = load_volume(ov_in, g.threads);
      emit_overlays(v, read_mask(ov_lung), read_mask(ov_inf), ov_out);
      std::cout << v.dims().nz << " slices\n";

    } else if (phantom->parsed()) {
      PhantomSpec spec;
      if (!ph_spec.empty()) {
        const auto bytes = detail::read_file_bytes(ph_spec);
        json j;
        try {
          j = json::parse(bytes.begin(), bytes.end());
        } catch (const json::exception& e) {
          throw Error(ErrorKind::Parse, ph_spec + ": " + e.what());
        }
        spec = phantom_spec_from_json(j);
      } else {
        spec = ph_preset.rfind("paper", 0) == 0 ? paper_like_phantom_spec() : default_phantom_spec();
        if (ph_preset.find("decoys") != std::string::npos) add_default_decoys(spec);
      }
      if (g.seed_given) spec.seed = g.seed;
      const auto ph = make_phantom(spec);
      const fs::path out(ph_out);
      write_json(out / "spec.json", phantom_spec_to_json(spec));
      write_internal(ph.volume, out / "volume.json");
      write_mask(ph.gt_lung, out / "lung.json");
      write_mask(ph.gt_infected, out / "infected.json");
      write_mask(ph.decoys, out / "decoys.json");
      if (ph_dicom) {
        DicomWriteOptions opt;
        opt.seed = spec.seed;
        write_dicom_series(ph.volume, out / "dicom", opt);
      }
      std::cout << ph.volume.case_id << ": designed PoIR " << percent(ph.designed_poir()) << "\n";
    }
  } catch (const Error& e) {
    std::cerr << "ctpoir: " << e.what() << "\n";
    return is_input_error(e.kind()) ? kExitInput : kExitPipeline;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "ctpoir: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    std::cerr << "ctpoir: " << e.what() << "\n";
    return kExitPipeline;
  }
  return kExitOk;
}
