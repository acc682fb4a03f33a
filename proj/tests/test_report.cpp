#include <gtest/gtest.h>

#include <fstream>
#include <functional>

#include "ctpoir/netpbm.hpp"
#include "ctpoir/phantom.hpp"
#include "ctpoir/report.hpp"
#include "ctpoir/seg_harness.hpp"
#include "oracles.hpp"

using namespace ctpoir;

namespace {

const Phantom& small_phantom() {
  static const Phantom ph = [] {
    auto s = default_phantom_spec(6, {64, 64, 12});
    add_default_decoys(s);
    return make_phantom(s);
  }();
  return ph;
}

Error error_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e;
  }
  ADD_FAILURE() << "no ctpoir::Error thrown";
  return Error(ErrorKind::Io, "none");
}

BinaryMask3D first_n(Dims d, std::size_t lo, std::size_t hi) {
  BinaryMask3D m(d, {});
  for (std::size_t i = lo; i < hi; ++i) m[i] = 1;
  return m;
}

// Brute-force contour: mask pixels with a 4-neighbour that is off or outside.
bool on_contour(const BinaryMask3D& m, int x, int y, int z) {
  if (!m(x, y, z)) return false;
  const int dx[4] = {1, -1, 0, 0}, dy[4] = {0, 0, 1, -1};
  for (int k = 0; k < 4; ++k) {
    const int nx = x + dx[k], ny = y + dy[k];
    if (nx < 0 || ny < 0 || nx >= m.dims().nx || ny >= m.dims().ny || !m(nx, ny, z)) return true;
  }
  return false;
}

}  // namespace

TEST(Analyze, GroundTruthMasksGiveDesignedPoir) {
  oracle::TempDir dir;
  const auto& ph = small_phantom();
  write_mask(ph.gt_lung, dir / "lung.json");
  write_mask(ph.gt_infected, dir / "inf.json");
  AnalysisConfig cfg;
  cfg.lung = MaskSource::mask(dir / "lung.json");
  cfg.infected = MaskSource::mask(dir / "inf.json");
  cfg.filter = FilterMode::None;
  const auto a = analyze_case(ph.volume, cfg);
  EXPECT_NEAR(a.report.poir_fraction, ph.designed_poir(), 1e-12);
  EXPECT_EQ(a.report.lung_voxels, ph.gt_lung.count());
  EXPECT_EQ(a.report.pipeline.lung_source, "mask");
  EXPECT_EQ(a.report.pipeline.scorer, "none");
  EXPECT_FALSE(a.report.pipeline.filter_threshold);
}

TEST(Analyze, ReportMatchesEmittedMasks) {
  oracle::TempDir dir;
  const auto& ph = small_phantom();
  const auto a = analyze_case(ph.volume, {});
  EXPECT_TRUE(is_subset(a.infected, a.lung));
  write_mask(a.lung, dir / "lung.json");
  write_mask(a.infected, dir / "infected.json");
  EXPECT_EQ(a.report.poir_fraction, poir(read_mask(dir / "infected.json"), read_mask(dir / "lung.json")));
  EXPECT_EQ(a.report.pipeline.lung_threshold_hu, -200);
  EXPECT_EQ(a.report.pipeline.infected_threshold_hu, -750);
  EXPECT_EQ(a.report.pipeline.scorer, kBuiltinScorerName);
  EXPECT_EQ(a.report.pipeline.regions_total, a.regions.size());
  EXPECT_EQ(a.report.per_slice.size(), std::size_t(ph.volume.dims().nz));
  double lung_mm2 = 0;
  for (const auto& s : a.report.per_slice) lung_mm2 += s.lung_mm2;
  EXPECT_NEAR(lung_mm2 * ph.volume.spacing().sz, a.report.lung_volume_mm3, 1e-6);
}

TEST(Analyze, JsonRoundTrip) {
  const auto& ph = small_phantom();
  AnalysisConfig cfg;
  cfg.infected = MaskSource::threshold(-300);
  cfg.filter_config = {0.6, 10};
  const auto r = analyze_case(ph.volume, cfg).report;
  const auto j = to_json(r);
  EXPECT_EQ(j.at("schema"), kReportSchema);
  EXPECT_EQ(report_from_json(nlohmann::json::parse(j.dump())), r);
  auto bad = j;
  bad["schema"] = "ctpoir.report/999";
  EXPECT_EQ(error_of([&] { report_from_json(bad); }).kind(), ErrorKind::Parse);
}

TEST(Analyze, DeterministicAcrossThreadCounts) {
  const auto& ph = small_phantom();
  AnalysisConfig one, many;
  many.threads = 8;
  const auto a = analyze_case(ph.volume, one), b = analyze_case(ph.volume, many);
  EXPECT_EQ(a.report, b.report);
  EXPECT_EQ(a.infected, b.infected);
  EXPECT_EQ(to_json(a.report).dump(), to_json(b.report).dump());
}

TEST(Analyze, ExternalProbmapMatchesInternalSegmenter) {
  oracle::TempDir dir;
  const auto& ph = small_phantom();
  const auto gray = normalize_to_gray(clip_hu(ph.volume));
  const auto lung_map = run_25d(gray, MaskStackSegmenter(segment_by_threshold(ph.volume, -200)), 2);
  write_probmap(lung_map, dir / "lung_prob.json");
  AnalysisConfig internal, external;
  external.lung = MaskSource::probmap(dir / "lung_prob.json", 0.5);
  const auto a = analyze_case(ph.volume, internal), b = analyze_case(ph.volume, external);
  EXPECT_EQ(a.report.poir_fraction, b.report.poir_fraction);
  EXPECT_EQ(a.lung, b.lung);
  EXPECT_EQ(b.report.pipeline.lung_source, "probmap");
  EXPECT_EQ(b.report.pipeline.lung_tau, 0.5);
}

TEST(Analyze, SidecarScores) {
  oracle::TempDir dir;
  const auto& ph = small_phantom();
  AnalysisConfig cfg;
  cfg.infected = MaskSource::threshold(-200);
  cfg.filter = FilterMode::None;
  const auto plain = analyze_case(ph.volume, cfg);
  const auto cands = extract_candidates(plain.infected, normalize_to_gray(clip_hu(ph.volume)));
  std::ofstream csv(dir / "scores.csv");
  csv << "region_id,score\n";
  for (const auto& c : cands) csv << c.region.id << ',' << (c.region.size() >= 50 ? 0.9 : 0.1) << '\n';
  csv.close();
  cfg.filter = FilterMode::Sidecar;
  cfg.scores = dir / "scores.csv";
  const auto a = analyze_case(ph.volume, cfg);
  EXPECT_EQ(a.report.pipeline.scorer, "sidecar:scores.csv");
  for (const auto& r : connected_components(a.infected)) EXPECT_GE(r.size(), 50u);
  EXPECT_LT(a.report.infected_voxels, plain.report.infected_voxels);
}

TEST(Analyze, ErrorsCarryTheirStage) {
  oracle::TempDir dir;
  const auto& ph = small_phantom();
  {
    AnalysisConfig cfg;
    cfg.lung = MaskSource::probmap(dir / "missing.json");
    const auto e = error_of([&] { analyze_case(ph.volume, cfg); });
    EXPECT_EQ(e.stage(), "segment_lung");
    EXPECT_EQ(e.kind(), ErrorKind::Io);
  }
  {
    write_mask(BinaryMask3D({4, 4, 4}, {}), dir / "small.json");
    AnalysisConfig cfg;
    cfg.infected = MaskSource::mask(dir / "small.json");
    const auto e = error_of([&] { analyze_case(ph.volume, cfg); });
    EXPECT_EQ(e.stage(), "segment_infected");
    EXPECT_EQ(e.kind(), ErrorKind::DimMismatch);
  }
  {
    std::ofstream(dir / "empty.csv") << "region_id,score\n";
    AnalysisConfig cfg;
    cfg.filter = FilterMode::Sidecar;
    cfg.scores = dir / "empty.csv";
    cfg.infected = MaskSource::threshold(-200);
    const auto e = error_of([&] { analyze_case(ph.volume, cfg); });
    EXPECT_EQ(e.stage(), "filter");
    EXPECT_EQ(e.kind(), ErrorKind::ScorerFailure);
  }
  {
    CtVolume air({16, 16, 2}, {1, 1, 1}, std::vector<std::int16_t>(512, -1000));
    const auto e = error_of([&] { analyze_case(air, {}); });
    EXPECT_EQ(e.stage(), "quantify");
    EXPECT_EQ(e.kind(), ErrorKind::EmptyLung);
  }
}

TEST(Analyze, ConfigFromJson) {
  const auto j = nlohmann::json::parse(R"({
    "lung": {"source": "probmap", "path": "l.json", "tau": 0.4},
    "infected": {"source": "threshold", "threshold_hu": -300},
    "filter": {"mode": "sidecar", "threshold": 0.5, "min_region_voxels": 7, "scores": "s.csv"}
  })");
  const auto c = analysis_config_from_json(j);
  EXPECT_EQ(c.lung.kind, MaskSourceKind::ProbMap);
  EXPECT_EQ(c.lung.path, fs::path("l.json"));
  EXPECT_EQ(c.lung.tau, 0.4);
  EXPECT_EQ(c.infected.threshold_hu, -300);
  EXPECT_EQ(c.filter, FilterMode::Sidecar);
  EXPECT_EQ(c.filter_config.threshold, 0.5);
  EXPECT_EQ(c.filter_config.min_region_voxels, 7u);
  EXPECT_EQ(c.scores, fs::path("s.csv"));
  EXPECT_THROW(analysis_config_from_json({{"filter", {{"mode", "magic"}}}}), Error);
}

TEST(Overlay, EmptyMasksArePureGray) {
  GrayVolume g({4, 3, 1}, {});
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = std::uint8_t(i * 20);
  const BinaryMask3D none(g.dims(), g.spacing());
  const auto rgb = overlay_slice(g, none, none, 0);
  for (std::size_t i = 0; i < g.size(); ++i)
    for (int c = 0; c < 3; ++c) EXPECT_EQ(rgb[3 * i + c], g[i]);
}

TEST(Overlay, FullMaskOutlinesTheBorder) {
  const Dims d{6, 5, 1};
  GrayVolume g(d, {}, 77);
  const BinaryMask3D full(d, {}, 1), none(d, {});
  const auto rgb = overlay_slice(g, full, none, 0);
  for (int y = 0; y < d.ny; ++y)
    for (int x = 0; x < d.nx; ++x) {
      const auto i = 3 * std::size_t(y * d.nx + x);
      const bool border = x == 0 || y == 0 || x == d.nx - 1 || y == d.ny - 1;
      const std::array<std::uint8_t, 3> expect = border ? std::array<std::uint8_t, 3>{0, 0, 255}
                                                        : std::array<std::uint8_t, 3>{77, 77, 77};
      EXPECT_EQ((std::array<std::uint8_t, 3>{rgb[i], rgb[i + 1], rgb[i + 2]}), expect) << x << "," << y;
    }
}

TEST(Overlay, PhantomContoursMatchNeighbourScan) {
  oracle::TempDir dir;
  const auto& ph = small_phantom();
  emit_overlays(ph.volume, ph.gt_lung, ph.gt_infected, dir.path());
  const auto gray = normalize_to_gray(clip_hu(ph.volume));
  const auto& d = ph.volume.dims();
  for (int z : {0, d.nz / 2, d.nz - 1}) {
    const auto img = read_pnm(dir / overlay_name(z));
    ASSERT_EQ(img.width, d.nx);
    ASSERT_EQ(img.height, d.ny);
    ASSERT_EQ(img.channels, 3);
    for (int y = 0; y < d.ny; ++y)
      for (int x = 0; x < d.nx; ++x) {
        const auto i = 3 * std::size_t(y * d.nx + x);
        const std::uint8_t g = gray(x, y, z);
        std::array<std::uint8_t, 3> expect{g, g, g};
        if (on_contour(ph.gt_lung, x, y, z)) expect = {0, 0, 255};
        if (on_contour(ph.gt_infected, x, y, z)) expect = {255, 0, 0};
        ASSERT_EQ((std::array<std::uint8_t, 3>{img.pixels[i], img.pixels[i + 1], img.pixels[i + 2]}), expect)
            << x << "," << y << "," << z;
      }
  }
  EXPECT_TRUE(fs::exists(dir / "slice_0011.ppm"));
  EXPECT_FALSE(fs::exists(dir / "slice_0012.ppm"));
}

TEST(Netpbm, PgmRoundTrip) {
  oracle::TempDir dir;
  const std::vector<std::uint8_t> px{0, 10, 20, 30, 40, 255};
  write_pgm(dir / "a.pgm", 3, 2, px);
  const auto img = read_pnm(dir / "a.pgm");
  EXPECT_EQ(img.channels, 1);
  EXPECT_EQ(img.pixels, px);
  EXPECT_THROW(write_pgm(dir / "b.pgm", 4, 2, px), Error);
}

TEST(Evaluate, IdentityPredictions) {
  std::vector<TruthCase> truth;
  std::vector<PredictedCase> preds;
  for (int k = 0; k < 3; ++k) {
    const Dims d{10, 10, 1};
    const auto id = "case" + std::to_string(k);
    truth.push_back({id, first_n(d, 0, 60), first_n(d, 0, 5 + 5 * k)});
    preds.push_back({"oracle", id, truth.back().lung, truth.back().infected});
  }
  const auto s = evaluate_benchmark(truth, preds);
  ASSERT_EQ(s.rows.size(), 2u);
  EXPECT_EQ(s.rows[0].structure, kStructureLung);
  EXPECT_EQ(s.rows[0].m_dice, 1.0);
  EXPECT_EQ(s.rows[1].m_dice, 1.0);
  EXPECT_NEAR(s.pearson_r, 1.0, 1e-12);
  EXPECT_EQ(s.mape_percent, 0.0);
}

TEST(Evaluate, MeanOfTwoCases) {
  const Dims d{10, 10, 1};
  std::vector<TruthCase> truth{{"b", first_n(d, 0, 50), first_n(d, 0, 4)}, {"a", first_n(d, 0, 50), first_n(d, 0, 5)}};
  std::vector<PredictedCase> preds{{"m", "a", first_n(d, 0, 50), first_n(d, 1, 6)},
                                   {"m", "b", first_n(d, 0, 50), first_n(d, 1, 7)}};
  const auto s = evaluate_benchmark(truth, preds);
  ASSERT_EQ(s.rows.size(), 2u);
  EXPECT_NEAR(s.rows[1].m_dice, 0.7, 1e-12);
  EXPECT_EQ(s.rows[1].cases, 2u);
  ASSERT_EQ(s.poir_pairs.size(), 2u);
  EXPECT_EQ(s.poir_pairs[0].case_id, "a");
  EXPECT_NEAR(s.mape_percent, 25.0, 1e-9);
  EXPECT_NEAR(s.pearson_r, -1.0, 1e-12);
  EXPECT_EQ(summary_from_json(nlohmann::json::parse(to_json(s).dump())), s);
}

TEST(Evaluate, MissingPredictionIsAnError) {
  const Dims d{10, 10, 1};
  std::vector<TruthCase> truth{{"a", first_n(d, 0, 50), first_n(d, 0, 4)}, {"b", first_n(d, 0, 50), first_n(d, 0, 5)}};
  std::vector<PredictedCase> preds{{"m", "a", first_n(d, 0, 50), std::nullopt}};
  EXPECT_EQ(error_of([&] { evaluate_benchmark(truth, preds); }).kind(), ErrorKind::InvalidArgument);
}

TEST(Evaluate, TableLayoutFromDirectories) {
  oracle::TempDir dir;
  const auto gt = dir / "gt", pred = dir / "pred";
  for (std::uint64_t seed : {1, 2, 3}) {
    auto spec = default_phantom_spec(seed, {48, 48, 8});
    spec.lesions.resize(seed + 1);
    const auto ph = make_phantom(spec);
    const auto id = "case" + std::to_string(seed);
    write_mask(ph.gt_lung, gt / id / "lung.json");
    write_mask(ph.gt_infected, gt / id / "infected.json");
    write_mask(segment_by_threshold(ph.volume, -200), pred / "UNet" / id / "lung.json");
    write_probmap(mask_to_probabilities(ph.gt_infected), pred / "2.5D UNet" / id / "infected.json");
    write_mask(mask_union(ph.gt_infected, first_n(ph.gt_lung.dims(), 0, 1)),
               pred / "2.5D UNet + classifier" / id / "infected.json");
  }
  const auto s = evaluate_directories(pred, gt, 0.5);
  ASSERT_EQ(s.rows.size(), 3u);
  EXPECT_EQ(s.rows[0].method, "2.5D UNet");
  EXPECT_EQ(s.rows[0].m_dice, 1.0);
  EXPECT_EQ(s.poir_lung_method, "UNet");
  EXPECT_EQ(s.poir_infected_method, "2.5D UNet");
  const auto table = format_table(s);
  EXPECT_NE(table.find("intact lung"), std::string::npos);
  EXPECT_NE(table.find("infected region"), std::string::npos);
  EXPECT_NE(table.find("2.5D UNet + classifier"), std::string::npos);
  EXPECT_NE(table.find("Pearson r ="), std::string::npos);
}
