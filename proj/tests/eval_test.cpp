#include <gtest/gtest.h>

#include <filesystem>

#include "test_util.hpp"
#include "tnt/data/synth.hpp"
#include "tnt/eval/evaluate.hpp"
#include "tnt/eval/plot.hpp"

using namespace tnt;
using namespace tnt::eval;

namespace {

clf::ClassifierHandle oracle_classifier(std::size_t always_class) {
  clf::ArchSpec arch;
  arch.name = "oracle";
  arch.input_size = 32;
  arch.num_classes = 10;
  arch.rows = {{clf::LayerKind::fc, 10, 0, 0, clf::Activation::softmax}};
  clf::ClassifierHandle h;
  h.arch = arch;
  h.net = clf::build_arch(arch, 1);
  h.label_names = data::scene_class_names(10);
  auto params = h.net.parameters();
  params[0].value->set_zero();
  params[1].value->set_zero();
  (*params[1].value)[always_class] = 10.0;
  return h;
}

img::Patch solid_patch(double v, std::size_t side = 12) {
  img::Patch p;
  p.delta = img::Image(side, side, v);
  p.mask = img::BinaryMask(side, side, 1);
  p.source = img::PatchSource::external_file;
  return p;
}

const data::LabeledDataset& scenes60() {
  static const auto ds = data::synth_scene_dataset(60, data::SceneConfig{}, 501);
  return ds;
}

clf::ClassifierHandle& trained() {
  static clf::ClassifierHandle clf = [] {
    clf::ClassifierTrainConfig cfg;
    cfg.epochs = 8;
    cfg.seed = 13;
    const auto train = data::synth_scene_dataset(300, data::SceneConfig{}, 502);
    return clf::train_classifier(clf::cifar10_arch(1.0 / 16.0), train, cfg);
  }();
  return clf;
}

}  // namespace

TEST(AttackSuccessRate, OracleFoolingPatchGivesOne) {
  auto oracle = oracle_classifier(2);
  const auto& ds = scenes60();
  const auto cell = attack_success_rate(oracle, ds, data::all_indices(ds.size()), solid_patch(0.9),
                                        {img::Location::lower_right, 0.2, 0, 0},
                                        attack::AttackMode::targeted, 2);
  EXPECT_DOUBLE_EQ(cell.asr(), 1.0);
  // class 2 holds a tenth of the split; those samples leave the denominator
  EXPECT_EQ(cell.excluded, 6u);
  EXPECT_EQ(cell.total, 54u);
}

TEST(AttackSuccessRate, IdentityPatchEqualsBaselineMisclassification) {
  auto& clf = trained();
  const auto& ds = scenes60();
  const auto idx = data::all_indices(ds.size());
  img::Patch identity = solid_patch(0.5);
  identity.mask = img::BinaryMask(12, 12, 0);  // empty mask: stamp is the identity
  const auto cell = attack_success_rate(clf, ds, idx, identity,
                                        {img::Location::lower_right, 0.2, 0, 0},
                                        attack::AttackMode::untargeted);
  const double acc = clf::accuracy(clf, ds, idx);
  EXPECT_NEAR(cell.asr(), 1.0 - acc, 1e-12);
}

TEST(AttackSuccessRate, TargetedDenominatorExclusionProperty) {
  auto oracle = oracle_classifier(3);
  // plant a known number of y_target ground-truth samples
  const auto ds = data::synth_scene_dataset(50, data::SceneConfig{}, 503);
  const auto idx = data::all_indices(ds.size());
  std::size_t planted = 0;
  for (auto l : ds.labels) planted += l == 3;
  const auto cell = attack_success_rate(oracle, ds, idx, solid_patch(0.8),
                                        {img::Location::center, 0.15, 0, 0},
                                        attack::AttackMode::targeted, 3);
  EXPECT_EQ(cell.excluded, planted);
  EXPECT_EQ(cell.total + cell.excluded, ds.size());
  EXPECT_LE(cell.fooled, cell.total);
}

TEST(AttackSuccessRate, EmptySplitThrows) {
  auto oracle = oracle_classifier(0);
  const auto& ds = scenes60();
  EXPECT_THROW(attack_success_rate(oracle, ds, {}, solid_patch(0.7),
                                   {img::Location::center, 0.2, 0, 0},
                                   attack::AttackMode::untargeted),
               ConfigError);
}

TEST(LocationSweep, OracleGivesAllOnesRow) {
  auto oracle = oracle_classifier(4);
  const auto& ds = scenes60();
  const auto rows = location_sweep(oracle, ds, data::all_indices(ds.size()), solid_patch(0.9),
                                   canonical_placements(0.2), attack::AttackMode::targeted, 4);
  ASSERT_EQ(rows.size(), 9u);
  for (const auto& r : rows) {
    EXPECT_FALSE(r.skipped);
    EXPECT_DOUBLE_EQ(r.cell.asr(), 1.0);
  }
}

TEST(LocationSweep, OversizedCustomPlacementIsSkippedRow) {
  auto oracle = oracle_classifier(4);
  const auto& ds = scenes60();
  std::vector<img::Placement> placements = canonical_placements(0.2);
  placements.push_back({img::Location::custom, 0.2, 30, 30});  // footprint exceeds 32x32
  const auto rows = location_sweep(oracle, ds, data::all_indices(ds.size()), solid_patch(0.9),
                                   placements, attack::AttackMode::targeted, 4);
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_TRUE(rows.back().skipped);
}

TEST(LocationSweep, WorkerCountDoesNotChangeCounts) {
  auto& clf = trained();
  const auto& ds = scenes60();
  const auto a = location_sweep(clf, ds, data::all_indices(ds.size()), solid_patch(0.8),
                                canonical_placements(0.2), attack::AttackMode::untargeted, 0, 1);
  const auto b = location_sweep(clf, ds, data::all_indices(ds.size()), solid_patch(0.8),
                                canonical_placements(0.2), attack::AttackMode::untargeted, 0, 4);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].cell.fooled, b[i].cell.fooled);
    EXPECT_EQ(a[i].cell.total, b[i].cell.total);
  }
}

TEST(TransferMatrix, SingleModelIsWhiteBoxAsr) {
  auto& clf = trained();
  const auto& ds = scenes60();
  const auto idx = data::all_indices(ds.size());
  const img::Patch p = solid_patch(0.85);
  const img::Placement pl{img::Location::lower_right, 0.2, 0, 0};
  const auto cells = transfer_matrix({{"A", &p}}, {{"A", &clf}}, ds, idx, pl);
  ASSERT_EQ(cells.size(), 1u);
  const auto direct = attack_success_rate(clf, ds, idx, p, pl, attack::AttackMode::untargeted);
  EXPECT_EQ(cells[0].cell.fooled, direct.fooled);
  EXPECT_EQ(cells[0].canvas, 32u);
}

TEST(TransferMatrix, FullGridShapeAndDeterminism) {
  auto& a = trained();
  auto oracle = oracle_classifier(1);
  const auto& ds = scenes60();
  const auto idx = data::all_indices(ds.size());
  const img::Patch p1 = solid_patch(0.85), p2 = solid_patch(0.25);
  const img::Placement pl{img::Location::lower_right, 0.2, 0, 0};
  const auto grid = transfer_matrix({{"p1", &p1}, {"p2", &p2}}, {{"A", &a}, {"O", &oracle}}, ds,
                                    idx, pl, 3);
  ASSERT_EQ(grid.size(), 4u);
  EXPECT_EQ(grid[0].source, "p1");
  EXPECT_EQ(grid[0].target, "A");
  EXPECT_EQ(grid[3].source, "p2");
  EXPECT_EQ(grid[3].target, "O");
  const auto again = transfer_matrix({{"p1", &p1}, {"p2", &p2}}, {{"A", &a}, {"O", &oracle}}, ds,
                                     idx, pl, 1);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_EQ(grid[i].cell.fooled, again[i].cell.fooled);
}

TEST(Baseline, OracleClassifierMeanOneStdZero) {
  auto oracle = oracle_classifier(5);
  const auto& ds = scenes60();
  // untargeted against a constant-prediction model: every sample with gt != 5
  // counts as fooled for every patch, so the per-patch ASR is constant
  const auto stats = random_patch_baseline(oracle, ds, data::all_indices(ds.size()),
                                           BaselineKind::color, 4,
                                           {img::Location::lower_right, 0.2, 0, 0}, 11);
  EXPECT_NEAR(stats.mean, 0.9, 1e-12);
  EXPECT_NEAR(stats.stddev, 0.0, 1e-12);
}

TEST(Baseline, TooFewPatchesThrows) {
  auto oracle = oracle_classifier(0);
  const auto& ds = scenes60();
  EXPECT_THROW(random_patch_baseline(oracle, ds, data::all_indices(ds.size()), BaselineKind::color,
                                     1, {img::Location::center, 0.2, 0, 0}, 1),
               ConfigError);
}

TEST(Baseline, NaturalKindNeedsSourceAndIsDeterministic) {
  auto& clf = trained();
  const auto& ds = scenes60();
  const auto idx = data::all_indices(ds.size());
  EXPECT_THROW(random_patch_baseline(clf, ds, idx, BaselineKind::natural, 4,
                                     {img::Location::center, 0.2, 0, 0}, 1),
               ConfigError);
  const auto flowers = data::synth_flower_dataset(16, 32, 21);
  const auto s1 = random_patch_baseline(clf, ds, idx, BaselineKind::natural, 4,
                                        {img::Location::center, 0.2, 0, 0}, 9, &flowers.store);
  const auto s2 = random_patch_baseline(clf, ds, idx, BaselineKind::natural, 4,
                                        {img::Location::center, 0.2, 0, 0}, 9, &flowers.store);
  EXPECT_EQ(s1.per_patch_asr, s2.per_patch_asr);
}

TEST(SizeSweep, FullOcclusionByTargetLookingPatchIsUpperEnvelope) {
  auto oracle = oracle_classifier(6);
  const auto& ds = scenes60();
  const img::Patch p = solid_patch(0.9);
  SizeSweepSource src;
  src.fixed_patch = &p;
  const auto rows = size_sweep(oracle, ds, data::all_indices(ds.size()), src,
                               {0.05, 0.2, 1.0}, attack::AttackMode::targeted, 6);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_DOUBLE_EQ(rows.back().cell.asr(), 1.0);
  for (const auto& r : rows)
    if (!r.skipped) EXPECT_LE(r.cell.asr(), rows.back().cell.asr() + 1e-12);
}

TEST(SizeSweep, TinyFractionIsSkippedWithNotation) {
  auto oracle = oracle_classifier(6);
  const auto& ds = scenes60();
  const img::Patch p = solid_patch(0.9);
  SizeSweepSource src;
  src.fixed_patch = &p;
  const auto rows = size_sweep(oracle, ds, data::all_indices(ds.size()), src,
                               {0.001, 0.2}, attack::AttackMode::targeted, 6);
  EXPECT_TRUE(rows[0].skipped);   // 0.1% of 32x32 is ~1 pixel
  EXPECT_FALSE(rows[1].skipped);
}

TEST(SizeSweep, UnsortedSizesRejected) {
  auto oracle = oracle_classifier(6);
  const auto& ds = scenes60();
  const img::Patch p = solid_patch(0.9);
  SizeSweepSource src;
  src.fixed_patch = &p;
  EXPECT_THROW(size_sweep(oracle, ds, data::all_indices(ds.size()), src, {0.2, 0.1},
                          attack::AttackMode::targeted, 6),
               ConfigError);
}

TEST(Report, CountsRecomputableAndStableKeyOrder) {
  EvaluationReport r;
  r.task_id = "scenes";
  r.classifier_ids = {"clfA"};
  r.patch_ids = {"tnt0"};
  r.mode = "targeted";
  r.config_hash = "cafe";
  r.seed = 7;
  r.split_asr.emplace_back("full", ReportCell{45, 54, 6});
  r.locations.push_back({"lower_right", false, ReportCell{50, 54, 6}});
  r.sizes.push_back({0.1, false, ReportCell{30, 54, 6}});
  r.baselines.push_back({"color", 0.25, 0.01, {0.24, 0.26}});
  r.wall_seconds = 1.5;

  const Json j = r.to_json();
  EXPECT_DOUBLE_EQ(j["split_asr"]["full"]["asr"].get<double>(), 45.0 / 54.0);
  // payload excludes volatile metadata and is bytewise stable
  EvaluationReport r2 = r;
  r2.wall_seconds = 99.0;
  EXPECT_EQ(r.payload().dump(), r2.payload().dump());
  // key order is fixed by construction
  const std::string s = j.dump();
  EXPECT_LT(s.find("task_id"), s.find("classifier_ids"));
  EXPECT_LT(s.find("classifier_ids"), s.find("split_asr"));

  const std::string csv = report_table_csv(r, "location");
  EXPECT_NE(csv.find("lower_right,0,50,54,6,"), std::string::npos);
  EXPECT_THROW(report_table_csv(r, "bogus"), ConfigError);
}

TEST(Plots, EmitRasterFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "tnt_plots";
  std::filesystem::create_directories(dir);
  std::vector<SizeRow> curve = {{0.05, false, ReportCell{10, 50, 0}},
                                {0.1, false, ReportCell{25, 50, 0}},
                                {0.2, false, ReportCell{40, 50, 0}}};
  const std::string curve_path = (dir / "size.png").string();
  plot_size_curves(curve_path, {{"tnt", curve}});
  EXPECT_TRUE(std::filesystem::exists(curve_path));

  std::vector<LocationRow> rows = {{"lower_right", false, ReportCell{40, 50, 0}},
                                   {"center", false, ReportCell{45, 50, 0}}};
  const std::string bar_path = (dir / "loc.png").string();
  plot_location_bars(bar_path, rows);
  EXPECT_TRUE(std::filesystem::exists(bar_path));
  const auto loaded = img::read_png(curve_path);
  EXPECT_EQ(loaded.height, 320u);
  EXPECT_EQ(loaded.width, 480u);
}
