#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "test_util.hpp"
#include "tnt/clf/dataset.hpp"
#include "tnt/data/synth.hpp"
#include "tnt/gan/dataset.hpp"
#include "tnt/patch/ops.hpp"

using namespace tnt;
using namespace tnt::data;

namespace {
std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}
}  // namespace

TEST(SynthFlower, DeterministicAndForegroundSeparable) {
  const UnlabeledDataset a = synth_flower_dataset(8, 32, 7);
  const UnlabeledDataset b = synth_flower_dataset(8, 32, 7);
  EXPECT_EQ(a.store.pixels, b.store.pixels);
  // mask extraction succeeds on every sample at the default threshold
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto mask = img::compute_mask(a.store.image(i), {});
    EXPECT_GT(mask.count_ones(), 0u);
    EXPECT_LT(mask.count_ones(), 32u * 32u);  // background stays below threshold
  }
}

TEST(SynthScenes, DeterministicLabelsAndRange) {
  SceneConfig cfg;
  const LabeledDataset ds = synth_scene_dataset(40, cfg, 11);
  EXPECT_EQ(ds.size(), 40u);
  EXPECT_EQ(ds.num_classes(), 10u);
  ds.validate();
  for (std::size_t i = 0; i < ds.size(); ++i) EXPECT_EQ(ds.labels[i], i % 10);
  EXPECT_EQ(ds.class_index("car"), 1u);
  const LabeledDataset again = synth_scene_dataset(40, cfg, 11);
  EXPECT_EQ(ds.store.pixels, again.store.pixels);
}

TEST(SynthScenes, CarAliasResolvesAutomobile) {
  LabeledDataset ds;
  ds.class_names = clf::cifar10_class_names();
  EXPECT_EQ(ds.class_index("car"), 1u);
  EXPECT_EQ(ds.class_index("truck"), 9u);
  EXPECT_THROW(ds.class_index("nonexistent"), ConfigError);
}

TEST(UnlabeledFolder, LoadsResizesAndCounts) {
  const auto dir = temp_dir("tnt_unlabeled_test");
  write_flower_corpus(dir.string(), 3, 48, 5);
  std::ofstream(dir / "garbage.png") << "not a png";
  const auto ds = gan::load_unlabeled_dataset(dir.string(), 32);
  EXPECT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.store.image_size, 32u);
  EXPECT_EQ(ds.store.skipped, 1u);
}

TEST(UnlabeledFolder, EmptyFolderThrows) {
  const auto dir = temp_dir("tnt_unlabeled_empty");
  EXPECT_THROW(gan::load_unlabeled_dataset(dir.string(), 32), DatasetEmpty);
}

TEST(LabeledFolder, RoundTripsClassLayout) {
  const auto dir = temp_dir("tnt_labeled_test");
  SceneConfig cfg;
  cfg.num_classes = 4;
  write_scene_corpus(dir.string(), 3, cfg, 13);
  const auto ds = clf::load_labeled_folder(dir.string(), 32);
  EXPECT_EQ(ds.size(), 12u);
  EXPECT_EQ(ds.num_classes(), 4u);
  // class dirs are sorted by name
  std::vector<std::string> sorted = ds.class_names;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(ds.class_names, sorted);
}

TEST(Cifar10Bin, ParsesRecordFormat) {
  const auto dir = temp_dir("tnt_cifar_test");
  const std::string path = (dir / "data_batch_1.bin").string();
  {
    std::ofstream f(path, std::ios::binary);
    for (int rec = 0; rec < 2; ++rec) {
      const char label = static_cast<char>(rec + 3);
      f.write(&label, 1);
      std::vector<char> px(3072, static_cast<char>(rec * 10 + 1));
      f.write(px.data(), static_cast<std::streamsize>(px.size()));
    }
  }
  const auto ds = clf::load_cifar10_bin({path});
  EXPECT_EQ(ds.size(), 2u);
  EXPECT_EQ(ds.labels[0], 3u);
  EXPECT_EQ(ds.labels[1], 4u);
  EXPECT_EQ(ds.store.plane(0)[0], 1);
  EXPECT_EQ(ds.store.plane(1)[0], 11);
  EXPECT_EQ(ds.class_names[1], "automobile");
}

TEST(Cifar10Bin, RejectsTruncatedFile) {
  const auto dir = temp_dir("tnt_cifar_bad");
  const std::string path = (dir / "data_batch_1.bin").string();
  std::ofstream(path, std::ios::binary) << "short";
  EXPECT_THROW(clf::load_cifar10_bin({path}), DatasetSchemaError);
}

TEST(Subsample, DeterministicAndDisjointPrefix) {
  const auto a = subsample_indices(100, 10, 42);
  const auto b = subsample_indices(100, 10, 42);
  EXPECT_EQ(a, b);
  const auto c = subsample_indices(100, 10, 43);
  EXPECT_NE(a, c);
  std::vector<std::size_t> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::unique(sorted.begin(), sorted.end()), sorted.end());
}

TEST(ImageStore, BatchFlipMirrorsColumns) {
  SceneConfig cfg;
  const LabeledDataset ds = synth_scene_dataset(2, cfg, 3);
  std::vector<bool> flip = {true};
  const Tensor<double> flipped = ds.store.batch({0}, &flip);
  const Tensor<double> plain = ds.store.batch({0});
  const std::size_t s = 32;
  for (std::size_t r = 0; r < s; ++r)
    for (std::size_t c = 0; c < s; ++c)
      EXPECT_EQ(flipped.at4(0, 0, r, c), plain.at4(0, 0, r, s - 1 - c));
}
