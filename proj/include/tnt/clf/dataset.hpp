#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "tnt/data/dataset.hpp"
#include "tnt/patch/io.hpp"
#include "tnt/patch/resize.hpp"

namespace tnt::clf {

/// Folder-per-class layout (the usual archive layout for GTSRB-style sets):
/// each subdirectory name is a class label, files inside are samples. Classes
/// are sorted by name; files are visited in sorted order per class.
inline data::LabeledDataset load_labeled_folder(const std::string& path, std::size_t target_size) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(path)) throw DatasetEmpty("load_labeled_folder: not a directory: " + path);
  std::vector<std::string> classes;
  for (const auto& e : fs::directory_iterator(path))
    if (e.is_directory()) classes.push_back(e.path().filename().string());
  std::sort(classes.begin(), classes.end());
  if (classes.empty()) throw DatasetEmpty("load_labeled_folder: no class directories in " + path);

  data::LabeledDataset ds;
  ds.store.image_size = target_size;
  ds.class_names = classes;
  for (std::size_t ci = 0; ci < classes.size(); ++ci) {
    std::vector<std::string> files;
    for (const auto& e : fs::directory_iterator(fs::path(path) / classes[ci]))
      if (e.is_regular_file()) files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      try {
        img::Image im = img::load_image(f);
        if (im.height != target_size || im.width != target_size)
          im = img::resize_bilinear(im, target_size, target_size);
        ds.store.push(im);
        ds.labels.push_back(ci);
      } catch (const Error&) {
        ++ds.store.skipped;
      }
    }
  }
  if (ds.size() == 0) throw DatasetEmpty("load_labeled_folder: no decodable images in " + path);
  ds.validate();
  return ds;
}

inline const std::vector<std::string>& cifar10_class_names() {
  static const std::vector<std::string> names = {"airplane", "automobile", "bird", "cat", "deer",
                                                 "dog",      "frog",       "horse", "ship", "truck"};
  return names;
}

/// Reader for the CIFAR-10 binary batch format: each record is one label byte
/// followed by 3072 bytes of CHW pixel planes at 32x32.
inline data::LabeledDataset load_cifar10_bin(const std::vector<std::string>& batch_files) {
  constexpr std::size_t kRecord = 1 + 3 * 32 * 32;
  data::LabeledDataset ds;
  ds.store.image_size = 32;
  ds.class_names = cifar10_class_names();
  for (const auto& path : batch_files) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DatasetEmpty("load_cifar10_bin: cannot open " + path);
    std::vector<char> buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (buf.empty() || buf.size() % kRecord != 0)
      throw DatasetSchemaError("load_cifar10_bin: file size is not a multiple of record size: " + path);
    const std::size_t n = buf.size() / kRecord;
    for (std::size_t i = 0; i < n; ++i) {
      const auto* rec = reinterpret_cast<const std::uint8_t*>(buf.data()) + i * kRecord;
      const std::size_t label = rec[0];
      if (label >= 10) throw DatasetSchemaError("load_cifar10_bin: label byte out of range");
      ds.labels.push_back(label);
      ds.store.pixels.insert(ds.store.pixels.end(), rec + 1, rec + kRecord);
    }
  }
  if (ds.size() == 0) throw DatasetEmpty("load_cifar10_bin: no records");
  ds.validate();
  return ds;
}

}  // namespace tnt::clf
