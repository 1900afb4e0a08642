#pragma once

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#include "tnt/data/dataset.hpp"
#include "tnt/patch/io.hpp"
#include "tnt/patch/resize.hpp"

namespace tnt::gan {

/// Ingests a flat folder of raster images (.png/.ppm), resized to
/// target_size x target_size. Files are visited in sorted-name order so the
/// dataset layout is deterministic; undecodable files are skipped and counted.
inline data::UnlabeledDataset load_unlabeled_dataset(const std::string& path,
                                                     std::size_t target_size) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(path)) throw DatasetEmpty("load_unlabeled_dataset: not a directory: " + path);
  std::vector<std::string> files;
  for (const auto& e : fs::directory_iterator(path))
    if (e.is_regular_file()) files.push_back(e.path().string());
  std::sort(files.begin(), files.end());

  data::UnlabeledDataset ds;
  ds.store.image_size = target_size;
  for (const auto& f : files) {
    try {
      img::Image im = img::load_image(f);
      if (im.height != target_size || im.width != target_size)
        im = img::resize_bilinear(im, target_size, target_size);
      ds.store.push(im);
    } catch (const Error&) {
      ++ds.store.skipped;
    }
  }
  if (ds.size() == 0)
    throw DatasetEmpty("load_unlabeled_dataset: no decodable images in " + path);
  return ds;
}

}  // namespace tnt::gan
