#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "tnt/advgen/finetune.hpp"
#include "tnt/attack/config.hpp"
#include "tnt/clf/classifier.hpp"
#include "tnt/common/error.hpp"
#include "tnt/common/sha256.hpp"
#include "tnt/data/synth.hpp"
#include "tnt/gan/dataset.hpp"
#include "tnt/gan/wgan.hpp"

namespace tnt::config {

// nlohmann::json keeps object keys sorted, which doubles as the canonical
// form for hashing.
using CJson = nlohmann::json;

/// Full default document; it also defines the schema. A user config may only
/// contain keys that exist here, with matching JSON types.
inline CJson default_config() {
  return CJson::parse(R"JSON({
  "dataset": {
    "kind": "synthetic_scenes",
    "path": "",
    "image_size": 32,
    "num_classes": 10,
    "train_count": 4000,
    "test_count": 2000,
    "seed": 1,
    "scene": {
      "pattern_half_lo": 0.28,
      "pattern_half_hi": 0.42,
      "distractor_prob": 0.75,
      "distractor_alpha_lo": 0.30,
      "distractor_alpha_hi": 0.55,
      "noise_sigma": 0.06
    },
    "unlabeled_kind": "synthetic_flowers",
    "unlabeled_path": "",
    "unlabeled_count": 512,
    "unlabeled_seed": 7
  },
  "gan": {
    "lambda_gp": 10.0,
    "critic_steps_per_gen_step": 5,
    "batch_size": 32,
    "total_steps": 2000,
    "lr": 0.0001,
    "beta1": 0.5,
    "beta2": 0.9,
    "seed": 1,
    "latent_dim": 128,
    "output_size": 32,
    "base_channels": 64,
    "checkpoint_every": 500,
    "sample_every": 500,
    "hflip_augment": true
  },
  "classifier": {
    "arch": "cifar10",
    "width_mult": 1.0,
    "epochs": 100,
    "batch_size": 32,
    "lr": 0.001,
    "beta1": 0.9,
    "beta2": 0.999,
    "seed": 1,
    "normalization": {
      "mean": [0.5, 0.5, 0.5],
      "std": [0.5, 0.5, 0.5]
    }
  },
  "attack": {
    "mode": "targeted",
    "target_class": "car",
    "lambda_balance": 1.0,
    "epsilon": 0.01,
    "n_iter": 20,
    "batch_size": 32,
    "tau_batch": 0.9,
    "tau_val": 0.9,
    "placement": {"location": "lower_right", "scale_fraction": 0.2, "row": 0, "col": 0},
    "max_restarts": 50,
    "seed": 1,
    "update_every": 1,
    "resample_limit": 16,
    "threshold": {"mode": "fixed", "value": 0.1},
    "search_pool": 100,
    "val_split": 1000
  },
  "finetune": {
    "mode": "targeted",
    "target_class": "car",
    "lambda_balance": 1.0,
    "batch_size": 32,
    "tau_batch": 0.9,
    "tau_val": 0.9,
    "placement": {"location": "lower_right", "scale_fraction": 0.05, "row": 0, "col": 0},
    "alpha_opt": 0.0001,
    "beta1": 0.9,
    "beta2": 0.999,
    "max_steps": 500,
    "seed": 1,
    "warm_start": true,
    "val_split": 1000
  },
  "evaluation": {
    "mode": "untargeted",
    "target_class": "car",
    "splits": ["small", "medium", "full"],
    "small_size": 100,
    "medium_size": 1000,
    "seed": 1,
    "placement": {"location": "lower_right", "scale_fraction": 0.2, "row": 0, "col": 0},
    "sizes": [0.05, 0.1, 0.15, 0.2],
    "baseline_n": 64,
    "baseline_kinds": ["color", "natural"],
    "run": ["asr"],
    "emit_plots": true,
    "emit_csv": true
  },
  "io": {
    "store_root": "store",
    "gan_checkpoint": "",
    "classifier_checkpoint": "",
    "classifier_checkpoints": [],
    "patch_bundle": "",
    "advgen_checkpoint": ""
  }
})JSON");
}

namespace detail {

inline bool same_kind(const CJson& a, const CJson& b) {
  if (a.is_number() && b.is_number()) return true;  // int/float interchange
  return a.type() == b.type();
}

inline void merge_strict(CJson& base, const CJson& user, const std::string& path) {
  if (!user.is_object()) throw ConfigError("config: expected object at " + (path.empty() ? "<root>" : path));
  for (const auto& [key, value] : user.items()) {
    const std::string where = path.empty() ? key : path + "." + key;
    if (!base.contains(key)) throw ConfigError("config: unknown key '" + where + "'");
    CJson& slot = base[key];
    if (slot.is_object() && !value.is_object())
      throw ConfigError("config: expected object at '" + where + "'");
    if (slot.is_object()) {
      merge_strict(slot, value, where);
    } else {
      if (!same_kind(slot, value))
        throw ConfigError("config: type mismatch at '" + where + "' (expected " +
                          std::string(slot.type_name()) + ")");
      slot = value;
    }
  }
}

}  // namespace detail

/// Effective config: defaults <- file <- overrides, with unknown keys and
/// type mismatches rejected.
struct RunConfig {
  CJson doc;

  static RunConfig from_json(const CJson& user) {
    RunConfig rc{default_config()};
    detail::merge_strict(rc.doc, user, "");
    return rc;
  }

  static RunConfig from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("config: cannot open " + path);
    CJson user;
    try {
      user = CJson::parse(f);
    } catch (const std::exception& e) {
      throw ConfigError(std::string("config: parse error: ") + e.what());
    }
    return from_json(user);
  }

  /// dotted-path scalar override, e.g. "attack.epsilon=0.02"
  void apply_override(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("override must be key.path=value");
    const std::string keypath = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    CJson value;
    try {
      value = CJson::parse(raw);
    } catch (...) {
      value = raw;  // bare strings are allowed
    }
    CJson* slot = &doc;
    std::size_t pos = 0;
    std::vector<std::string> parts;
    while (pos != std::string::npos) {
      const auto dot = keypath.find('.', pos);
      parts.push_back(keypath.substr(pos, dot == std::string::npos ? dot : dot - pos));
      pos = dot == std::string::npos ? dot : dot + 1;
    }
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!slot->contains(parts[i])) throw ConfigError("override: unknown key '" + keypath + "'");
      slot = &(*slot)[parts[i]];
    }
    const std::string leaf = parts.back();
    if (!slot->contains(leaf)) throw ConfigError("override: unknown key '" + keypath + "'");
    if (!detail::same_kind((*slot)[leaf], value))
      throw ConfigError("override: type mismatch at '" + keypath + "'");
    (*slot)[leaf] = value;
  }

  /// SHA-256 of the canonical (sorted-key, compact) serialization.
  std::string hash() const { return Sha256::hex(doc.dump()); }
  std::string hash12() const { return hash().substr(0, 12); }

  const CJson& at(const std::string& section) const { return doc.at(section); }

  // --- typed views ----------------------------------------------------------

  img::Placement placement_from(const CJson& p) const {
    img::Placement pl;
    const auto loc = img::location_from_string(p.at("location").get<std::string>());
    if (!loc) throw ConfigError("config: unknown placement location");
    pl.location = *loc;
    pl.scale_fraction = p.at("scale_fraction").get<double>();
    pl.row = p.at("row").get<std::size_t>();
    pl.col = p.at("col").get<std::size_t>();
    return pl;
  }

  img::ThresholdConfig threshold_from(const CJson& t) const {
    img::ThresholdConfig thr;
    const std::string mode = t.at("mode").get<std::string>();
    if (mode == "fixed") thr.mode = img::ThresholdMode::fixed;
    else if (mode == "otsu") thr.mode = img::ThresholdMode::otsu;
    else throw ConfigError("config: threshold.mode must be fixed|otsu");
    thr.threshold = t.at("value").get<double>();
    return thr;
  }

  data::SceneConfig scene_config() const {
    const auto& d = at("dataset");
    const auto& s = d.at("scene");
    data::SceneConfig cfg;
    cfg.image_size = d.at("image_size").get<std::size_t>();
    cfg.num_classes = d.at("num_classes").get<std::size_t>();
    cfg.pattern_half_lo = s.at("pattern_half_lo").get<double>();
    cfg.pattern_half_hi = s.at("pattern_half_hi").get<double>();
    cfg.distractor_prob = s.at("distractor_prob").get<double>();
    cfg.distractor_alpha_lo = s.at("distractor_alpha_lo").get<double>();
    cfg.distractor_alpha_hi = s.at("distractor_alpha_hi").get<double>();
    cfg.noise_sigma = s.at("noise_sigma").get<double>();
    return cfg;
  }

  gan::GanTrainConfig gan_config() const {
    const auto& g = at("gan");
    gan::GanTrainConfig cfg;
    cfg.lambda_gp = g.at("lambda_gp").get<double>();
    cfg.critic_steps_per_gen_step = g.at("critic_steps_per_gen_step").get<std::size_t>();
    cfg.batch_size = g.at("batch_size").get<std::size_t>();
    cfg.total_steps = g.at("total_steps").get<std::size_t>();
    cfg.lr = g.at("lr").get<double>();
    cfg.beta1 = g.at("beta1").get<double>();
    cfg.beta2 = g.at("beta2").get<double>();
    cfg.seed = g.at("seed").get<std::uint64_t>();
    cfg.latent_dim = g.at("latent_dim").get<std::size_t>();
    cfg.output_size = g.at("output_size").get<std::size_t>();
    cfg.base_channels = g.at("base_channels").get<std::size_t>();
    cfg.checkpoint_every = g.at("checkpoint_every").get<std::size_t>();
    cfg.sample_every = g.at("sample_every").get<std::size_t>();
    cfg.hflip_augment = g.at("hflip_augment").get<bool>();
    return cfg;
  }

  clf::ClassifierTrainConfig classifier_config() const {
    const auto& c = at("classifier");
    clf::ClassifierTrainConfig cfg;
    cfg.epochs = c.at("epochs").get<std::size_t>();
    cfg.batch_size = c.at("batch_size").get<std::size_t>();
    cfg.lr = c.at("lr").get<double>();
    cfg.beta1 = c.at("beta1").get<double>();
    cfg.beta2 = c.at("beta2").get<double>();
    cfg.seed = c.at("seed").get<std::uint64_t>();
    const auto& n = c.at("normalization");
    cfg.norm.mean = n.at("mean").get<std::array<double, 3>>();
    cfg.norm.std = n.at("std").get<std::array<double, 3>>();
    return cfg;
  }

  clf::ArchSpec arch_spec() const {
    const auto& c = at("classifier");
    const auto& d = at("dataset");
    return clf::arch_by_name(c.at("arch").get<std::string>(), c.at("width_mult").get<double>(),
                             d.at("num_classes").get<std::size_t>());
  }

  attack::AttackConfig attack_config(const data::LabeledDataset& ds) const {
    const auto& a = at("attack");
    attack::AttackConfig cfg;
    const std::string mode = a.at("mode").get<std::string>();
    if (mode == "targeted") cfg.mode = attack::AttackMode::targeted;
    else if (mode == "untargeted") cfg.mode = attack::AttackMode::untargeted;
    else throw ConfigError("config: attack.mode must be targeted|untargeted");
    if (cfg.mode == attack::AttackMode::targeted)
      cfg.y_target = ds.class_index(a.at("target_class").get<std::string>());
    cfg.lambda_balance = a.at("lambda_balance").get<double>();
    cfg.epsilon = a.at("epsilon").get<double>();
    cfg.n_iter = a.at("n_iter").get<std::size_t>();
    cfg.batch_size = a.at("batch_size").get<std::size_t>();
    cfg.tau_batch = a.at("tau_batch").get<double>();
    cfg.tau_val = a.at("tau_val").get<double>();
    cfg.placement = placement_from(a.at("placement"));
    cfg.max_restarts = a.at("max_restarts").get<std::size_t>();
    cfg.seed = a.at("seed").get<std::uint64_t>();
    cfg.update_every = a.at("update_every").get<std::size_t>();
    cfg.resample_limit = a.at("resample_limit").get<std::size_t>();
    cfg.threshold = threshold_from(a.at("threshold"));
    return cfg;
  }

  advgen::FinetuneConfig finetune_config(const data::LabeledDataset& ds) const {
    const auto& f = at("finetune");
    advgen::FinetuneConfig cfg;
    const std::string mode = f.at("mode").get<std::string>();
    if (mode == "targeted") cfg.mode = attack::AttackMode::targeted;
    else if (mode == "untargeted") cfg.mode = attack::AttackMode::untargeted;
    else throw ConfigError("config: finetune.mode must be targeted|untargeted");
    if (cfg.mode == attack::AttackMode::targeted)
      cfg.y_target = ds.class_index(f.at("target_class").get<std::string>());
    cfg.lambda_balance = f.at("lambda_balance").get<double>();
    cfg.batch_size = f.at("batch_size").get<std::size_t>();
    cfg.tau_batch = f.at("tau_batch").get<double>();
    cfg.tau_val = f.at("tau_val").get<double>();
    cfg.placement = placement_from(f.at("placement"));
    cfg.alpha_opt = f.at("alpha_opt").get<double>();
    cfg.beta1 = f.at("beta1").get<double>();
    cfg.beta2 = f.at("beta2").get<double>();
    cfg.max_steps = f.at("max_steps").get<std::size_t>();
    cfg.seed = f.at("seed").get<std::uint64_t>();
    return cfg;
  }
};

// --- datasets from config ---------------------------------------------------

struct DatasetBundle {
  data::LabeledDataset train;
  data::LabeledDataset test;
};

inline DatasetBundle load_datasets(const RunConfig& rc) {
  const auto& d = rc.at("dataset");
  const std::string kind = d.at("kind").get<std::string>();
  DatasetBundle out;
  if (kind == "synthetic_scenes") {
    const auto cfg = rc.scene_config();
    const auto seed = d.at("seed").get<std::uint64_t>();
    out.train = data::synth_scene_dataset(d.at("train_count").get<std::size_t>(), cfg, seed);
    out.test = data::synth_scene_dataset(d.at("test_count").get<std::size_t>(), cfg, seed + 1);
  } else if (kind == "folder") {
    const std::string root = d.at("path").get<std::string>();
    const auto size = d.at("image_size").get<std::size_t>();
    out.train = clf::load_labeled_folder((std::filesystem::path(root) / "train").string(), size);
    out.test = clf::load_labeled_folder((std::filesystem::path(root) / "test").string(), size);
  } else if (kind == "cifar10_bin") {
    const std::string root = d.at("path").get<std::string>();
    std::vector<std::string> train_files;
    for (int i = 1; i <= 5; ++i)
      train_files.push_back((std::filesystem::path(root) / ("data_batch_" + std::to_string(i) + ".bin")).string());
    out.train = clf::load_cifar10_bin(train_files);
    out.test = clf::load_cifar10_bin({(std::filesystem::path(root) / "test_batch.bin").string()});
  } else {
    throw ConfigError("config: dataset.kind must be synthetic_scenes|folder|cifar10_bin");
  }
  return out;
}

inline data::UnlabeledDataset load_unlabeled(const RunConfig& rc) {
  const auto& d = rc.at("dataset");
  const std::string kind = d.at("unlabeled_kind").get<std::string>();
  const auto size = rc.at("gan").at("output_size").get<std::size_t>();
  if (kind == "synthetic_flowers")
    return data::synth_flower_dataset(d.at("unlabeled_count").get<std::size_t>(), size,
                                      d.at("unlabeled_seed").get<std::uint64_t>());
  if (kind == "folder") return gan::load_unlabeled_dataset(d.at("unlabeled_path").get<std::string>(), size);
  throw ConfigError("config: dataset.unlabeled_kind must be synthetic_flowers|folder");
}

// --- artifact store ---------------------------------------------------------

/// Content-addressed store: <root>/<kind>/<confighash12>/..., with a "latest"
/// symlink per kind.
struct ArtifactStore {
  std::filesystem::path root;

  std::filesystem::path dir_for(const std::string& kind, const std::string& hash12,
                                bool create = true) const {
    const auto dir = root / kind / hash12;
    if (create) std::filesystem::create_directories(dir);
    return dir;
  }

  void mark_latest(const std::string& kind, const std::string& hash12) const {
    const auto link = root / kind / "latest";
    std::error_code ec;
    std::filesystem::remove(link, ec);
    std::filesystem::create_directory_symlink(root / kind / hash12, link, ec);
  }

  /// "latest" or a bare hash prefix resolves inside the store; anything else
  /// is a filesystem path used as-is.
  std::filesystem::path resolve(const std::string& kind, const std::string& ref) const {
    if (ref == "latest") return root / kind / "latest";
    if (!ref.empty() && std::filesystem::exists(root / kind / ref)) return root / kind / ref;
    return ref;
  }
};

}  // namespace tnt::config
