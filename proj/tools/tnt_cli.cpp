// Command-line front end: wires corpora, generator training, classifier
// training, the latent-space patch search, generator fine-tuning, the
// evaluation protocol, and one-off stamping into a content-addressed
// artifact store.

#include "CLI11.hpp"

#include <chrono>
#include <cstdlib>
#include <iostream>

#include "tnt/advgen/finetune.hpp"
#include "tnt/attack/search.hpp"
#include "tnt/clf/classifier.hpp"
#include "tnt/config/run_config.hpp"
#include "tnt/data/synth.hpp"
#include "tnt/eval/evaluate.hpp"
#include "tnt/eval/plot.hpp"
#include "tnt/gan/wgan.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNotConverged = 3;
constexpr int kExitDiverged = 4;

struct GlobalOpts {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string store_flag;
  int workers = 1;
  bool dry_run = false;
};

tnt::config::RunConfig load_config(const GlobalOpts& g) {
  auto rc = g.config_path.empty() ? tnt::config::RunConfig{tnt::config::default_config()}
                                  : tnt::config::RunConfig::from_file(g.config_path);
  for (const auto& o : g.overrides) rc.apply_override(o);
  return rc;
}

tnt::config::ArtifactStore store_for(const GlobalOpts& g, const tnt::config::RunConfig& rc) {
  std::string root = rc.at("io").at("store_root").get<std::string>();
  if (const char* env = std::getenv("TNT_STORE"); env && *env) root = env;
  if (!g.store_flag.empty()) root = g.store_flag;
  return {std::filesystem::path(root)};
}

void echo_config(const tnt::config::RunConfig& rc, const std::filesystem::path& dir) {
  std::ofstream f(dir / "config.json");
  f << rc.doc.dump(2) << "\n";
}

void log(const std::string& line) { std::cerr << "[tnt] " << line << "\n"; }

bool announce_dry_run(const GlobalOpts& g, const tnt::config::RunConfig& rc,
                      const std::string& command, const std::string& planned_output) {
  if (!g.dry_run) return false;
  tnt::nn::Json plan{{"command", command},
                     {"config_hash", rc.hash()},
                     {"planned_output", planned_output},
                     {"workers", g.workers},
                     {"effective_config", tnt::nn::Json::parse(rc.doc.dump())}};
  std::cout << plan.dump(2) << "\n";
  return true;
}

tnt::gan::GeneratorHandle load_generator(const tnt::config::ArtifactStore& store,
                                         const std::string& ref, const char* kind) {
  auto path = store.resolve(kind, ref.empty() ? "latest" : ref);
  if (std::filesystem::is_directory(path)) {
    for (const char* name : {"generator.ckpt", "advgen.ckpt"})
      if (std::filesystem::exists(path / name)) {
        path /= name;
        break;
      }
  }
  if (!std::filesystem::exists(path))
    throw tnt::ConfigError(std::string("no generator checkpoint at ") + path.string());
  return tnt::gan::generator_from_checkpoint(tnt::nn::load_checkpoint(path.string()));
}

tnt::clf::ClassifierHandle load_classifier(const tnt::config::ArtifactStore& store,
                                           const std::string& ref) {
  auto path = store.resolve("classifier", ref.empty() ? "latest" : ref);
  if (std::filesystem::is_directory(path)) path /= "classifier.ckpt";
  if (!std::filesystem::exists(path))
    throw tnt::ConfigError("no classifier checkpoint at " + path.string());
  return tnt::clf::classifier_from_checkpoint(tnt::nn::load_checkpoint(path.string()));
}

// ---------------------------------------------------------------------------

int cmd_make_corpus(const GlobalOpts& g) {
  auto rc = load_config(g);
  auto store = store_for(g, rc);
  const auto dir = store.root / "corpus" / rc.hash12();
  if (announce_dry_run(g, rc, "make-corpus", dir.string())) return kExitOk;
  const auto& d = rc.at("dataset");
  tnt::data::write_flower_corpus((dir / "flowers").string(),
                                 d.at("unlabeled_count").get<std::size_t>(),
                                 rc.at("gan").at("output_size").get<std::size_t>(),
                                 d.at("unlabeled_seed").get<std::uint64_t>());
  const auto scfg = rc.scene_config();
  const auto per_class_train = d.at("train_count").get<std::size_t>() / scfg.num_classes;
  const auto per_class_test = d.at("test_count").get<std::size_t>() / scfg.num_classes;
  tnt::data::write_scene_corpus((dir / "scenes" / "train").string(), per_class_train, scfg,
                                d.at("seed").get<std::uint64_t>());
  tnt::data::write_scene_corpus((dir / "scenes" / "test").string(), per_class_test, scfg,
                                d.at("seed").get<std::uint64_t>() + 1);
  echo_config(rc, dir);
  store.mark_latest("corpus", rc.hash12());
  std::cout << dir.string() << "\n";
  return kExitOk;
}

int cmd_train_gan(const GlobalOpts& g) {
  auto rc = load_config(g);
  auto store = store_for(g, rc);
  const auto dir = store.dir_for("gan", rc.hash12(), !g.dry_run);
  if (announce_dry_run(g, rc, "train-gan", (dir / "generator.ckpt").string())) return kExitOk;
  const auto dataset = tnt::config::load_unlabeled(rc);
  log("training generator on " + std::to_string(dataset.size()) + " images");
  auto result = tnt::gan::train_wgan_gp(dataset, rc.gan_config(), dir.string());
  auto ckpt = tnt::gan::generator_checkpoint(result.generator);
  ckpt.meta["config_hash"] = rc.hash();
  tnt::nn::save_checkpoint((dir / "generator.ckpt").string(), ckpt);
  echo_config(rc, dir);
  store.mark_latest("gan", rc.hash12());
  std::cout << (dir / "generator.ckpt").string() << "\n";
  return kExitOk;
}

int cmd_train_classifier(const GlobalOpts& g) {
  auto rc = load_config(g);
  auto store = store_for(g, rc);
  const auto dir = store.dir_for("classifier", rc.hash12(), !g.dry_run);
  if (announce_dry_run(g, rc, "train-classifier", (dir / "classifier.ckpt").string())) return kExitOk;
  const auto bundle = tnt::config::load_datasets(rc);
  log("training classifier on " + std::to_string(bundle.train.size()) + " images");
  auto clf = tnt::clf::train_classifier(rc.arch_spec(), bundle.train, rc.classifier_config(),
                                        &bundle.test);
  log("clean test accuracy " + std::to_string(clf.clean_accuracy));
  auto ckpt = tnt::clf::classifier_checkpoint(clf);
  ckpt.meta["config_hash"] = rc.hash();
  tnt::nn::save_checkpoint((dir / "classifier.ckpt").string(), ckpt);
  echo_config(rc, dir);
  store.mark_latest("classifier", rc.hash12());
  std::cout << (dir / "classifier.ckpt").string() << "\n";
  return kExitOk;
}

int cmd_search_tnt(const GlobalOpts& g) {
  auto rc = load_config(g);
  auto store = store_for(g, rc);
  const auto dir = store.dir_for("tnt", rc.hash12(), !g.dry_run);
  if (announce_dry_run(g, rc, "search-tnt", dir.string())) return kExitOk;
  auto gen = load_generator(store, rc.at("io").at("gan_checkpoint").get<std::string>(), "gan");
  auto clf = load_classifier(store, rc.at("io").at("classifier_checkpoint").get<std::string>());
  const auto bundle = tnt::config::load_datasets(rc);

  auto cfg = rc.attack_config(bundle.test);
  cfg.workers = g.workers;
  cfg.trace_path = (dir / "trace.jsonl").string();
  const auto& a = rc.at("attack");
  const auto pool = tnt::data::subsample_indices(bundle.test.size(),
                                                 a.at("search_pool").get<std::size_t>(),
                                                 cfg.seed ^ 0xA5A5);
  const auto val_idx = tnt::data::subsample_indices(bundle.test.size(),
                                                    a.at("val_split").get<std::size_t>(),
                                                    cfg.seed ^ 0x5A5A);
  tnt::attack::ImageSampler sampler(bundle.test, pool);
  log("searching: pool=" + std::to_string(pool.size()) + " val=" + std::to_string(val_idx.size()));
  auto cand = tnt::attack::search_tnt(gen, clf, sampler, bundle.test, val_idx, cfg);
  cand.config_hash = rc.hash();
  tnt::attack::write_candidate_bundle(dir.string(), cand);
  echo_config(rc, dir);
  store.mark_latest("tnt", rc.hash12());
  std::cout << dir.string() << "\n";
  if (!cand.converged) {
    log("search did not converge; best batch fool fraction " + std::to_string(cand.batch_asr));
    return kExitNotConverged;
  }
  log("converged with validation ASR " + std::to_string(cand.val_asr.value_or(0.0)));
  return kExitOk;
}

int cmd_finetune_advgen(const GlobalOpts& g) {
  auto rc = load_config(g);
  auto store = store_for(g, rc);
  const auto dir = store.dir_for("advgen", rc.hash12(), !g.dry_run);
  if (announce_dry_run(g, rc, "finetune-advgen", (dir / "advgen.ckpt").string())) return kExitOk;
  const auto gan_ref = rc.at("io").at("gan_checkpoint").get<std::string>();
  const bool warm = rc.at("finetune").at("warm_start").get<bool>();
  auto gen = warm ? load_generator(store, gan_ref, "gan")
                  : tnt::gan::build_generator(rc.at("gan").at("latent_dim").get<std::size_t>(),
                                              rc.at("gan").at("output_size").get<std::size_t>(),
                                              rc.at("gan").at("base_channels").get<std::size_t>(),
                                              rc.at("gan").at("seed").get<std::uint64_t>());
  auto clf = load_classifier(store, rc.at("io").at("classifier_checkpoint").get<std::string>());
  const auto bundle = tnt::config::load_datasets(rc);
  auto cfg = rc.finetune_config(bundle.test);
  const auto val_idx = tnt::data::subsample_indices(
      bundle.test.size(), rc.at("finetune").at("val_split").get<std::size_t>(), cfg.seed ^ 0x5A5A);
  tnt::attack::ImageSampler sampler(bundle.train, tnt::data::all_indices(bundle.train.size()));
  log("fine-tuning generator (" + std::string(warm ? "warm" : "cold") + " start)");
  auto result = tnt::advgen::finetune_generator(gen, clf, sampler, bundle.test, val_idx, cfg);
  result.generator.source_checkpoint = warm ? gan_ref : "";
  auto ckpt = tnt::gan::generator_checkpoint(result.generator);
  ckpt.meta["config_hash"] = rc.hash();
  ckpt.meta["best_val_asr"] = result.best_val_asr ? tnt::nn::Json(*result.best_val_asr)
                                                  : tnt::nn::Json(nullptr);
  ckpt.meta["converged"] = result.converged;
  ckpt.meta["steps_used"] = result.steps_used;
  ckpt.meta["per_z_val_asr"] = result.per_z_val_asr;
  tnt::nn::save_checkpoint((dir / "advgen.ckpt").string(), ckpt);
  echo_config(rc, dir);
  store.mark_latest("advgen", rc.hash12());
  std::cout << (dir / "advgen.ckpt").string() << "\n";
  if (!result.converged) {
    log("fine-tune stopped before reaching tau_val");
    return kExitNotConverged;
  }
  return kExitOk;
}

int cmd_evaluate(const GlobalOpts& g) {
  using namespace tnt;
  auto rc = load_config(g);
  auto store = store_for(g, rc);
  const auto dir = store.dir_for("evaluation", rc.hash12(), !g.dry_run);
  if (announce_dry_run(g, rc, "evaluate", (dir / "report.json").string())) return kExitOk;
  const auto t0 = std::chrono::steady_clock::now();

  auto clf = load_classifier(store, rc.at("io").at("classifier_checkpoint").get<std::string>());
  const auto bundle = tnt::config::load_datasets(rc);
  const auto& e = rc.at("evaluation");

  attack::AttackMode mode = e.at("mode").get<std::string>() == "targeted"
                                ? attack::AttackMode::targeted
                                : attack::AttackMode::untargeted;
  std::size_t y_target = 0;
  if (mode == attack::AttackMode::targeted)
    y_target = bundle.test.class_index(e.at("target_class").get<std::string>());

  const auto bundle_ref = rc.at("io").at("patch_bundle").get<std::string>();
  const auto bundle_path = store.resolve("tnt", bundle_ref.empty() ? "latest" : bundle_ref);
  auto cand = attack::load_candidate_bundle(bundle_path.string());
  const img::Placement placement = rc.placement_from(e.at("placement"));

  eval::EvaluationReport report;
  report.task_id = rc.at("dataset").at("kind").get<std::string>();
  report.classifier_ids = {clf.version + ":" + std::to_string(clf.seed)};
  report.patch_ids = {bundle_path.filename().string()};
  report.mode = e.at("mode").get<std::string>();
  report.config_hash = rc.hash();
  report.seed = e.at("seed").get<std::uint64_t>();

  const auto seed = e.at("seed").get<std::uint64_t>();
  auto split_indices = [&](const std::string& name) {
    if (name == "small")
      return data::subsample_indices(bundle.test.size(), e.at("small_size").get<std::size_t>(), seed ^ 0x11);
    if (name == "medium")
      return data::subsample_indices(bundle.test.size(), e.at("medium_size").get<std::size_t>(), seed ^ 0x22);
    if (name == "full") return data::all_indices(bundle.test.size());
    throw ConfigError("evaluation.splits entries must be small|medium|full");
  };

  const auto run_list = e.at("run").get<std::vector<std::string>>();
  auto runs = [&](const std::string& what) {
    return std::find(run_list.begin(), run_list.end(), what) != run_list.end();
  };

  if (runs("asr")) {
    for (const auto& split : e.at("splits").get<std::vector<std::string>>()) {
      const auto idx = split_indices(split);
      report.split_asr.emplace_back(
          split, eval::attack_success_rate(clf, bundle.test, idx, cand.patch, placement, mode, y_target));
      log("asr[" + split + "] = " + std::to_string(report.split_asr.back().second.asr()));
    }
  }
  if (runs("locations")) {
    const auto idx = split_indices("medium");
    report.locations = eval::location_sweep(
        clf, bundle.test, idx, cand.patch,
        eval::canonical_placements(placement.scale_fraction), mode, y_target, g.workers);
    if (e.at("emit_plots").get<bool>())
      eval::plot_location_bars((dir / "locations.png").string(), report.locations);
  }
  if (runs("sizes")) {
    const auto idx = split_indices("medium");
    eval::SizeSweepSource tnt_src;
    tnt_src.fixed_patch = &cand.patch;
    report.sizes = eval::size_sweep(clf, bundle.test, idx, tnt_src,
                                    e.at("sizes").get<std::vector<double>>(), mode, y_target,
                                    placement.location, g.workers);
    std::vector<std::pair<std::string, std::vector<eval::SizeRow>>> curves{{"tnt", report.sizes}};
    const auto advgen_ref = rc.at("io").at("advgen_checkpoint").get<std::string>();
    if (!advgen_ref.empty()) {
      auto advgen = load_generator(store, advgen_ref, "advgen");
      eval::SizeSweepSource gen_src;
      gen_src.generator = &advgen;
      gen_src.z_seed = seed ^ 0x33;
      curves.emplace_back("advgen", eval::size_sweep(clf, bundle.test, idx, gen_src,
                                                     e.at("sizes").get<std::vector<double>>(), mode,
                                                     y_target, placement.location, g.workers));
    }
    if (e.at("emit_plots").get<bool>())
      eval::plot_size_curves((dir / "sizes.png").string(), curves);
  }
  if (runs("transfer")) {
    std::vector<clf::ClassifierHandle> extra;
    for (const auto& ref : rc.at("io").at("classifier_checkpoints").get<std::vector<std::string>>())
      extra.push_back(load_classifier(store, ref));
    std::vector<std::pair<std::string, clf::ClassifierHandle*>> targets{{"primary", &clf}};
    for (std::size_t i = 0; i < extra.size(); ++i)
      targets.emplace_back("model" + std::to_string(i + 1), &extra[i]);
    const auto idx = split_indices("medium");
    report.transfer = eval::transfer_matrix({{"tnt", &cand.patch}}, targets, bundle.test, idx,
                                            placement, g.workers);
    report.transfer_annotation =
        "untargeted transfer; patches rescaled through place() to each target input size";
  }
  if (runs("baselines")) {
    const auto idx = split_indices("medium");
    const auto n = e.at("baseline_n").get<std::size_t>();
    for (const auto& kind : e.at("baseline_kinds").get<std::vector<std::string>>()) {
      if (kind == "color") {
        report.baselines.push_back(eval::random_patch_baseline(
            clf, bundle.test, idx, eval::BaselineKind::color, n, placement, seed ^ 0x44, nullptr,
            {}, g.workers));
      } else if (kind == "natural") {
        const auto flowers = tnt::config::load_unlabeled(rc);
        report.baselines.push_back(eval::random_patch_baseline(
            clf, bundle.test, idx, eval::BaselineKind::natural, n, placement, seed ^ 0x55,
            &flowers.store, {}, g.workers));
      } else {
        throw ConfigError("evaluation.baseline_kinds entries must be color|natural");
      }
      log("baseline[" + kind + "] mean = " + std::to_string(report.baselines.back().mean));
    }
  }

  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  {
    std::ofstream f(dir / "report.json");
    f << report.to_json().dump(2) << "\n";
  }
  if (e.at("emit_csv").get<bool>()) {
    if (!report.locations.empty())
      std::ofstream(dir / "locations.csv") << eval::report_table_csv(report, "location");
    if (!report.sizes.empty())
      std::ofstream(dir / "sizes.csv") << eval::report_table_csv(report, "size");
    if (!report.transfer.empty())
      std::ofstream(dir / "transfer.csv") << eval::report_table_csv(report, "transfer");
  }
  echo_config(rc, dir);
  store.mark_latest("evaluation", rc.hash12());
  std::cout << (dir / "report.json").string() << "\n";
  return kExitOk;
}

int cmd_stamp(const std::string& image_path, const std::string& patch_path,
              const std::string& out_path, const std::string& location, double scale,
              std::size_t row, std::size_t col) {
  using namespace tnt;
  const img::Image x = img::load_image(image_path);
  const img::Patch patch = img::load_patch(patch_path);
  img::Placement placement;
  const auto loc = img::location_from_string(location);
  if (!loc) throw ConfigError("stamp: unknown location '" + location + "'");
  placement.location = *loc;
  placement.scale_fraction = scale;
  placement.row = row;
  placement.col = col;
  const auto placed = img::place(patch, placement, x.height, x.width);
  const img::Image stamped = img::stamp(x, placed.delta, placed.mask);
  std::string out = out_path;
  if (out.empty()) {
    const std::filesystem::path p(image_path);
    out = (p.parent_path() / (p.stem().string() + "_stamped.png")).string();
  }
  img::save_image(out, stamped);
  std::cout << out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TnT patch toolkit: generator training, latent-space patch search, evaluation"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  GlobalOpts g;
  app.add_option("--workers", g.workers, "worker cap for parallel sections (1 = deterministic reference)");
  app.add_option("--store", g.store_flag, "artifact store root (overrides io.store_root and TNT_STORE)");
  app.add_flag("--dry-run", g.dry_run, "validate config, print the resolved plan, change nothing");
  app.add_option("--set", g.overrides, "override a scalar config key, e.g. --set attack.epsilon=0.02")
      ->type_size(1);

  auto add_config = [&](CLI::App* cmd) {
    cmd->add_option("-c,--config", g.config_path, "run config (JSON)");
  };

  auto* mk = app.add_subcommand("make-corpus", "write the procedural corpora to the store");
  add_config(mk);
  auto* tg = app.add_subcommand("train-gan", "train the patch generator (WGAN-GP)");
  add_config(tg);
  auto* tc = app.add_subcommand("train-classifier", "train a target classifier");
  add_config(tc);
  auto* st = app.add_subcommand("search-tnt", "latent-space search for a universal patch");
  add_config(st);
  auto* fa = app.add_subcommand("finetune-advgen", "fine-tune the generator into an adversarial-patch generator");
  add_config(fa);
  auto* ev = app.add_subcommand("evaluate", "run the measurement protocol and write a report");
  add_config(ev);

  auto* sp = app.add_subcommand("stamp", "stamp a patch file onto an image");
  std::string image_path, patch_path, out_path, location = "lower_right";
  double scale = 0.2;
  std::size_t row = 0, col = 0;
  sp->add_option("image", image_path, "input image (png/ppm)")->required();
  sp->add_option("patch", patch_path, "patch file (RGBA png)")->required();
  sp->add_option("-o,--out", out_path, "output path (default: <image>_stamped.png)");
  sp->add_option("--location", location, "placement location name");
  sp->add_option("--scale", scale, "patch area as a fraction of the image");
  sp->add_option("--row", row, "custom placement row offset");
  sp->add_option("--col", col, "custom placement col offset");

  CLI11_PARSE(app, argc, argv);

  try {
    if (mk->parsed()) return cmd_make_corpus(g);
    if (tg->parsed()) return cmd_train_gan(g);
    if (tc->parsed()) return cmd_train_classifier(g);
    if (st->parsed()) return cmd_search_tnt(g);
    if (fa->parsed()) return cmd_finetune_advgen(g);
    if (ev->parsed()) return cmd_evaluate(g);
    if (sp->parsed()) return cmd_stamp(image_path, patch_path, out_path, location, scale, row, col);
  } catch (const tnt::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const tnt::TrainingDiverged& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    if (!e.last_good_checkpoint.empty())
      std::cerr << "last good checkpoint: " << e.last_good_checkpoint << "\n";
    return kExitDiverged;
  } catch (const tnt::FinetuneDiverged& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const tnt::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
