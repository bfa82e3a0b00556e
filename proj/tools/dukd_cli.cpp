// Command-line front end: training, evaluation, comparison tables, the
// student/teacher similarity report, upcycling previews and crop panels.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <string>
#include <vector>

#include "dukd/dukd.hpp"

namespace fs = std::filesystem;
using dukd::Image;
using dukd::TrainingPair;
using Pixel = float;

namespace {

struct Common {
  std::uint64_t seed = 0;
};

int resolve_scale(int requested, int fallback) { return requested > 0 ? requested : fallback; }

dukd::PairDataset<Pixel> open_dataset(const std::string& dir, int scale) {
  return dukd::load_directory_dataset<Pixel>(dir, scale, "bicubic");
}

/// Short method names for checkpoint paths: the file stem, or parent/stem
/// when two paths share a stem.
std::vector<std::string> method_labels(const std::vector<std::string>& paths) {
  std::vector<std::string> stems, out;
  for (const auto& p : paths) stems.push_back(fs::path(p).stem().string());
  out = stems;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (std::count(stems.begin(), stems.end(), stems[i]) > 1) {
      const fs::path q(paths[i]);
      out[i] = (q.parent_path().filename() / q.stem()).string();
    }
  return out;
}

/// Loads a directory of precomputed SR images keyed by file stem.
std::map<std::string, Image<Pixel>> load_sr_dir(const std::string& dir) {
  std::map<std::string, Image<Pixel>> out;
  for (const auto& p : dukd::list_pngs(dir)) out.emplace(p.stem().string(), dukd::load_image<Pixel>(p.string()));
  return out;
}

int cmd_train(const std::string& config_path, const std::optional<std::uint64_t>& seed,
              const std::optional<std::string>& resume) {
  auto cfg = dukd::load_experiment_config(config_path);
  if (seed) cfg.run.seed = *seed;
  if (resume) cfg.run.resume = *resume;
  const auto art = dukd::run_experiment(cfg, &std::cerr);
  std::cout << nlohmann::json{{"final_checkpoint", art.final_checkpoint},
                              {"log", art.log_path},
                              {"metrics", dukd::to_json(art.metrics)}}
                   .dump(2)
            << '\n';
  return 0;
}

int cmd_eval(const std::string& model_path, const std::string& dataset_dir, int scale_flag, int shave_flag,
             bool no_quantize, const std::string& json_out) {
  dukd::EvalOptions opt;
  opt.quantize = !no_quantize;
  dukd::DatasetMetrics m;
  if (fs::is_directory(model_path)) {
    // precomputed SR outputs, matched to HR images by file name
    if (scale_flag <= 0) throw dukd::ConfigError("--scale is required when scoring an SR image directory");
    const auto ds = open_dataset(dataset_dir, scale_flag);
    const auto sr = load_sr_dir(model_path);
    opt.shave = shave_flag >= 0 ? shave_flag : scale_flag;
    const auto manifest = dukd::ingest(dataset_dir, scale_flag).manifest;
    m = {ds.name, scale_flag, fs::path(model_path).filename().string(), 0.0, 0.0, 0, opt.shave, opt.quantize};
    for (std::size_t i = 0; i < ds.pairs.size(); ++i) {
      const std::string stem = fs::path(manifest.entries[i].hr).stem().string();
      const auto it = sr.find(stem);
      if (it == sr.end()) throw dukd::DataError("no SR image for '" + stem + "' in " + model_path);
      const auto out = dukd::prepare_for_metrics(it->second, opt.quantize);
      m.psnr += dukd::psnr_y(out, ds.pairs[i].hr, opt.shave);
      m.ssim += dukd::ssim_y(out, ds.pairs[i].hr, opt.shave);
      ++m.n_images;
    }
    m.psnr /= m.n_images;
    m.ssim /= m.n_images;
  } else {
    const auto model = dukd::load_checkpoint<Pixel>(model_path);
    const int scale = resolve_scale(scale_flag, model.scale());
    if (scale != model.scale()) throw dukd::ConfigError("--scale differs from the checkpoint's scale");
    opt.shave = shave_flag >= 0 ? shave_flag : scale;
    const auto ds = open_dataset(dataset_dir, scale);
    m = dukd::evaluate<Pixel>(model, ds.pairs, ds.name, fs::path(model_path).stem().string(), opt);
  }
  dukd::ResultsTable table;
  table.add_metrics(m);
  std::cout << table.to_text();
  const auto j = dukd::to_json(m);
  if (!json_out.empty())
    std::ofstream(json_out) << j.dump(2) << '\n';
  else
    std::cout << j.dump() << '\n';
  return 0;
}

int cmd_compare(const std::vector<std::string>& ckpts, const std::string& dataset_dir, int shave_flag,
                bool no_quantize, const std::string& csv_out) {
  dukd::ResultsTable table;
  std::map<int, dukd::PairDataset<Pixel>> cache;
  const auto labels = method_labels(ckpts);
  for (std::size_t k = 0; k < ckpts.size(); ++k) {
    const auto& path = ckpts[k];
    const auto model = dukd::load_checkpoint<Pixel>(path);
    auto it = cache.find(model.scale());
    if (it == cache.end()) it = cache.emplace(model.scale(), open_dataset(dataset_dir, model.scale())).first;
    dukd::EvalOptions opt{shave_flag >= 0 ? shave_flag : model.scale(), !no_quantize};
    table.add_metrics(dukd::evaluate<Pixel>(model, it->second.pairs, it->second.name, labels[k], opt));
  }
  table.mark_best();
  std::cout << table.to_text();
  if (!csv_out.empty()) {
    std::ofstream(csv_out) << table.to_csv();
  } else {
    std::cout << '\n' << table.to_csv();
  }
  return 0;
}

int cmd_similarity(const std::string& student_path, const std::string& teacher_path, const std::string& dataset_dir,
                   const std::string& split, int shave_flag, bool no_quantize, const std::string& json_out) {
  const auto student = dukd::load_checkpoint<Pixel>(student_path);
  const auto teacher = dukd::load_checkpoint<Pixel>(teacher_path);
  const auto ds = open_dataset(dataset_dir, student.scale());
  dukd::EvalOptions opt{shave_flag >= 0 ? shave_flag : student.scale(), !no_quantize};
  const auto r = dukd::similarity_report<Pixel>(student, teacher, ds.pairs, dukd::split_from_string(split), opt);
  auto j = dukd::to_json(r);
  j["dataset"] = ds.name;
  j["student"] = student_path;
  j["teacher"] = teacher_path;
  if (!json_out.empty()) std::ofstream(json_out) << j.dump(2) << '\n';
  std::cout << j.dump(2) << '\n';
  return 0;
}

int cmd_upcycle_preview(const std::string& hr_path, const std::string& lr_path, int scale, std::uint64_t seed,
                        const std::string& out_dir) {
  const auto hr = dukd::center_crop_divisible(dukd::load_image<Pixel>(hr_path), scale);
  TrainingPair<Pixel> pair{lr_path.empty() ? dukd::degrade(hr, scale, "bicubic") : dukd::load_image<Pixel>(lr_path),
                           hr, scale};
  pair.validate();
  dukd::Rng rng(seed);
  const bool can_zoom_out = pair.lr.height() % scale == 0 && pair.lr.width() % scale == 0;
  const auto batch = dukd::build_upcycled_batch(pair, can_zoom_out, rng);
  fs::create_directories(out_dir);
  dukd::save_image((fs::path(out_dir) / "lr.png").string(), pair.lr);
  dukd::save_image((fs::path(out_dir) / "zoom_in.png").string(), batch.zoom_in);
  if (batch.zoom_out) dukd::save_image((fs::path(out_dir) / "zoom_out.png").string(), *batch.zoom_out);
  std::cout << nlohmann::json{{"seed", seed},
                              {"scale", scale},
                              {"lr", pair.lr.shape()},
                              {"zoom_in", batch.zoom_in.shape()},
                              {"zoom_in_offset", {batch.zoom_in_offset.top, batch.zoom_in_offset.left}},
                              {"zoom_out", batch.zoom_out ? batch.zoom_out->shape() : "skipped"}}
                   .dump(2)
            << '\n';
  return 0;
}

int cmd_crops(const std::vector<std::string>& ckpts, const std::string& image_path, const std::string& box_str,
              const std::string& out_path) {
  std::vector<dukd::SRModel<Pixel>> models;
  for (const auto& p : ckpts) models.push_back(dukd::load_checkpoint<Pixel>(p));
  const int scale = models.front().scale();
  for (const auto& m : models)
    if (m.scale() != scale) throw dukd::ConfigError("all checkpoints must share one scale");
  const auto hr = dukd::center_crop_divisible(dukd::load_image<Pixel>(image_path), scale);
  dukd::CropBox box;
  try {
    box = dukd::parse_box(box_str);
    dukd::check_box(box, hr.height(), hr.width());
  } catch (const dukd::Error& e) {
    throw CLI::ValidationError("--box", e.what());
  }

  const auto lr = dukd::degrade(hr, scale, "bicubic");
  auto cut = [&](const Image<Pixel>& im) { return dukd::crop(im, box.y, box.x, box.h, box.w); };
  const auto hr_crop = cut(hr);
  std::vector<Image<Pixel>> crops{hr_crop};
  nlohmann::json annotations = nlohmann::json::array();
  annotations.push_back({{"label", "HR"}, {"psnr", dukd::kPsnrCap}});
  auto add = [&](const std::string& label, const Image<Pixel>& full) {
    const auto c = cut(dukd::prepare_for_metrics(full, true));
    const double db = dukd::cap_psnr(dukd::psnr_y(c, hr_crop, 0));
    crops.push_back(c);
    annotations.push_back({{"label", label}, {"psnr", db}});
  };
  add("bicubic", dukd::bicubic_resize(lr, dukd::ResampleSpec::up(scale)));
  const auto labels = method_labels(ckpts);
  for (std::size_t i = 0; i < models.size(); ++i) add(labels[i], models[i].infer(lr));

  dukd::save_image(out_path, dukd::side_by_side(crops));
  const std::string sidecar = fs::path(out_path).replace_extension(".json").string();
  std::ofstream(sidecar) << nlohmann::json{{"image", image_path}, {"box", {box.x, box.y, box.w, box.h}},
                                           {"panels", annotations}}
                                .dump(2)
                         << '\n';
  for (const auto& a : annotations)
    std::cout << std::left << std::setw(24) << a["label"].get<std::string>() << std::fixed << std::setprecision(2)
              << a["psnr"].get<double>() << " dB\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Data-upcycling knowledge distillation for image super-resolution"};
  app.require_subcommand(1);

  Common common;
  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", common.seed, "Random seed"); };

  // train
  std::string config_path;
  std::optional<std::string> resume;
  auto* train = app.add_subcommand("train", "Run a training experiment from a JSON config");
  train->add_option("config", config_path, "Experiment config")->required()->check(CLI::ExistingFile);
  train->add_option("--resume", resume, "Training-state checkpoint to continue from")->check(CLI::ExistingFile);
  add_seed(train);

  // eval
  std::string model_path, dataset_dir, json_out, csv_out;
  int scale = 0, shave = -1;
  bool no_quantize = false;
  auto* eval = app.add_subcommand("eval", "PSNR/SSIM of a checkpoint (or SR image directory) on a dataset");
  eval->add_option("checkpoint", model_path, "Checkpoint file or directory of SR images")->required()->check(CLI::ExistingPath);
  eval->add_option("dataset", dataset_dir, "Directory of HR PNGs")->required()->check(CLI::ExistingDirectory);
  eval->add_option("--scale", scale, "Scale factor (defaults to the checkpoint's)");
  eval->add_option("--shave", shave, "Border pixels to drop (defaults to the scale)");
  eval->add_flag("--no-quantize", no_quantize, "Score raw outputs instead of 8-bit quantized ones");
  eval->add_option("--json", json_out, "Write the metric record here");
  add_seed(eval);

  // compare
  std::vector<std::string> ckpts;
  auto* compare = app.add_subcommand("compare", "Results table over several checkpoints");
  compare->add_option("checkpoints", ckpts, "Checkpoints followed by the dataset directory")->required()->expected(2, -1);
  compare->add_option("--shave", shave, "Border pixels to drop (defaults to the scale)");
  compare->add_flag("--no-quantize", no_quantize, "Score raw outputs");
  compare->add_option("--csv", csv_out, "CSV output path (stdout if omitted)");
  add_seed(compare);

  // similarity
  std::string student_path, teacher_path, split = "test";
  auto* sim = app.add_subcommand("similarity", "PSNR(S,T) and PSNR(S,GT) of a student/teacher pair");
  sim->add_option("student", student_path)->required()->check(CLI::ExistingFile);
  sim->add_option("teacher", teacher_path)->required()->check(CLI::ExistingFile);
  sim->add_option("dataset", dataset_dir)->required()->check(CLI::ExistingDirectory);
  sim->add_option("--split", split, "train or test")->check(CLI::IsMember({"train", "test"}));
  sim->add_option("--shave", shave, "Border pixels to drop (defaults to the scale)");
  sim->add_flag("--no-quantize", no_quantize, "Score raw outputs");
  sim->add_option("--json", json_out, "Write the report here");
  add_seed(sim);

  // upcycle-preview
  std::string pair_path, lr_path, out_dir = "upcycle_preview";
  int preview_scale = 2;
  auto* preview = app.add_subcommand("upcycle-preview", "Write zoom-in/zoom-out inputs for one pair");
  preview->add_option("pair", pair_path, "HR image (LR is generated unless --lr is given)")->required()->check(CLI::ExistingFile);
  preview->add_option("--lr", lr_path, "Matching LR image")->check(CLI::ExistingFile);
  preview->add_option("--scale", preview_scale, "Scale factor")->check(CLI::Range(2, 4));
  preview->add_option("--out", out_dir, "Output directory");
  add_seed(preview);

  // crops
  std::vector<std::string> crop_args;
  std::string box, panel_out = "crops.png";
  auto* crops = app.add_subcommand("crops", "Side-by-side crop panel with per-crop PSNR");
  crops->add_option("args", crop_args, "Checkpoints followed by the HR image")->required()->expected(2, -1);
  crops->add_option("--box", box, "Crop box x,y,w,h in HR pixels")->required();
  crops->add_option("--out", panel_out, "Panel PNG path (annotations go to the .json sibling)");
  add_seed(crops);

  // synth
  std::string synth_dir;
  int synth_count = 16, synth_size = 64;
  auto* synth = app.add_subcommand("synth", "Write the procedural toy corpus as PNGs");
  synth->add_option("out_dir", synth_dir)->required();
  synth->add_option("--count", synth_count)->check(CLI::PositiveNumber);
  synth->add_option("--size", synth_size)->check(CLI::PositiveNumber);
  add_seed(synth);

  // ingest
  std::string tag = "bicubic";
  int ingest_scale = 2;
  auto* ing = app.add_subcommand("ingest", "Generate and cache LR images for a directory of HR PNGs");
  ing->add_option("dir", dataset_dir)->required()->check(CLI::ExistingDirectory);
  ing->add_option("--scale", ingest_scale)->check(CLI::Range(2, 4));
  ing->add_option("--degradation", tag);
  add_seed(ing);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*train) {
      std::optional<std::uint64_t> seed;
      if (train->count("--seed")) seed = common.seed;
      return cmd_train(config_path, seed, resume);
    }
    if (*eval) return cmd_eval(model_path, dataset_dir, scale, shave, no_quantize, json_out);
    if (*compare) {
      const std::string ds = ckpts.back();
      ckpts.pop_back();
      if (!fs::is_directory(ds)) throw CLI::ValidationError("dataset", "'" + ds + "' is not a directory");
      for (const auto& c : ckpts)
        if (!fs::is_regular_file(c)) throw CLI::ValidationError("checkpoints", "'" + c + "' does not exist");
      return cmd_compare(ckpts, ds, shave, no_quantize, csv_out);
    }
    if (*sim) return cmd_similarity(student_path, teacher_path, dataset_dir, split, shave, no_quantize, json_out);
    if (*preview) return cmd_upcycle_preview(pair_path, lr_path, preview_scale, common.seed, out_dir);
    if (*crops) {
      const std::string image = crop_args.back();
      crop_args.pop_back();
      for (const auto& c : crop_args)
        if (!fs::is_regular_file(c)) throw CLI::ValidationError("args", "'" + c + "' does not exist");
      if (!fs::is_regular_file(image)) throw CLI::ValidationError("args", "'" + image + "' does not exist");
      return cmd_crops(crop_args, image, box, panel_out);
    }
    if (*synth) {
      dukd::write_synthetic_corpus(synth_dir, synth_count, synth_size, common.seed);
      std::cout << "wrote " << synth_count << " images to " << synth_dir << '\n';
      return 0;
    }
    if (*ing) {
      dukd::IngestOptions opt;
      opt.degradation = tag;
      const auto r = dukd::ingest(dataset_dir, ingest_scale, opt);
      std::cout << nlohmann::json{{"manifest", dukd::to_json(r.manifest)},
                                  {"generated", r.generated},
                                  {"cached", r.cached},
                                  {"failures", r.failures}}
                       .dump(2)
                << '\n';
      return 0;
    }
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const dukd::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
