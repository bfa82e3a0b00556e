#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>

#include "dukd/dataset.hpp"
#include "dukd/experiment.hpp"
#include "oracles.hpp"

namespace fs = std::filesystem;
using dukd::Image;

namespace {

class TempDir {
 public:
  explicit TempDir(const std::string& name) : path_(fs::temp_directory_path() / ("dukd_pipeline_" + name)) {
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() { fs::remove_all(path_); }
  const fs::path& path() const { return path_; }
  std::string str(const std::string& sub = "") const { return (sub.empty() ? path_ : path_ / sub).string(); }

 private:
  fs::path path_;
};

struct CliResult {
  int code;
  std::string out;
};

CliResult run_cli(const std::string& args) {
  const std::string cmd = std::string(DUKD_CLI_PATH) + " " + args + " 2>&1";
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  std::string out;
  std::array<char, 4096> buf{};
  while (fgets(buf.data(), buf.size(), pipe.get())) out += buf.data();
  const int status = pclose(pipe.release());
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::map<std::string, fs::file_time_type> snapshot(const fs::path& dir) {
  std::map<std::string, fs::file_time_type> m;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) m[e.path().string()] = e.last_write_time();
  return m;
}

}  // namespace

TEST(Ingest, CropsToDivisibleAndGeneratesLr) {
  TempDir d("ingest101");
  std::mt19937_64 gen(1);
  dukd::save_image(d.str("a.png"), oracle::random_u8_image<double>(3, 101, 101, gen));
  const auto r = dukd::ingest(d.str(), 4);
  ASSERT_EQ(r.manifest.entries.size(), 1u);
  EXPECT_EQ(r.generated, 1);
  const auto ds = dukd::load_dataset<float>(r.manifest);
  EXPECT_EQ(ds.pairs[0].hr.height(), 100);
  EXPECT_EQ(ds.pairs[0].hr.width(), 100);
  EXPECT_EQ(ds.pairs[0].lr.height(), 25);
  EXPECT_EQ(ds.pairs[0].lr.width(), 25);
}

TEST(Ingest, SecondRunIsACacheHitAndTouchesNothing) {
  TempDir d("ingest_cache");
  dukd::write_synthetic_corpus(d.str(), 3, 32, 4);
  dukd::ingest(d.str(), 2);
  const auto before = snapshot(d.path());
  const auto r = dukd::ingest(d.str(), 2);
  EXPECT_EQ(r.generated, 0);
  EXPECT_EQ(r.cached, 3);
  EXPECT_EQ(snapshot(d.path()), before);
}

TEST(Ingest, ChangedHrIsRegenerated) {
  TempDir d("ingest_change");
  dukd::write_synthetic_corpus(d.str(), 2, 32, 4);
  dukd::ingest(d.str(), 2);
  dukd::save_image(d.str("img_000.png"), Image<double>(3, 32, 32, 0.5));
  const auto r = dukd::ingest(d.str(), 2);
  EXPECT_EQ(r.generated, 1);
  EXPECT_EQ(r.cached, 1);
}

TEST(Ingest, GeneratedLrIsTheBicubicDegradation) {
  TempDir d("ingest_lr");
  std::mt19937_64 gen(3);
  const auto hr = oracle::random_u8_image<double>(3, 16, 16, gen);
  dukd::save_image(d.str("x.png"), hr);
  const auto r = dukd::ingest(d.str(), 2);
  const auto lr = dukd::load_image<double>(r.manifest.entries[0].lr);
  EXPECT_EQ(lr, dukd::quantize_u8(oracle::bicubic(hr, 8, 8, true)));
}

TEST(Ingest, ToyCorpusManifest) {
  TempDir d("ingest16");
  dukd::write_synthetic_corpus(d.str(), 16, 64, 1);
  EXPECT_EQ(dukd::ingest(d.str(), 2).manifest.entries.size(), 16u);
}

TEST(Ingest, Errors) {
  TempDir d("ingest_err");
  EXPECT_THROW(dukd::ingest(d.str(), 2), dukd::DataError);
  EXPECT_THROW(dukd::ingest(d.str("missing"), 2), dukd::DataError);
  dukd::write_synthetic_corpus(d.str(), 1, 16, 1);
  std::ofstream(d.str("broken.png")) << "not a png";
  EXPECT_THROW(dukd::ingest(d.str(), 2), dukd::Error);
  dukd::IngestOptions opt;
  opt.continue_on_error = true;
  const auto r = dukd::ingest(d.str(), 2, opt);
  EXPECT_EQ(r.manifest.entries.size(), 1u);
  EXPECT_EQ(r.failures.size(), 1u);
  opt.degradation = "gaussian";
  opt.continue_on_error = false;
  fs::remove(d.str("broken.png"));
  EXPECT_THROW(dukd::ingest(d.str(), 2, opt), dukd::ConfigError);
}

TEST(Synthetic, DeterministicAndInRange) {
  const auto a = dukd::synthetic_pairs<float>(4, 32, 2, 9), b = dukd::synthetic_pairs<float>(4, 32, 2, 9);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_EQ(a[i].hr, b[i].hr);
    EXPECT_EQ(a[i].lr, b[i].lr);
    for (float v : a[i].hr.values()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
  }
  EXPECT_THROW(dukd::synthetic_pairs<float>(1, 33, 2, 1), dukd::DivisibilityError);
}

namespace {

nlohmann::json toy_config(const std::string& out_dir) {
  return {{"data", {{"scale", 2}, {"synthetic_train", {{"count", 4}, {"size", 32}, {"seed", 1}}},
                    {"synthetic_test", {{"count", 2}, {"size", 32}, {"seed", 2}}}}},
          {"model", {{"student", {{"preset", "toy-student"}}},
                     {"teacher", {{"preset", "toy-student"}, {"channels", 12}, {"seed", 3}}}}},
          {"loss", {{"mode", "dukd"}}},
          {"optim", {{"lr0", 5e-4}, {"total_iters", 6}, {"batch_size", 2}, {"lr_patch", 8}}},
          {"run", {{"seed", 4}, {"eval_every", 3}, {"ckpt_every", 3}, {"out_dir", out_dir}}}};
}

}  // namespace

TEST(Config, ModeDefaultsAndOverrides) {
  auto j = toy_config("x");
  auto cfg = dukd::parse_experiment_config(j);
  EXPECT_TRUE(cfg.loss.flags.kd && cfg.loss.flags.zoom_in && cfg.loss.flags.zoom_out && cfg.loss.flags.consistency);
  EXPECT_EQ(cfg.loss.weights.lambda_lc, 1.0);
  EXPECT_EQ(cfg.model.teacher.config->channels, 12);
  j["loss"] = {{"mode", "dukd"}, {"zoom_out", false}, {"lambda_lc", 0.5}, {"aug_pool", {"hflip", "color_inversion"}}};
  cfg = dukd::parse_experiment_config(j);
  EXPECT_FALSE(cfg.loss.flags.zoom_out);
  EXPECT_EQ(cfg.loss.weights.lambda_lc, 0.5);
  EXPECT_EQ(cfg.loss.aug_pool.size(), 2u);
  j["loss"] = {{"mode", "scratch"}};
  EXPECT_FALSE(dukd::parse_experiment_config(j).loss.flags.needs_teacher());
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  auto j = toy_config("x");
  j["optim"]["learning_rate"] = 1.0;
  EXPECT_THROW(dukd::parse_experiment_config(j), dukd::ConfigError);
  j = toy_config("x");
  j["loss"]["mode"] = "feature-kd";
  EXPECT_THROW(dukd::parse_experiment_config(j), dukd::ConfigError);
  j = toy_config("x");
  j["loss"]["lambda_kd"] = -1.0;
  EXPECT_THROW(dukd::parse_experiment_config(j), dukd::ConfigError);
  j = toy_config("x");
  j["optim"]["beta1"] = 1.5;
  EXPECT_THROW(dukd::parse_experiment_config(j), dukd::ConfigError);
  EXPECT_THROW(dukd::load_experiment_config("/nonexistent.json"), dukd::ConfigError);
}

TEST(Config, KdWithoutTeacherFailsAtStartup) {
  auto j = toy_config("x");
  j["model"].erase("teacher");
  const auto cfg = dukd::parse_experiment_config(j);
  EXPECT_THROW(dukd::load_teacher<float>(cfg), dukd::ConfigError);
}

TEST(Experiment, RunWritesArtifactsAndResumes) {
  TempDir d("experiment");
  const auto cfg = dukd::parse_experiment_config(toy_config(d.str("a")));
  const auto art = dukd::run_experiment(cfg);
  EXPECT_EQ(art.losses.size(), 6u);
  EXPECT_TRUE(fs::exists(d.str("a/ckpt_iter3.ckpt")));
  EXPECT_TRUE(fs::exists(d.str("a/metrics_final.json")));
  ASSERT_EQ(art.metrics.datasets.size(), 1u);
  EXPECT_TRUE(std::isfinite(art.metrics.datasets[0].psnr));

  std::ifstream log(art.log_path);
  std::string line;
  std::getline(log, line);
  const auto start = nlohmann::json::parse(line);
  EXPECT_EQ(start.at("seed"), 4);
  EXPECT_EQ(start.at("workers"), 1);
  int records = 0;
  while (std::getline(log, line)) {
    const auto rec = nlohmann::json::parse(line);
    for (const char* k : {"iter", "lr", "rec", "kd", "dukd", "lc", "total"}) EXPECT_TRUE(rec.contains(k)) << k;
    ++records;
  }
  EXPECT_EQ(records, 6);

  auto resumed = cfg;
  resumed.run.out_dir = d.str("b");
  resumed.run.resume = d.str("a/ckpt_iter3.ckpt");
  const auto art2 = dukd::run_experiment(resumed);
  EXPECT_EQ(art2.losses.size(), 3u);
  EXPECT_EQ(dukd::load_train_state<float>(art2.final_checkpoint).student.parameter_hash(),
            dukd::load_train_state<float>(art.final_checkpoint).student.parameter_hash());
}

TEST(Cli, EvalOfIdenticalImagesIsCapped) {
  TempDir d("cli_eval");
  dukd::write_synthetic_corpus(d.str("hr"), 2, 32, 1);
  const auto r = run_cli("eval " + d.str("hr") + " " + d.str("hr") + " --scale 2");
  EXPECT_EQ(r.code, 0) << r.out;
  const auto j = nlohmann::json::parse(r.out.substr(r.out.find('{')));
  EXPECT_EQ(j.at("psnr"), 100.0);
  EXPECT_TRUE(j.at("identical").get<bool>());
}

TEST(Cli, CompareWritesTwoRowCsv) {
  TempDir d("cli_compare");
  dukd::write_synthetic_corpus(d.str("toyset"), 2, 32, 1);
  for (const char* name : {"scratch", "dukd"}) {
    dukd::Rng rng(name[0]);
    dukd::save_checkpoint(dukd::SRModel<float>(dukd::model_preset("toy-student", 2), rng),
                          d.str(std::string(name) + ".ckpt"));
  }
  const auto r = run_cli("compare " + d.str("scratch.ckpt") + " " + d.str("dukd.ckpt") + " " + d.str("toyset") +
                         " --csv " + d.str("t.csv"));
  ASSERT_EQ(r.code, 0) << r.out;
  std::ifstream in(d.str("t.csv"));
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  ASSERT_EQ(lines.size(), 3u);
  EXPECT_EQ(lines[0], "method,scale,dataset,psnr,ssim,best");
  EXPECT_EQ(lines[1].rfind("scratch,2,toyset,", 0), 0u);
  EXPECT_EQ(lines[2].rfind("dukd,2,toyset,", 0), 0u);
}

TEST(Cli, CropsOutsideImageIsUsageError) {
  TempDir d("cli_crops");
  dukd::write_synthetic_corpus(d.str(), 1, 32, 1);
  dukd::Rng rng(1);
  dukd::save_checkpoint(dukd::SRModel<float>(dukd::model_preset("toy-student", 2), rng), d.str("m.ckpt"));
  const auto bad = run_cli("crops " + d.str("m.ckpt") + " " + d.str("img_000.png") + " --box 20,20,16,16 --out " +
                           d.str("p.png"));
  EXPECT_NE(bad.code, 0);
  const auto ok = run_cli("crops " + d.str("m.ckpt") + " " + d.str("img_000.png") + " --box 4,4,16,16 --out " +
                          d.str("p.png"));
  EXPECT_EQ(ok.code, 0) << ok.out;
  EXPECT_EQ(dukd::load_image<float>(d.str("p.png")).width(), 3 * 16 + 2 * 2);
  EXPECT_TRUE(fs::exists(d.str("p.json")));
}

TEST(Cli, UnknownFlagOrMissingFileIsNonzero) {
  EXPECT_NE(run_cli("eval --bogus").code, 0);
  EXPECT_NE(run_cli("eval /nonexistent.ckpt /tmp").code, 0);
  EXPECT_NE(run_cli("").code, 0);
}

TEST(Cli, EverySubcommandTakesSeed) {
  for (const char* sub : {"train", "eval", "compare", "similarity", "upcycle-preview", "crops", "synth", "ingest"}) {
    const auto r = run_cli(std::string(sub) + " --help");
    EXPECT_NE(r.out.find("--seed"), std::string::npos) << sub;
  }
}

TEST(Cli, SeededPreviewIsReproducible) {
  TempDir d("cli_preview");
  dukd::write_synthetic_corpus(d.str(), 1, 32, 1);
  for (const char* out : {"a", "b"})
    ASSERT_EQ(run_cli("upcycle-preview " + d.str("img_000.png") + " --seed 7 --out " + d.str(out)).code, 0);
  EXPECT_EQ(dukd::load_image<float>(d.str("a/zoom_in.png")), dukd::load_image<float>(d.str("b/zoom_in.png")));
}
