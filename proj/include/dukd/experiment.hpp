#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dukd/augment.hpp"
#include "dukd/checkpoint.hpp"
#include "dukd/dataset.hpp"
#include "dukd/error.hpp"
#include "dukd/losses.hpp"
#include "dukd/metrics.hpp"
#include "dukd/model.hpp"
#include "dukd/optim.hpp"
#include "dukd/trainer.hpp"

namespace dukd {

struct SyntheticSpec {
  int count = 16;
  int size = 64;
  std::uint64_t seed = 1;
};

struct DataSection {
  std::string train_dir;
  std::vector<std::string> test_dirs;
  int scale = 2;
  std::string degradation = "bicubic";
  std::optional<SyntheticSpec> synthetic_train;
  std::optional<SyntheticSpec> synthetic_test;
};

struct TeacherSection {
  std::optional<std::string> checkpoint;
  std::optional<SRModelConfig> config;  // random-init teacher, for plumbing tests
  std::uint64_t seed = 0;
};

struct ModelSection {
  SRModelConfig student;
  TeacherSection teacher;
  std::optional<std::string> init_checkpoint;  // e.g. a x2 model seeding a x4 run
};

struct RunSection {
  std::uint64_t seed = 0;
  std::int64_t eval_every = 5000;
  std::int64_t ckpt_every = 0;  // 0: final checkpoint only
  std::int64_t log_every = 1;
  std::string out_dir = "runs/default";
  std::optional<std::string> resume;
  EvalOptions eval{-1, true};  // shave -1 means "use the scale"
};

struct ExperimentConfig {
  DataSection data;
  ModelSection model;
  DistillSettings loss;
  OptimizerConfig optim;
  RunSection run;
};

namespace detail {

inline void check_keys(const nlohmann::json& j, const std::string& section, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError("section '" + section + "' must be an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ConfigError("unknown key '" + key + "' in section '" + section + "'");
}

inline SyntheticSpec parse_synthetic(const nlohmann::json& j, const std::string& section) {
  check_keys(j, section, {"count", "size", "seed"});
  SyntheticSpec s;
  s.count = j.value("count", s.count);
  s.size = j.value("size", s.size);
  s.seed = j.value("seed", s.seed);
  if (s.count < 1 || s.size < 1) throw ConfigError(section + ": count and size must be positive");
  return s;
}

inline SRModelConfig parse_model(const nlohmann::json& j, int scale, const std::string& section) {
  check_keys(j, section, {"preset", "channels", "blocks", "residual_scaling", "checkpoint", "seed"});
  SRModelConfig c;
  if (j.contains("preset")) c = model_preset(j["preset"].get<std::string>(), scale);
  c.scale = scale;
  c.channels = j.value("channels", c.channels);
  c.blocks = j.value("blocks", c.blocks);
  c.residual_scaling = j.value("residual_scaling", c.residual_scaling);
  c.validate();
  return c;
}

}  // namespace detail

/// Parses the declarative experiment description (JSON). Unknown keys are
/// rejected so typos surface as configuration errors.
inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
  ExperimentConfig cfg;
  try {
    detail::check_keys(j, "root", {"data", "model", "loss", "optim", "run"});

    const auto& d = j.at("data");
    detail::check_keys(d, "data", {"train_dir", "test_dirs", "scale", "degradation", "synthetic_train", "synthetic_test"});
    cfg.data.train_dir = d.value("train_dir", "");
    cfg.data.test_dirs = d.value("test_dirs", std::vector<std::string>{});
    cfg.data.scale = d.value("scale", 2);
    cfg.data.degradation = d.value("degradation", "bicubic");
    if (d.contains("synthetic_train")) cfg.data.synthetic_train = detail::parse_synthetic(d["synthetic_train"], "data.synthetic_train");
    if (d.contains("synthetic_test")) cfg.data.synthetic_test = detail::parse_synthetic(d["synthetic_test"], "data.synthetic_test");
    if (cfg.data.train_dir.empty() && !cfg.data.synthetic_train)
      throw ConfigError("data: either train_dir or synthetic_train is required");

    const auto& m = j.at("model");
    detail::check_keys(m, "model", {"student", "teacher", "init_checkpoint"});
    cfg.model.student = detail::parse_model(m.at("student"), cfg.data.scale, "model.student");
    if (m.contains("teacher")) {
      const auto& t = m["teacher"];
      if (t.contains("checkpoint")) {
        detail::check_keys(t, "model.teacher", {"checkpoint"});
        cfg.model.teacher.checkpoint = t["checkpoint"].get<std::string>();
      } else {
        cfg.model.teacher.config = detail::parse_model(t, cfg.data.scale, "model.teacher");
        cfg.model.teacher.seed = t.value("seed", std::uint64_t{0});
      }
    }
    if (m.contains("init_checkpoint")) cfg.model.init_checkpoint = m["init_checkpoint"].get<std::string>();

    if (j.contains("loss")) {
      const auto& l = j["loss"];
      detail::check_keys(l, "loss", {"mode", "kd", "zoom_in", "zoom_out", "consistency", "lambda_kd", "lambda_dukd",
                                     "lambda_lc", "aug_pool"});
      const std::string mode = l.value("mode", "dukd");
      if (mode == "scratch")
        cfg.loss.flags = DistillFlags::scratch();
      else if (mode == "kd")
        cfg.loss.flags = DistillFlags::vanilla_kd();
      else if (mode == "dukd")
        cfg.loss.flags = DistillFlags::full();
      else
        throw ConfigError("loss.mode must be scratch, kd or dukd");
      cfg.loss.flags.kd = l.value("kd", cfg.loss.flags.kd);
      cfg.loss.flags.zoom_in = l.value("zoom_in", cfg.loss.flags.zoom_in);
      cfg.loss.flags.zoom_out = l.value("zoom_out", cfg.loss.flags.zoom_out);
      cfg.loss.flags.consistency = l.value("consistency", cfg.loss.flags.consistency);
      cfg.loss.weights.lambda_kd = l.value("lambda_kd", cfg.loss.weights.lambda_kd);
      cfg.loss.weights.lambda_dukd = l.value("lambda_dukd", cfg.loss.weights.lambda_dukd);
      cfg.loss.weights.lambda_lc = l.value("lambda_lc", cfg.loss.weights.lambda_lc);
      if (l.contains("aug_pool")) {
        cfg.loss.aug_pool.clear();
        for (const auto& s : l["aug_pool"]) cfg.loss.aug_pool.push_back(aug_from_string(s.get<std::string>()));
      }
    }
    cfg.loss.weights.validate();
    if (cfg.loss.flags.consistency && cfg.loss.aug_pool.empty()) throw ConfigError("loss.aug_pool is empty");

    if (j.contains("optim")) {
      const auto& o = j["optim"];
      detail::check_keys(o, "optim", {"lr0", "beta1", "beta2", "epsilon", "decay_factor", "decay_every", "total_iters",
                                      "batch_size", "lr_patch"});
      auto& c = cfg.optim;
      c.lr0 = o.value("lr0", c.lr0);
      c.beta1 = o.value("beta1", c.beta1);
      c.beta2 = o.value("beta2", c.beta2);
      c.epsilon = o.value("epsilon", c.epsilon);
      c.decay_factor = o.value("decay_factor", c.decay_factor);
      c.total_iters = o.value("total_iters", c.total_iters);
      c.decay_every = o.value("decay_every", std::min(c.decay_every, c.total_iters));
      c.batch_size = o.value("batch_size", c.batch_size);
      c.lr_patch = o.value("lr_patch", c.lr_patch);
    }
    cfg.optim.validate();

    if (j.contains("run")) {
      const auto& r = j["run"];
      detail::check_keys(r, "run", {"seed", "eval_every", "ckpt_every", "log_every", "out_dir", "resume", "shave",
                                    "quantize"});
      cfg.run.seed = r.value("seed", cfg.run.seed);
      cfg.run.eval_every = r.value("eval_every", cfg.run.eval_every);
      cfg.run.ckpt_every = r.value("ckpt_every", cfg.run.ckpt_every);
      cfg.run.log_every = r.value("log_every", cfg.run.log_every);
      cfg.run.out_dir = r.value("out_dir", cfg.run.out_dir);
      if (r.contains("resume")) cfg.run.resume = r["resume"].get<std::string>();
      cfg.run.eval.shave = r.value("shave", cfg.run.eval.shave);
      cfg.run.eval.quantize = r.value("quantize", cfg.run.eval.quantize);
    }
    if (cfg.run.eval.shave < 0) cfg.run.eval.shave = cfg.data.scale;
    if (cfg.run.log_every < 1) throw ConfigError("run.log_every must be positive");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_experiment_config(j);
}

template <class T>
PairDataset<T> load_directory_dataset(const std::string& dir, int scale, const std::string& degradation) {
  IngestOptions opt;
  opt.degradation = degradation;
  return load_dataset<T>(ingest(dir, scale, opt).manifest);
}

/// Training set and test sets named by the data section.
template <class T>
struct ExperimentData {
  PairDataset<T> train;
  std::vector<PairDataset<T>> tests;
};

template <class T>
ExperimentData<T> load_experiment_data(const DataSection& d) {
  ExperimentData<T> out;
  if (d.synthetic_train)
    out.train = {"synthetic-train", d.scale,
                 synthetic_pairs<T>(d.synthetic_train->count, d.synthetic_train->size, d.scale, d.synthetic_train->seed)};
  else
    out.train = load_directory_dataset<T>(d.train_dir, d.scale, d.degradation);
  if (d.synthetic_test)
    out.tests.push_back({"synthetic-test", d.scale,
                         synthetic_pairs<T>(d.synthetic_test->count, d.synthetic_test->size, d.scale, d.synthetic_test->seed)});
  for (const auto& dir : d.test_dirs) out.tests.push_back(load_directory_dataset<T>(dir, d.scale, d.degradation));
  return out;
}

/// Teacher named by the config, or nothing when the run needs none.
template <class T>
std::optional<SRModel<T>> load_teacher(const ExperimentConfig& cfg) {
  const auto& t = cfg.model.teacher;
  std::optional<SRModel<T>> teacher;
  if (t.checkpoint) {
    teacher = load_checkpoint<T>(*t.checkpoint);
  } else if (t.config) {
    Rng rng(t.seed);
    teacher = SRModel<T>(*t.config, rng);
  }
  if (cfg.loss.flags.needs_teacher() && !teacher)
    throw ConfigError("distillation is enabled but model.teacher is not configured");
  if (teacher && teacher->scale() != cfg.data.scale)
    throw ConfigError("teacher scale " + std::to_string(teacher->scale()) + " does not match data scale " +
                      std::to_string(cfg.data.scale));
  return teacher;
}

struct RunArtifacts {
  std::string final_checkpoint;
  std::string log_path;
  MetricReport metrics;
  std::vector<LossReport> losses;
};

template <class T>
MetricReport evaluate_all(const SRNetwork<T>& model, const std::vector<PairDataset<T>>& tests,
                          const std::string& method, const EvalOptions& opt) {
  MetricReport r;
  for (const auto& ds : tests)
    r.datasets.push_back(evaluate<T>(model, std::span<const TrainingPair<T>>(ds.pairs), ds.name, method, opt));
  return r;
}

/// Full training run: teacher/student setup, total_iters steps with periodic
/// evaluation and checkpoints, JSON-lines log, final checkpoint and metrics.
/// A config with run.resume continues from a saved training state.
inline RunArtifacts run_experiment(const ExperimentConfig& cfg, std::ostream* progress = nullptr) {
  using T = float;
  namespace fs = std::filesystem;
  const ExperimentData<T> data = load_experiment_data<T>(cfg.data);
  const std::optional<SRModel<T>> teacher = load_teacher<T>(cfg);

  TrainState<T> state;
  if (cfg.run.resume) {
    state = load_train_state<T>(*cfg.run.resume);
    if (state.student.config() != cfg.model.student)
      throw ConfigError("resume checkpoint student config differs from model.student");
  } else {
    state = TrainState<T>::fresh(cfg.model.student, cfg.run.seed);
    if (cfg.model.init_checkpoint) {
      Rng reinit(cfg.run.seed ^ 0x9e3779b97f4a7c15ULL);
      const auto report = load_into(state.student, read_checkpoint(*cfg.model.init_checkpoint), reinit);
      if (progress && !report.reinitialized.empty())
        *progress << "warning: " << report.reinitialized.size() << " upsampler tensors re-initialized\n";
    }
  }

  fs::create_directories(cfg.run.out_dir);
  RunArtifacts art;
  art.log_path = (fs::path(cfg.run.out_dir) / "train_log.jsonl").string();
  std::ofstream log(art.log_path, cfg.run.resume ? std::ios::app : std::ios::trunc);
  if (!log) throw DataError("cannot write log '" + art.log_path + "'");
  log << nlohmann::json{{"event", "start"},
                        {"iter", state.iteration},
                        {"seed", cfg.run.seed},
                        {"workers", 1},
                        {"flags", {{"kd", cfg.loss.flags.kd},
                                   {"zoom_in", cfg.loss.flags.zoom_in},
                                   {"zoom_out", cfg.loss.flags.zoom_out},
                                   {"consistency", cfg.loss.flags.consistency}}}}
             .dump()
      << '\n';
  std::ofstream metrics_log((fs::path(cfg.run.out_dir) / "metrics.jsonl").string(), std::ios::app);

  const SRNetwork<T>* teacher_ptr = teacher ? &*teacher : nullptr;
  Trainer<T> trainer(std::span<const TrainingPair<T>>(data.train.pairs), teacher_ptr, cfg.loss, cfg.optim,
                     std::move(state));
  while (!trainer.done()) {
    const LossReport r = trainer.step();
    art.losses.push_back(r);
    const std::int64_t it = trainer.state().iteration;
    if (it % cfg.run.log_every == 0) {
      auto rec = to_json(r);
      rec["iter"] = it;
      rec["lr"] = trainer.state().current_lr;
      log << rec.dump() << '\n';
    }
    if (cfg.run.eval_every > 0 && it % cfg.run.eval_every == 0 && !data.tests.empty()) {
      const auto m = evaluate_all<T>(trainer.state().student, data.tests, "student", cfg.run.eval);
      metrics_log << nlohmann::json{{"iter", it}, {"metrics", to_json(m)}}.dump() << '\n';
      if (progress) *progress << "iter " << it << " eval " << to_json(m).dump() << '\n';
    }
    if (cfg.run.ckpt_every > 0 && it % cfg.run.ckpt_every == 0)
      save_train_state(trainer.state(), (fs::path(cfg.run.out_dir) / ("ckpt_iter" + std::to_string(it) + ".ckpt")).string());
  }
  art.final_checkpoint = (fs::path(cfg.run.out_dir) / "final.ckpt").string();
  save_train_state(trainer.state(), art.final_checkpoint);
  if (!data.tests.empty()) {
    art.metrics = evaluate_all<T>(trainer.state().student, data.tests, "student", cfg.run.eval);
    std::ofstream((fs::path(cfg.run.out_dir) / "metrics_final.json").string()) << to_json(art.metrics).dump(2) << '\n';
  }
  return art;
}

}  // namespace dukd
