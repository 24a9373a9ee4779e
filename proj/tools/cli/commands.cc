// Copyright 2026 The MetaUnlearn Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "cli/commands.h"

#include <chrono>
#include <fstream>
#include <iostream>
#include <sstream>

#include "metaunlearn/common/errors.h"
#include "metaunlearn/common/format.h"
#include "metaunlearn/diffusion/checkpoint.h"
#include "metaunlearn/eval/plot.h"
#include "metaunlearn/meta/records.h"

namespace metaunlearn::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::ostream& log_stream(const CommandOptions& options) {
  return options.log ? *options.log : std::cerr;
}

// Stages invalidated when the keyed stage is recomputed.
const std::map<std::string, std::vector<std::string>>& downstream() {
  static const std::map<std::string, std::vector<std::string>> m = {
      {kStagePretrain, {kStageUnlearn, kStageMeta, kStageAttack, kStageEval,
                        kStageReport}},
      {kStageUnlearn, {kStageAttack, kStageEval, kStageReport}},
      {kStageMeta, {kStageAttack, kStageEval, kStageReport}},
      {kStageAttack, {kStageReport}},
      {kStageEval, {}},
      {kStageReport, {}},
  };
  return m;
}

class Run {
 public:
  explicit Run(const ExperimentConfig& config)
      : hash_(config_hash(config)), root_(run_root(config)) {
    auto loaded = load_manifest(root_);
    if (loaded) {
      if (loaded->config_hash != hash_) {
        throw InvalidArgument("manifest at '" + root_.string() +
                              "' belongs to a different config");
      }
      manifest_ = std::move(*loaded);
    } else {
      manifest_.config_hash = hash_;
      json cfg = experiment_to_json(config);
      cfg.erase("out");
      manifest_.config = cfg;
      manifest_.versions = {
          {"metaunlearn", "0.1.0"},
          {diffusion::kCheckpointSchema, std::to_string(diffusion::kCheckpointVersion)},
          {kExperimentSchema, std::to_string(kExperimentVersion)},
          {kManifestSchema, std::to_string(kManifestVersion)}};
    }
  }

  const fs::path& root() const { return root_; }

  bool up_to_date(const std::string& stage) const {
    const StageEntry* entry = manifest_.stage(stage);
    return entry && verify_stage(root_, *entry).empty();
  }

  // Path of a verified upstream artifact.
  fs::path require(const std::string& stage, const std::string& key) const {
    const StageEntry* entry = manifest_.stage(stage);
    if (!entry) {
      throw MissingInput("stage '" + stage + "' has not been run for config " +
                         hash_ + "; run `metaunlearn " + stage + "` first");
    }
    auto problems = verify_stage(root_, *entry);
    if (!problems.empty()) {
      throw MissingInput("stage '" + stage + "' failed verification: " +
                         problems.front());
    }
    auto it = entry->files.find(key);
    if (it == entry->files.end()) {
      throw MissingInput("stage '" + stage + "' has no artifact '" + key + "'");
    }
    return root_ / it->second.path;
  }

  bool has(const std::string& stage) const { return up_to_date(stage); }

  fs::path stage_dir(const std::string& stage) const {
    fs::path dir = root_ / stage;
    fs::create_directories(dir);
    return dir;
  }

  void record(const std::string& stage, StageEntry entry) {
    for (const std::string& d : downstream().at(stage)) manifest_.stages.erase(d);
    manifest_.stages[stage] = std::move(entry);
    save_manifest(root_, manifest_);
  }

 private:
  std::string hash_;
  fs::path root_;
  RunManifest manifest_;
};

struct World {
  concepts::ConceptTable table;
  concepts::DatasetBundle bundle;
  diffusion::NoiseSchedule schedule;
};

World make_world(const ExperimentConfig& c) {
  World w;
  w.table = concepts::make_world(c.world, stage_seed(c, Stage::kWorld));
  w.bundle = concepts::draw_split(w.table, c.split, stage_seed(c, Stage::kSplit));
  w.schedule = diffusion::make_schedule(c.schedule.steps, c.schedule.beta_start,
                                        c.schedule.beta_end);
  return w;
}

diffusion::Checkpoint make_checkpoint(const ExperimentConfig& c,
                                      diffusion::DenoiserParams params,
                                      json provenance) {
  diffusion::Checkpoint ckpt;
  ckpt.params = std::move(params);
  ckpt.schedule_steps = c.schedule.steps;
  ckpt.beta_start = c.schedule.beta_start;
  ckpt.beta_end = c.schedule.beta_end;
  ckpt.seed_lineage = {stage_seed(c, Stage::kWorld), stage_seed(c, Stage::kSplit),
                       stage_seed(c, Stage::kInit), stage_seed(c, Stage::kPretrain)};
  provenance["config_hash"] = config_hash(c);
  ckpt.provenance = std::move(provenance);
  return ckpt;
}

void write_loss_csv(const fs::path& path, const std::vector<double>& losses) {
  std::ofstream out(path, std::ios::binary);
  out << "step,loss\n";
  for (std::size_t i = 0; i < losses.size(); ++i) {
    out << (i + 1) << ',' << format_double(losses[i]) << '\n';
  }
  if (!out) throw InvalidArgument("failed writing '" + path.string() + "'");
}

void write_json(const fs::path& path, const json& j) {
  eval::write_text(path, j.dump(2) + "\n");
}

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                   start)
      .count();
}

bool skip_if_current(const Run& run, const std::string& stage,
                     const CommandOptions& options) {
  if (options.force || !run.up_to_date(stage)) return false;
  log_stream(options) << stage << ": up to date in " << run.root().string() << "\n";
  return true;
}

diffusion::Checkpoint load_theta_star(const Run& run) {
  return diffusion::load_checkpoint(run.require(kStagePretrain, "checkpoint"));
}

json unlearn_provenance(const ExperimentConfig& c) {
  return {{"method", unlearn::to_string(c.unlearn.method)},
          {"unlearn", unlearn::unlearn_config_to_json(c.unlearn)}};
}

}  // namespace

fs::path run_root(const ExperimentConfig& config) {
  return fs::path(config.out) / config_hash(config);
}

int cmd_pretrain(const ExperimentConfig& config, const CommandOptions& options) {
  config.validate();
  Run run(config);
  if (skip_if_current(run, kStagePretrain, options)) return kExitOk;
  auto start = std::chrono::steady_clock::now();
  World w = make_world(config);
  auto params = diffusion::DenoiserParams::random(config.model,
                                                  stage_seed(config, Stage::kInit));
  auto train = concepts::concat_samples(w.bundle.forget, w.bundle.retain);
  auto batch = concepts::make_batch(w.table, train, config.model);
  diffusion::Rng rng(stage_seed(config, Stage::kPretrain));
  auto log = diffusion::train_diffusion(params, batch, w.schedule, config.pretrain, rng);

  fs::path dir = run.stage_dir(kStagePretrain);
  diffusion::save_checkpoint(dir / "theta_star.json",
                             make_checkpoint(config, params, {{"stage", "pretrain"}}));
  write_loss_csv(dir / "losses.csv", log.losses);
  write_json(dir / "world.json", concepts::table_to_json(w.table));
  StageEntry entry;
  entry.files["checkpoint"] = make_ref(run.root(), "pretrain/theta_star.json");
  entry.files["losses"] = make_ref(run.root(), "pretrain/losses.csv");
  entry.files["world"] = make_ref(run.root(), "pretrain/world.json");
  entry.wall_ms = elapsed_ms(start);
  run.record(kStagePretrain, std::move(entry));
  log_stream(options) << "pretrain: " << params.size() << " parameters, "
                      << log.losses.size() << " steps\n";
  return kExitOk;
}

int cmd_unlearn(const ExperimentConfig& config, const CommandOptions& options) {
  config.validate();
  Run run(config);
  if (skip_if_current(run, kStageUnlearn, options)) return kExitOk;
  auto start = std::chrono::steady_clock::now();
  diffusion::Checkpoint star = load_theta_star(run);
  World w = make_world(config);
  unlearn::UnlearnResult result =
      unlearn::is_closed_form(config.unlearn.method)
          ? unlearn::closed_form_unlearn(star.params, config.unlearn, w.table)
          : [&] {
              diffusion::Rng rng(stage_seed(config, Stage::kUnlearn));
              return unlearn::run_unlearn(star.params, config.unlearn, w.bundle,
                                          w.table, w.schedule, rng);
            }();

  fs::path dir = run.stage_dir(kStageUnlearn);
  diffusion::save_checkpoint(
      dir / "theta.json",
      make_checkpoint(config, result.params, unlearn_provenance(config)));
  write_loss_csv(dir / "losses.csv", result.losses);
  StageEntry entry;
  entry.files["checkpoint"] = make_ref(run.root(), "unlearn/theta.json");
  entry.files["losses"] = make_ref(run.root(), "unlearn/losses.csv");
  entry.wall_ms = elapsed_ms(start);
  run.record(kStageUnlearn, std::move(entry));
  log_stream(options) << "unlearn: " << unlearn::to_string(config.unlearn.method)
                      << ", " << result.losses.size() << " steps\n";
  return kExitOk;
}

int cmd_meta(const ExperimentConfig& config, const CommandOptions& options) {
  config.validate();
  Run run(config);
  if (skip_if_current(run, kStageMeta, options)) return kExitOk;
  auto start = std::chrono::steady_clock::now();
  diffusion::Checkpoint star = load_theta_star(run);
  World w = make_world(config);
  diffusion::DenoiserParams init =
      config.meta.two_stage
          ? unlearn::closed_form_unlearn(star.params, config.unlearn, w.table).params
          : star.params;
  diffusion::Rng rng(stage_seed(config, Stage::kUnlearn));
  meta::MetaResult result =
      meta::meta_unlearn(init, config.meta, config.unlearn, star.params, w.bundle,
                         w.table, w.schedule, rng);

  fs::path dir = run.stage_dir(kStageMeta);
  diffusion::save_checkpoint(
      dir / "theta.json",
      make_checkpoint(config, result.params, [&] {
        json p = unlearn_provenance(config);
        p["meta"] = meta::meta_config_to_json(config.meta);
        return p;
      }()));
  meta::write_records_csv(dir / "records.csv", result.records);
  StageEntry entry;
  entry.files["checkpoint"] = make_ref(run.root(), "meta/theta.json");
  entry.files["records"] = make_ref(run.root(), "meta/records.csv", {"wall_ms"});
  if (result.records.size() >= 2 && config.meta.gamma2 > 0.0) {
    eval::write_text(dir / "alignment.svg", eval::plot_alignment(result.records));
    entry.files["alignment_plot"] = make_ref(run.root(), "meta/alignment.svg");
  }
  entry.wall_ms = elapsed_ms(start);
  run.record(kStageMeta, std::move(entry));
  log_stream(options) << "meta: " << result.records.size() << " outer steps\n";
  return kExitOk;
}

int cmd_attack(const ExperimentConfig& config, const CommandOptions& options) {
  config.validate();
  Run run(config);
  if (skip_if_current(run, kStageAttack, options)) return kExitOk;
  auto start = std::chrono::steady_clock::now();
  auto unlearned = diffusion::load_checkpoint(run.require(kStageUnlearn, "checkpoint"));
  auto metaed = diffusion::load_checkpoint(run.require(kStageMeta, "checkpoint"));
  World w = make_world(config);
  auto a = attack::run_attack(unlearned.params, config.attack, w.bundle, w.table,
                              w.schedule, false);
  auto b = attack::run_attack(metaed.params, config.attack, w.bundle, w.table,
                              w.schedule, false);

  fs::path dir = run.stage_dir(kStageAttack);
  attack::write_curve_csv(dir / "unlearn.csv", a.curve);
  attack::write_curve_csv(dir / "meta.csv", b.curve);
  StageEntry entry;
  entry.files["unlearn_curve"] = make_ref(run.root(), "attack/unlearn.csv");
  entry.files["meta_curve"] = make_ref(run.root(), "attack/meta.csv");
  entry.wall_ms = elapsed_ms(start);
  run.record(kStageAttack, std::move(entry));
  log_stream(options) << "attack: " << attack::to_string(config.attack.dataset)
                      << " on unlearn and meta checkpoints\n";
  return kExitOk;
}

int cmd_eval(const ExperimentConfig& config, const CommandOptions& options) {
  config.validate();
  Run run(config);
  if (skip_if_current(run, kStageEval, options)) return kExitOk;
  auto start = std::chrono::steady_clock::now();
  World w = make_world(config);
  json out = json::object();
  auto evaluate = [&](const std::string& name, const fs::path& path,
                      const std::vector<meta::MetaStepRecord>* records) {
    auto ckpt = diffusion::load_checkpoint(path);
    ad::Value theta = ckpt.params.as_value();
    eval::ModelView view{ckpt.params.config(), theta, w.schedule};
    eval::MetricReport report = eval::evaluate(view, w.table, config.eval);
    if (records && records->size() >= 2) {
      report.alignment = eval::alignment_series(*records);
    }
    out[name] = eval::report_to_json(report);
  };
  evaluate("theta_star", run.require(kStagePretrain, "checkpoint"), nullptr);
  if (run.has(kStageUnlearn)) {
    evaluate("unlearn", run.require(kStageUnlearn, "checkpoint"), nullptr);
  }
  if (run.has(kStageMeta)) {
    auto records = meta::read_records_csv(run.require(kStageMeta, "records"));
    evaluate("meta", run.require(kStageMeta, "checkpoint"), &records);
  }
  fs::path dir = run.stage_dir(kStageEval);
  write_json(dir / "report.json", out);
  StageEntry entry;
  entry.files["report"] = make_ref(run.root(), "eval/report.json");
  entry.wall_ms = elapsed_ms(start);
  run.record(kStageEval, std::move(entry));
  log_stream(options) << out.dump(2) << "\n";
  return kExitOk;
}

std::string report_grid_csv(const attack::RelearnCurve& unlearn,
                            const attack::RelearnCurve& meta) {
  attack::Verdict v = attack::compare_runs(unlearn, meta);
  std::ostringstream os;
  os << "step,forget_score_unlearn,forget_score_meta,delta_forget_score,"
        "l_retain_unlearn,l_retain_meta,delta_l_retain,delta_retain_mmd\n";
  for (std::size_t i = 0; i < v.deltas.size(); ++i) {
    const auto& a = unlearn.points[i];
    const auto& b = meta.points[i];
    const auto& d = v.deltas[i];
    os << d.step << ',' << format_double(a.forget_score) << ','
       << format_double(b.forget_score) << ',' << format_double(d.forget_score)
       << ',' << format_double(a.l_retain) << ',' << format_double(b.l_retain)
       << ',' << format_double(d.l_retain) << ',' << format_double(d.retain_mmd)
       << '\n';
  }
  return os.str();
}

int cmd_report(const ExperimentConfig& config, const CommandOptions& options) {
  config.validate();
  Run run(config);
  auto start = std::chrono::steady_clock::now();
  const std::pair<const char*, const char*> inputs[] = {
      {"unlearn_curve", "attack/unlearn.csv"}, {"meta_curve", "attack/meta.csv"}};
  for (const auto& [key, rel] : inputs) {
    if (!fs::exists(run.root() / rel)) {
      throw MissingInput(std::string("report: missing input curve '") + rel +
                         "'; run `metaunlearn attack` first");
    }
  }
  auto a = attack::read_curve_csv(run.require(kStageAttack, "unlearn_curve"));
  auto b = attack::read_curve_csv(run.require(kStageAttack, "meta_curve"));
  attack::Verdict verdict = attack::compare_runs(a, b);

  fs::path dir = run.stage_dir(kStageReport);
  eval::write_text(dir / "grid.csv", report_grid_csv(a, b));
  write_json(dir / "verdict.json", attack::verdict_to_json(verdict));
  std::vector<std::pair<std::string, attack::RelearnCurve>> curves = {
      {unlearn::to_string(config.unlearn.method), a},
      {"meta-" + unlearn::to_string(config.unlearn.method), b}};
  eval::write_text(dir / "forget_score.svg", eval::plot_forget_curves(curves));
  StageEntry entry;
  entry.files["grid"] = make_ref(run.root(), "report/grid.csv");
  entry.files["verdict"] = make_ref(run.root(), "report/verdict.json");
  entry.files["forget_plot"] = make_ref(run.root(), "report/forget_score.svg");
  entry.wall_ms = elapsed_ms(start);
  run.record(kStageReport, std::move(entry));

  std::ostream& log = log_stream(options);
  log << report_grid_csv(a, b);
  log << "slower_relearning=" << (verdict.slower_relearning ? "true" : "false")
      << " self_destruct=" << (verdict.self_destruct ? "true" : "false") << "\n";
  return verdict.slower_relearning ? kExitOk : kExitVerdict;
}

}  // namespace metaunlearn::cli
