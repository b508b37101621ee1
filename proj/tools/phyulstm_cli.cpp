#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "phyulstm/checkpoint.hpp"
#include "phyulstm/datasets.hpp"
#include "phyulstm/evaluation.hpp"
#include "phyulstm/log.hpp"
#include "phyulstm/training.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace phyulstm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

// Thrown for bad arguments detected after parsing (missing files etc).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <class T>
void override_with(const std::optional<T>& flag, T& target) {
  if (flag) target = *flag;
}

json read_json_file(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw UsageError("cannot open config file " + p.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw UsageError("config " + p.string() + ": " + e.what());
  }
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw UsageError(std::string(what) + " not found: " + p.string());
}

void require_parent_dir(const fs::path& p) {
  const fs::path parent = p.parent_path();
  if (!parent.empty() && !fs::exists(parent)) fs::create_directories(parent);
}

void write_text(const fs::path& p, const std::string& text) {
  require_parent_dir(p);
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("write failed for " + p.string());
}

// ---------------------------------------------------------------- generate

struct GenerateArgs {
  std::optional<std::size_t> n;
  std::optional<double> duration, dt, intensity;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> params;
  std::string config;
  std::string out;
};

OscillatorParams parse_params(const std::string& text, OscillatorParams p) {
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw UsageError("--params: expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    double value = 0.0;
    try {
      value = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw UsageError("--params: bad number in '" + item + "'");
    }
    if (key == "m") p.m = value;
    else if (key == "c") p.c = value;
    else if (key == "k1") p.k1 = value;
    else if (key == "k2") p.k2 = value;
    else if (key == "gamma") p.gamma = value;
    else throw UsageError("--params: unknown key '" + key + "'");
  }
  return p;
}

void apply_generate_json(const json& j, SyntheticDatasetSpec& spec) {
  for (const auto& [key, value] : j.items()) {
    if (key == "n") spec.n_records = value.get<std::size_t>();
    else if (key == "duration") spec.duration = value.get<double>();
    else if (key == "dt") spec.dt = value.get<double>();
    else if (key == "intensity") spec.intensity = value.get<double>();
    else if (key == "seed") spec.seed = value.get<std::uint64_t>();
    else if (key == "params") spec.params = parse_params(value.get<std::string>(), spec.params);
    else throw UsageError("config: unknown key 'generate." + key + "'");
  }
}

int cmd_generate(const GenerateArgs& a) {
  SyntheticDatasetSpec spec;
  if (!a.config.empty()) {
    const json cfg = read_json_file(a.config);
    if (cfg.contains("generate")) apply_generate_json(cfg["generate"], spec);
  }
  override_with(a.n, spec.n_records);
  override_with(a.duration, spec.duration);
  override_with(a.dt, spec.dt);
  override_with(a.intensity, spec.intensity);
  override_with(a.seed, spec.seed);
  if (a.params) spec.params = parse_params(*a.params, spec.params);
  if (spec.n_records == 0) throw UsageError("--n must be >= 1");
  spec.params.validate();

  const RecordCollection data = generate_synthetic_dataset(spec);
  fs::create_directories(a.out);
  save_records(a.out, data);
  std::printf("wrote %zu records of %zu steps to %s\n", data.records.size(), data.records.front().size(),
              a.out.c_str());
  return kExitOk;
}

// ------------------------------------------------------------------- train

struct TrainArgs {
  std::string data;
  std::string config;
  std::string out_checkpoint;
  std::string log_csv;
  std::optional<std::string> regime;
  std::optional<std::size_t> train_n, val_n;
  std::optional<std::uint64_t> split_seed, seed;
  std::optional<std::size_t> epochs, batch_size, patience;
  std::optional<double> lr, min_delta, w1, w2, clip_norm;
};

struct SplitSettings {
  std::size_t train_n = 10;
  std::size_t val_n = 0;
  std::uint64_t seed = 0;
};

json split_json(const SplitSettings& s) {
  return {{"train_n", s.train_n}, {"val_n", s.val_n}, {"seed", s.seed}};
}

std::string effective_config(const TrainConfig& config, const ModelSpec& spec, const SplitSettings& sp,
                             const std::string& data) {
  json j = json::parse(config_to_json(config, spec));
  j["split"] = split_json(sp);
  j["data"] = data;
  return j.dump();
}

void write_epoch_csv(const fs::path& file, const std::vector<EpochLog>& log, const std::string& provenance) {
  require_parent_dir(file);
  std::ofstream out(file, std::ios::binary);
  out << "# config: " << provenance << '\n';
  out << "epoch,train_total";
  std::vector<std::string> names;
  if (!log.empty())
    for (const auto& c : log.front().train.components) names.push_back(c.name);
  for (const auto& n : names) out << ",train_" << n;
  const bool has_val = !log.empty() && log.front().val.has_value();
  if (has_val) {
    out << ",val_total";
    for (const auto& n : names) out << ",val_" << n;
  }
  out << ",improved\n";
  for (const auto& e : log) {
    out << e.epoch << ',' << format_real(e.train.total);
    for (const auto& n : names) out << ',' << format_real(e.train.get(n).value_or(0.0));
    if (has_val) {
      out << ',' << format_real(e.val->total);
      for (const auto& n : names) out << ',' << format_real(e.val->get(n).value_or(0.0));
    }
    out << ',' << (e.improved ? 1 : 0) << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + file.string());
}

int cmd_train(const TrainArgs& a) {
  require_file(a.data, "dataset");
  TrainConfig config;
  ModelSpec spec;
  SplitSettings sp;
  if (!a.config.empty()) {
    json cfg = read_json_file(a.config);
    if (cfg.contains("split")) {
      for (const auto& [key, value] : cfg["split"].items()) {
        if (key == "train_n") sp.train_n = value.get<std::size_t>();
        else if (key == "val_n") sp.val_n = value.get<std::size_t>();
        else if (key == "seed") sp.seed = value.get<std::uint64_t>();
        else throw UsageError("config: unknown key 'split." + key + "'");
      }
    }
    cfg.erase("split");
    cfg.erase("generate");
    cfg.erase("data");
    try {
      apply_config_json(cfg.dump(), config, spec);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  if (a.regime) {
    try {
      config.regime = parse_regime(*a.regime);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
  }
  override_with(a.train_n, sp.train_n);
  override_with(a.val_n, sp.val_n);
  override_with(a.split_seed, sp.seed);
  override_with(a.seed, config.seed);
  override_with(a.epochs, config.epochs);
  override_with(a.batch_size, config.batch_size);
  override_with(a.patience, config.patience);
  override_with(a.lr, config.learning_rate);
  override_with(a.min_delta, config.min_delta);
  override_with(a.w1, config.w1);
  override_with(a.w2, config.w2);
  override_with(a.clip_norm, config.clip_norm);
  try {
    config.validate();
    spec.validate();
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  RecordCollection data = load_records(a.data);
  if (data.generation) config.gamma = data.generation->params.gamma;
  split(data, sp.train_n, sp.seed, sp.val_n);

  const std::string provenance = effective_config(config, spec, sp, a.data);
  log::info("effective config: " + provenance);

  TrainResult result = train(data, config, spec, [&config](const EpochLog& e) {
    if (log::threshold() >= log::Level::info && (e.epoch == 1 || e.epoch % 100 == 0 || e.epoch == config.epochs)) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "epoch %zu loss %.6g", e.epoch, e.train.total);
      log::info(buf);
    }
  });
  result.checkpoint.metrics["split.train_n"] = static_cast<double>(sp.train_n);
  result.checkpoint.metrics["split.val_n"] = static_cast<double>(sp.val_n);
  result.checkpoint.metrics["split.seed"] = static_cast<double>(sp.seed);

  require_parent_dir(a.out_checkpoint);
  save_checkpoint(a.out_checkpoint, result.checkpoint);
  fs::path log_path = a.log_csv;
  if (log_path.empty()) {
    log_path = a.out_checkpoint;
    log_path.replace_extension(".epochs.csv");
  }
  write_epoch_csv(log_path, result.log, provenance);

  std::printf("epochs %zu best_epoch %zu best_loss %.6g%s\n", result.log.size(), result.best_epoch,
              result.best_loss, result.diverged ? " (diverged)" : "");
  std::printf("checkpoint %s\nepoch log %s\n", a.out_checkpoint.c_str(), log_path.c_str());
  return result.diverged ? kExitRuntime : kExitOk;
}

// ----------------------------------------------------------------- predict

struct PredictArgs {
  std::string checkpoint;
  std::string record;
  std::string out;
};

int cmd_predict(const PredictArgs& a) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.record, "record");
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  const GroundMotionRecord rec = read_record_csv(a.record);
  const StateTrajectory tr = predict(ck, rec.ag, rec.dt);

  GroundMotionRecord out;
  out.id = rec.id;
  out.dt = rec.dt;
  out.ag = rec.ag;
  out.x = tr.x;
  out.v = tr.v;
  out.a = tr.a;
  out.g = tr.g;
  require_parent_dir(a.out);
  write_record_csv(a.out, out);

  // Prepend provenance; the record reader skips '#' lines.
  std::ifstream in(a.out, std::ios::binary);
  std::stringstream body;
  body << in.rdbuf();
  in.close();
  json prov = json::parse(config_to_json(ck.config, ck.model.spec()));
  prov["checkpoint"] = a.checkpoint;
  prov["record"] = a.record;
  write_text(a.out, "# config: " + prov.dump() + "\n" + body.str());
  std::printf("wrote %zu predicted steps to %s\n", tr.x.size(), a.out.c_str());
  return kExitOk;
}

// ---------------------------------------------------------------- evaluate

struct EvaluateArgs {
  std::string checkpoint;
  std::string data;
  std::string split = "test";
  std::string report;
  std::string plots;
  double threshold = 0.9;
};

int cmd_evaluate(const EvaluateArgs& a) {
  require_file(a.checkpoint, "checkpoint");
  require_file(a.data, "dataset");
  if (a.split != "all") {
    try {
      parse_split(a.split);
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--split: ") + e.what());
    }
  }
  const Checkpoint ck = load_checkpoint(a.checkpoint);
  RecordCollection data = load_records(a.data);

  // Rebuild the split the checkpoint was trained with.
  const auto metric = [&ck](const char* k) -> std::optional<double> {
    const auto it = ck.metrics.find(k);
    return it == ck.metrics.end() ? std::nullopt : std::optional<double>(it->second);
  };
  if (const auto tn = metric("split.train_n")) {
    split(data, static_cast<std::size_t>(*tn), static_cast<std::uint64_t>(metric("split.seed").value_or(0.0)),
          static_cast<std::size_t>(metric("split.val_n").value_or(0.0)));
  }

  std::vector<const GroundMotionRecord*> records;
  if (a.split == "all") {
    for (const auto& r : data.records) records.push_back(&r);
  } else {
    records = data.take(parse_split(a.split));
  }
  if (records.empty()) throw UsageError("split '" + a.split + "' has no records");

  EvalReport report = evaluate_model(ck, records, a.threshold);
  report.dataset = a.data;
  report.split = a.split;

  if (!a.plots.empty()) {
    fs::create_directories(a.plots);
    for (const auto* r : records) {
      try {
        export_plot_data(predict(ck, r->ag, r->dt), trajectory_of(*r), a.plots, r->id);
      } catch (const std::exception& e) {
        log::warn("plot export skipped for " + r->id + ": " + e.what());
      }
    }
  }

  json j = json::parse(report.to_json());
  j["config"] = json::parse(config_to_json(ck.config, ck.model.spec()));
  j["config"]["checkpoint"] = a.checkpoint;
  write_text(a.report, j.dump(2) + "\n");

  for (const auto& [ch, s] : report.summary) {
    std::printf("%s: n=%zu mean=%.4f min=%.4f max=%.4f frac(r>%.2f)=%.3f\n", ch.c_str(), s.count, s.mean, s.min,
                s.max, a.threshold, s.fraction_above);
  }
  const auto flagged = report.flagged_ids();
  if (!flagged.empty()) std::printf("flagged records: %zu\n", flagged.size());
  std::printf("report %s\n", a.report.c_str());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Physics-informed U-Net/LSTM surrogate for seismic response"};
  app.require_subcommand(1, 1);
  app.set_version_flag("--version", "phyulstm 0.1.0");

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "Simulate a synthetic ground-motion dataset");
  g->add_option("--n", gen.n, "Number of records (default 100)");
  g->add_option("--duration", gen.duration, "Record length in seconds (default 50)");
  g->add_option("--dt", gen.dt, "Sample interval in seconds (default 0.05)");
  g->add_option("--intensity", gen.intensity, "Peak ground acceleration in m/s^2 (default 1)");
  g->add_option("--seed", gen.seed, "Ground-motion seed (default 0)");
  g->add_option("--params", gen.params, "Oscillator constants, e.g. m=1,c=1,k1=20,k2=200,gamma=1");
  g->add_option("--config", gen.config, "JSON config; its \"generate\" section supplies defaults")
      ->check(CLI::ExistingFile);
  g->add_option("--out", gen.out, "Output directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a surrogate on a dataset");
  t->add_option("--data", tr.data, "Dataset directory or manifest.json")->required();
  t->add_option("--regime", tr.regime, "full-state | accel-only | data-driven");
  t->add_option("--train-n", tr.train_n, "Records tagged train (default 10)");
  t->add_option("--val-n", tr.val_n, "Records tagged val (default 0: monitor training loss)");
  t->add_option("--split-seed", tr.split_seed, "Seed of the train/val/test assignment (default 0)");
  t->add_option("--seed", tr.seed, "Parameter initialization and shuffling seed");
  t->add_option("--epochs", tr.epochs, "Maximum epochs (default 5000)");
  t->add_option("--lr", tr.lr, "Adam learning rate (default 1e-3)");
  t->add_option("--batch-size", tr.batch_size, "Records per update, 0 for full batch");
  t->add_option("--patience", tr.patience, "Early-stopping patience in epochs (default 500)");
  t->add_option("--min-delta", tr.min_delta, "Minimum loss decrease counted as improvement");
  t->add_option("--w1", tr.w1, "Data-term weight");
  t->add_option("--w2", tr.w2, "Physics-term weight");
  t->add_option("--clip-norm", tr.clip_norm, "Global gradient-norm clip, 0 disables");
  t->add_option("--config", tr.config, "JSON config with \"train\", \"model\" and \"split\" sections")
      ->check(CLI::ExistingFile);
  t->add_option("--out-checkpoint", tr.out_checkpoint, "Checkpoint file to write")->required();
  t->add_option("--log", tr.log_csv, "Epoch-loss CSV (default <checkpoint>.epochs.csv)");

  PredictArgs pr;
  auto* p = app.add_subcommand("predict", "Predict the response to one record");
  p->add_option("--checkpoint", pr.checkpoint, "Trained checkpoint")->required();
  p->add_option("--record", pr.record, "Record CSV with t and ag columns")->required();
  p->add_option("--out", pr.out, "Output CSV (t,ag,x,v,a,g)")->required();

  EvaluateArgs ev;
  auto* e = app.add_subcommand("evaluate", "Correlate predictions with a labelled split");
  e->add_option("--checkpoint", ev.checkpoint, "Trained checkpoint")->required();
  e->add_option("--data", ev.data, "Dataset directory or manifest.json")->required();
  e->add_option("--split", ev.split, "train | val | test | all")->capture_default_str();
  e->add_option("--report", ev.report, "JSON report path")->required();
  e->add_option("--plots", ev.plots, "Directory for per-record history/hysteresis CSVs");
  e->add_option("--threshold", ev.threshold, "Correlation threshold")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (g->parsed()) return cmd_generate(gen);
    if (t->parsed()) return cmd_train(tr);
    if (p->parsed()) return cmd_predict(pr);
    if (e->parsed()) return cmd_evaluate(ev);
  } catch (const UsageError& err) {
    log::error(err.what());
    return kExitUsage;
  } catch (const std::exception& err) {
    log::error(err.what());
    return kExitRuntime;
  }
  return kExitUsage;
}
