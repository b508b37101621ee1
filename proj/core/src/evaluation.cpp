#include "phyulstm/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "json.hpp"

namespace phyulstm {

double pearson_r(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size())
    throw std::invalid_argument("pearson_r: lengths differ (" + std::to_string(u.size()) + " vs " +
                                std::to_string(v.size()) + ")");
  const std::size_t n = u.size();
  if (n < 2) throw std::invalid_argument("pearson_r: need at least 2 samples");
  double mu = 0.0, mv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(u[i]) || !std::isfinite(v[i])) throw std::invalid_argument("pearson_r: non-finite sample");
    mu += u[i];
    mv += v[i];
  }
  mu /= static_cast<double>(n);
  mv /= static_cast<double>(n);
  double suv = 0.0, suu = 0.0, svv = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double du = u[i] - mu, dv = v[i] - mv;
    suv += du * dv;
    suu += du * du;
    svv += dv * dv;
  }
  if (suu == 0.0 && svv == 0.0) throw std::invalid_argument("pearson_r: both series are constant");
  if (suu == 0.0 || svv == 0.0) return 0.0;
  return std::clamp(suv / std::sqrt(suu * svv), -1.0, 1.0);
}

std::vector<std::string> EvalReport::flagged_ids() const {
  std::vector<std::string> out;
  for (const auto& r : records)
    if (r.flagged()) out.push_back(r.id);
  return out;
}

void EvalReport::summarize() {
  summary.clear();
  for (const char* ch : kEvalChannels) {
    ChannelSummary s;
    double sum = 0.0;
    std::size_t above = 0;
    for (const auto& rec : records) {
      auto it = rec.r.find(ch);
      if (it == rec.r.end()) continue;
      const double r = it->second;
      s.max = s.count == 0 ? r : std::max(s.max, r);
      s.min = s.count == 0 ? r : std::min(s.min, r);
      sum += r;
      above += r > threshold ? 1 : 0;
      ++s.count;
    }
    if (s.count == 0) continue;
    s.mean = sum / static_cast<double>(s.count);
    s.fraction_above = static_cast<double>(above) / static_cast<double>(s.count);
    summary[ch] = s;
  }
}

std::string EvalReport::to_json() const {
  using nlohmann::json;
  json recs = json::array();
  for (const auto& r : records) recs.push_back({{"id", r.id}, {"r", r.r}, {"flags", r.flags}});
  json sum = json::object();
  for (const auto& [ch, s] : summary) {
    sum[ch] = {{"count", s.count},
               {"max", s.max},
               {"min", s.min},
               {"mean", s.mean},
               {"fraction_above_threshold", s.fraction_above}};
  }
  json j{{"schema_version", kSchemaVersion},
         {"regime", regime},
         {"dataset", dataset},
         {"split", split},
         {"threshold", threshold},
         {"summary", sum},
         {"flagged", flagged_ids()},
         {"records", recs}};
  return j.dump(2);
}

StateTrajectory trajectory_of(const GroundMotionRecord& record) {
  StateTrajectory tr;
  tr.dt = record.dt;
  tr.ag = record.ag;
  tr.t.resize(record.size());
  for (std::size_t i = 0; i < tr.t.size(); ++i) tr.t[i] = static_cast<double>(i) * record.dt;
  if (record.x) tr.x = *record.x;
  if (record.v) tr.v = *record.v;
  if (record.a) tr.a = *record.a;
  if (record.g) tr.g = *record.g;
  return tr;
}

EvalReport evaluate_predictions(std::span<const GroundMotionRecord* const> records, const Predictor& predictor,
                                double threshold) {
  if (records.empty()) throw std::invalid_argument("evaluate: no records to evaluate");
  EvalReport report;
  report.threshold = threshold;
  report.records.resize(records.size());

  for (std::size_t i = 0; i < records.size(); ++i) {
    const GroundMotionRecord& rec = *records[i];
    RecordEval& out = report.records[i];
    out.id = rec.id;
    StateTrajectory pred;
    try {
      pred = predictor(rec);
    } catch (const std::exception& e) {
      out.flags.push_back(std::string("prediction failed: ") + e.what());
      continue;
    }
    const std::pair<const char*, std::pair<const std::optional<std::vector<double>>*, const std::vector<double>*>>
        channels[] = {{"x", {&rec.x, &pred.x}}, {"v", {&rec.v, &pred.v}}, {"g", {&rec.g, &pred.g}}};
    for (const auto& [name, series] : channels) {
      const auto& [truth, predicted] = series;
      if (!truth->has_value()) continue;
      try {
        const double r = pearson_r(**truth, *predicted);
        const bool degenerate = std::all_of(predicted->begin(), predicted->end(),
                                            [&](double p) { return p == predicted->front(); });
        if (degenerate) {
          out.flags.push_back(std::string(name) + ": constant prediction");
          continue;
        }
        out.r[name] = r;
      } catch (const std::exception& e) {
        out.flags.push_back(std::string(name) + ": " + e.what());
      }
    }
  }
  report.summarize();
  return report;
}

EvalReport evaluate_model(const Checkpoint& model, std::span<const GroundMotionRecord* const> records,
                          double threshold) {
  EvalReport report = evaluate_predictions(
      records, [&](const GroundMotionRecord& r) { return predict(model, r.ag, r.dt); }, threshold);
  report.regime = to_string(model.regime);
  return report;
}

namespace {

std::ofstream open_csv(const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  return out;
}

double at_or_nan(const std::vector<double>& s, std::size_t i) {
  return i < s.size() ? s[i] : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

PlotFiles export_plot_data(const StateTrajectory& pred, const StateTrajectory& truth,
                           const std::filesystem::path& dir, const std::string& stem) {
  const std::size_t n = pred.x.size();
  if (truth.x.size() != n && !truth.x.empty())
    throw std::invalid_argument("export_plot_data: truth has " + std::to_string(truth.x.size()) +
                                " samples, prediction " + std::to_string(n));
  if (!dir.empty()) std::filesystem::create_directories(dir);
  PlotFiles files{dir / (stem + "_history.csv"), dir / (stem + "_hysteresis.csv")};

  auto f = [](double v) { return format_real(v); };
  {
    std::ofstream out = open_csv(files.history);
    out << "t,ag,x_true,x_pred,v_true,v_pred,a_true,a_pred,g_true,g_pred\n";
    for (std::size_t i = 0; i < n; ++i) {
      out << f(at_or_nan(pred.t, i)) << ',' << f(at_or_nan(pred.ag, i)) << ',' << f(at_or_nan(truth.x, i)) << ','
          << f(pred.x[i]) << ',' << f(at_or_nan(truth.v, i)) << ',' << f(at_or_nan(pred.v, i)) << ','
          << f(at_or_nan(truth.a, i)) << ',' << f(at_or_nan(pred.a, i)) << ',' << f(at_or_nan(truth.g, i)) << ','
          << f(at_or_nan(pred.g, i)) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + files.history.string());
  }
  {
    std::ofstream out = open_csv(files.hysteresis);
    out << "x_true,v_true,g_true,x_pred,v_pred,g_pred\n";
    for (std::size_t i = 0; i < n; ++i) {
      out << f(at_or_nan(truth.x, i)) << ',' << f(at_or_nan(truth.v, i)) << ',' << f(at_or_nan(truth.g, i)) << ','
          << f(pred.x[i]) << ',' << f(at_or_nan(pred.v, i)) << ',' << f(at_or_nan(pred.g, i)) << '\n';
    }
    if (!out) throw std::runtime_error("write failed: " + files.hysteresis.string());
  }
  return files;
}

}  // namespace phyulstm
