#include "phyulstm/datasets.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "phyulstm/log.hpp"

namespace phyulstm {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

constexpr const char* kManifestName = "manifest.json";
constexpr const char* kManifestFormat = "phyulstm-records";
constexpr int kManifestVersion = 1;

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::string record_id(std::size_t i, std::size_t n) {
  std::size_t width = 3;
  for (std::size_t m = n; m >= 1000; m /= 10) ++width;
  std::string s = std::to_string(i);
  return "rec" + std::string(width > s.size() ? width - s.size() : 0, '0') + s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    cell.erase(0, cell.find_first_not_of(" \t\r"));
    cell.erase(cell.find_last_not_of(" \t\r") + 1);
    out.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_real(const std::string& s, const fs::path& file, std::size_t line) {
  double v = 0.0;
  const char* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw std::runtime_error(file.string() + ":" + std::to_string(line) + ": invalid number '" + s + "'");
  }
  return v;
}

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

ChannelScale standardize(const std::vector<double>& pooled, const char* name) {
  const double mean = mean_of(pooled);
  double var = 0.0;
  for (double x : pooled) var += (x - mean) * (x - mean);
  var = pooled.empty() ? 0.0 : var / static_cast<double>(pooled.size());
  if (!(var > 0.0)) {
    log::warn(std::string("fit_normalizer: channel ") + name + " has zero variance; scale set to 1");
    return {1.0, mean};
  }
  return {std::sqrt(var), mean};
}

}  // namespace

const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "test";
}

Split parse_split(std::string_view s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw std::invalid_argument("unknown split tag '" + std::string(s) + "'");
}

const char* to_string(Channel c) {
  switch (c) {
    case Channel::x: return "x";
    case Channel::v: return "v";
    case Channel::a: return "a";
    case Channel::g: return "g";
  }
  return "?";
}

const std::vector<double>* GroundMotionRecord::channel(Channel c) const {
  const std::optional<std::vector<double>>* slot = nullptr;
  switch (c) {
    case Channel::x: slot = &x; break;
    case Channel::v: slot = &v; break;
    case Channel::a: slot = &a; break;
    case Channel::g: slot = &g; break;
  }
  return slot->has_value() ? &**slot : nullptr;
}

void GroundMotionRecord::validate() const {
  if (!(dt > 0.0)) throw std::invalid_argument("record " + id + ": dt must be > 0");
  for (Channel c : {Channel::x, Channel::v, Channel::a, Channel::g}) {
    const auto* s = channel(c);
    if (s != nullptr && s->size() != ag.size()) {
      throw std::invalid_argument("record " + id + ": channel " + to_string(c) + " has " +
                                  std::to_string(s->size()) + " samples, ag has " +
                                  std::to_string(ag.size()));
    }
  }
}

std::vector<const GroundMotionRecord*> RecordCollection::take(Split s) const {
  std::vector<const GroundMotionRecord*> out;
  for (const auto& r : records) {
    if (r.split != s) continue;
    ++access_[r.id];
    out.push_back(&r);
  }
  return out;
}

std::size_t RecordCollection::count(Split s) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [s](const auto& r) { return r.split == s; }));
}

const GroundMotionRecord& RecordCollection::find(const std::string& id) const {
  for (const auto& r : records)
    if (r.id == id) return r;
  throw std::out_of_range("no record with id '" + id + "'");
}

RecordCollection generate_synthetic_dataset(const SyntheticDatasetSpec& spec) {
  spec.params.validate();
  RecordCollection out;
  out.dt = spec.dt;
  out.generation = GenerationInfo{spec.n_records, spec.duration, spec.intensity, spec.seed, spec.params, spec.motion};
  out.records.reserve(spec.n_records);
  for (std::size_t i = 0; i < spec.n_records; ++i) {
    GroundMotionSpec motion = spec.motion;
    motion.duration = spec.duration;
    motion.dt = spec.dt;
    motion.intensity = spec.intensity;
    motion.seed = splitmix64(spec.seed ^ splitmix64(i));
    std::vector<double> ag = generate_ground_motion(motion);
    StateTrajectory tr = simulate_response(ag, spec.params, spec.dt);
    GroundMotionRecord r;
    r.id = record_id(i, spec.n_records);
    r.dt = spec.dt;
    r.ag = std::move(tr.ag);
    r.x = std::move(tr.x);
    r.v = std::move(tr.v);
    r.a = std::move(tr.a);
    r.g = std::move(tr.g);
    out.records.push_back(std::move(r));
  }
  return out;
}

void split(RecordCollection& collection, std::size_t n_train, std::uint64_t seed, std::size_t n_val) {
  const std::size_t n = collection.records.size();
  if (n_train + n_val >= n && n > 0) {
    throw std::invalid_argument("split: n_train (" + std::to_string(n_train) + ") + n_val (" +
                                std::to_string(n_val) + ") must be smaller than the " +
                                std::to_string(n) + " available records");
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  for (auto& r : collection.records) r.split = Split::test;
  for (std::size_t k = 0; k < n_train; ++k) collection.records[order[k]].split = Split::train;
  for (std::size_t k = n_train; k < n_train + n_val; ++k) collection.records[order[k]].split = Split::val;
  collection.split_seed = seed;
}

const ChannelScale& Normalizer::output(std::size_t i) const {
  switch (i) {
    case 0: return x;
    case 1: return v;
    case 2: return g;
  }
  throw std::out_of_range("Normalizer::output: channel index " + std::to_string(i));
}

std::vector<double> Normalizer::apply(const ChannelScale& s, std::span<const double> series) const {
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) out[i] = s.apply(series[i]);
  return out;
}

std::vector<double> Normalizer::invert(const ChannelScale& s, std::span<const double> series) const {
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) out[i] = s.invert(series[i]);
  return out;
}

Normalizer fit_normalizer(std::span<const GroundMotionRecord* const> train, bool use_state_labels,
                          double gamma) {
  if (train.empty()) throw std::invalid_argument("fit_normalizer: training split is empty");
  Normalizer n;
  double peak = 0.0;
  for (const auto* r : train)
    for (double v : r->ag) peak = std::max(peak, std::abs(v));
  if (peak > 0.0) {
    n.ag = {peak, 0.0};
  } else {
    log::warn("fit_normalizer: training excitation is identically zero; ag scale set to 1");
  }

  if (use_state_labels) {
    std::vector<double> xs, vs, gs;
    for (const auto* r : train) {
      if (!r->x || !r->v || !r->g)
        throw std::invalid_argument("fit_normalizer: record " + r->id + " lacks x/v/g labels");
      xs.insert(xs.end(), r->x->begin(), r->x->end());
      vs.insert(vs.end(), r->v->begin(), r->v->end());
      gs.insert(gs.end(), r->g->begin(), r->g->end());
    }
    n.x = standardize(xs, "x");
    n.v = standardize(vs, "v");
    n.g = standardize(gs, "g");
    return n;
  }

  // Only the relative acceleration is measured. g = -a - gamma*ag is known
  // exactly; x and v scales follow a / omega^2 and a / omega with omega
  // estimated from the zero-crossing rate of a.
  std::vector<double> gs;
  double sum_sq = 0.0, duration = 0.0;
  std::size_t crossings = 0, count = 0;
  for (const auto* r : train) {
    if (!r->a) throw std::invalid_argument("fit_normalizer: record " + r->id + " lacks acceleration");
    const auto& a = *r->a;
    for (std::size_t i = 0; i < a.size(); ++i) {
      gs.push_back(-a[i] - gamma * r->ag[i]);
      sum_sq += a[i] * a[i];
      if (i > 0 && ((a[i - 1] < 0.0 && a[i] >= 0.0) || (a[i - 1] > 0.0 && a[i] <= 0.0))) ++crossings;
    }
    count += a.size();
    duration += r->dt * static_cast<double>(a.size() > 0 ? a.size() - 1 : 0);
  }
  n.g = standardize(gs, "g");
  const double a_rms = count > 0 ? std::sqrt(sum_sq / static_cast<double>(count)) : 0.0;
  const double omega = duration > 0.0 ? std::numbers::pi * static_cast<double>(crossings) / duration : 0.0;
  if (a_rms > 0.0 && omega > 0.0) {
    n.x = {a_rms / (omega * omega), 0.0};
    n.v = {a_rms / omega, 0.0};
  } else {
    log::warn("fit_normalizer: acceleration is degenerate; x/v scales set to 1");
  }
  return n;
}

std::string format_real(double v) {
  char buf[32];
  if (v == 0.0) v = 0.0;  // no "-0" in exports
  const int len = std::snprintf(buf, sizeof buf, "%.17g", v);
  return std::string(buf, static_cast<std::size_t>(len));
}

void write_record_csv(const fs::path& file, const GroundMotionRecord& record) {
  record.validate();
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  std::vector<std::pair<const char*, const std::vector<double>*>> cols{{"ag", &record.ag}};
  for (Channel c : {Channel::x, Channel::v, Channel::a, Channel::g})
    if (const auto* s = record.channel(c)) cols.emplace_back(to_string(c), s);
  out << "t";
  for (const auto& [name, _] : cols) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < record.size(); ++i) {
    out << format_real(static_cast<double>(i) * record.dt);
    for (const auto& [_, s] : cols) out << ',' << format_real((*s)[i]);
    out << '\n';
  }
  if (!out) throw std::runtime_error("write failed for " + file.string());
}

GroundMotionRecord read_record_csv(const fs::path& file, std::optional<double> expected_dt) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + file.string());
  std::string line;
  std::size_t lineno = 0;
  // Leading '#' lines carry provenance and are skipped.
  do {
    if (!std::getline(in, line)) throw std::runtime_error(file.string() + ": no header line");
    ++lineno;
  } while (line.starts_with('#'));
  const std::vector<std::string> header = split_csv_line(line);

  int col_t = -1, col_ag = -1;
  std::map<Channel, int> col_ch;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string& h = header[i];
    const int idx = static_cast<int>(i);
    if (h == "t") col_t = idx;
    else if (h == "ag") col_ag = idx;
    else if (h == "x") col_ch[Channel::x] = idx;
    else if (h == "v") col_ch[Channel::v] = idx;
    else if (h == "a") col_ch[Channel::a] = idx;
    else if (h == "g") col_ch[Channel::g] = idx;
    else
      throw std::runtime_error(file.string() + ":" + std::to_string(lineno) + ": unknown column '" + h + "'");
  }
  if (col_t < 0 || col_ag < 0)
    throw std::runtime_error(file.string() + ":" + std::to_string(lineno) +
                             ": missing required column(s) t and/or ag");

  std::vector<double> t, ag;
  std::map<Channel, std::vector<double>> ch;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r" || line.starts_with('#')) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error(file.string() + ":" + std::to_string(lineno) + ": expected " +
                               std::to_string(header.size()) + " columns, found " +
                               std::to_string(cells.size()));
    }
    t.push_back(parse_real(cells[static_cast<std::size_t>(col_t)], file, lineno));
    ag.push_back(parse_real(cells[static_cast<std::size_t>(col_ag)], file, lineno));
    for (const auto& [c, idx] : col_ch)
      ch[c].push_back(parse_real(cells[static_cast<std::size_t>(idx)], file, lineno));
  }
  if (t.size() < 2) throw std::runtime_error(file.string() + ": need at least two samples");

  const double dt = expected_dt.value_or(t[1] - t[0]);
  if (!(dt > 0.0)) throw std::runtime_error(file.string() + ": non-increasing time stamps");
  const double tol = 1e-9 * dt;
  for (std::size_t i = 1; i < t.size(); ++i) {
    if (std::abs((t[i] - t[i - 1]) - dt) > tol) {
      throw std::runtime_error(file.string() + ":" + std::to_string(i + 2) +
                               ": non-uniform time step (expected dt = " + format_real(dt) + ")");
    }
  }

  GroundMotionRecord r;
  r.id = file.stem().string();
  r.dt = dt;
  r.ag = std::move(ag);
  for (auto& [c, s] : ch) {
    switch (c) {
      case Channel::x: r.x = std::move(s); break;
      case Channel::v: r.v = std::move(s); break;
      case Channel::a: r.a = std::move(s); break;
      case Channel::g: r.g = std::move(s); break;
    }
  }
  return r;
}

void save_records(const fs::path& dir, const RecordCollection& collection) {
  fs::create_directories(dir);
  json manifest;
  manifest["format"] = kManifestFormat;
  manifest["version"] = kManifestVersion;
  manifest["dt"] = collection.dt;
  manifest["units"] = {{"t", "s"}, {"ag", "m/s^2"}, {"x", "m"}, {"v", "m/s"}, {"a", "m/s^2"}, {"g", "m/s^2"}};
  if (collection.generation) {
    const auto& g = *collection.generation;
    manifest["generation"] = {{"n_records", g.n_records},
                              {"duration", g.duration},
                              {"intensity", g.intensity},
                              {"seed", g.seed},
                              {"params",
                               {{"m", g.params.m},
                                {"c", g.params.c},
                                {"k1", g.params.k1},
                                {"k2", g.params.k2},
                                {"gamma", g.params.gamma}}},
                              {"excitation",
                               {{"min_center_hz", g.motion.min_center_hz},
                                {"max_center_hz", g.motion.max_center_hz},
                                {"quality", g.motion.quality},
                                {"corner_hz", g.motion.corner_hz},
                                {"rise", g.motion.rise},
                                {"hold", g.motion.hold}}}};
  }
  if (collection.split_seed) manifest["split_seed"] = *collection.split_seed;
  json recs = json::array();
  for (const auto& r : collection.records) {
    if (std::abs(r.dt - collection.dt) > 1e-9 * collection.dt)
      throw std::invalid_argument("save_records: record " + r.id + " dt differs from collection dt");
    const std::string file = r.id + ".csv";
    write_record_csv(dir / file, r);
    json channels = json::array({"t", "ag"});
    for (Channel c : {Channel::x, Channel::v, Channel::a, Channel::g})
      if (r.has(c)) channels.push_back(to_string(c));
    recs.push_back({{"id", r.id}, {"file", file}, {"split", to_string(r.split)},
                    {"samples", r.size()}, {"channels", channels}});
  }
  manifest["records"] = recs;
  std::ofstream out(dir / kManifestName, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + (dir / kManifestName).string());
  out << manifest.dump(2) << '\n';
}

RecordCollection load_records(const fs::path& path) {
  const fs::path manifest_path = fs::is_directory(path) ? path / kManifestName : path;
  const fs::path dir = manifest_path.parent_path();
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open manifest " + manifest_path.string());
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error(manifest_path.string() + ": " + e.what());
  }
  try {
    if (m.at("format").get<std::string>() != kManifestFormat)
      throw std::runtime_error(manifest_path.string() + ": not a record manifest");
    if (m.at("version").get<int>() != kManifestVersion)
      throw std::runtime_error(manifest_path.string() + ": unsupported manifest version " +
                               std::to_string(m.at("version").get<int>()));
    RecordCollection c;
    c.dt = m.at("dt").get<double>();
    if (!(c.dt > 0.0)) throw std::runtime_error(manifest_path.string() + ": dt must be > 0");
    if (m.contains("generation")) {
      const auto& g = m["generation"];
      GenerationInfo info;
      info.n_records = g.at("n_records").get<std::size_t>();
      info.duration = g.at("duration").get<double>();
      info.intensity = g.at("intensity").get<double>();
      info.seed = g.at("seed").get<std::uint64_t>();
      const auto& p = g.at("params");
      info.params = {p.at("m").get<double>(), p.at("c").get<double>(), p.at("k1").get<double>(),
                     p.at("k2").get<double>(), p.at("gamma").get<double>()};
      if (g.contains("excitation")) {
        const auto& e = g["excitation"];
        info.motion.min_center_hz = e.at("min_center_hz").get<double>();
        info.motion.max_center_hz = e.at("max_center_hz").get<double>();
        info.motion.quality = e.at("quality").get<double>();
        info.motion.corner_hz = e.at("corner_hz").get<double>();
        info.motion.rise = e.at("rise").get<double>();
        info.motion.hold = e.at("hold").get<double>();
      }
      c.generation = info;
    }
    if (m.contains("split_seed")) c.split_seed = m["split_seed"].get<std::uint64_t>();
    for (const auto& entry : m.at("records")) {
      GroundMotionRecord r = read_record_csv(dir / entry.at("file").get<std::string>(), c.dt);
      r.id = entry.at("id").get<std::string>();
      r.split = parse_split(entry.value("split", std::string("test")));
      r.validate();
      c.records.push_back(std::move(r));
    }
    return c;
  } catch (const json::exception& e) {
    throw std::runtime_error(manifest_path.string() + ": malformed manifest: " + e.what());
  }
}

}  // namespace phyulstm
