#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phyulstm/dynamics.hpp"

namespace phyulstm {

enum class Split { train, val, test };

const char* to_string(Split s);
Split parse_split(std::string_view s);

/// Response channels a record may carry besides t and ag.
enum class Channel { x, v, a, g };

const char* to_string(Channel c);

/// One excitation series with optional measured response channels.
struct GroundMotionRecord {
  std::string id;
  double dt = 0.0;
  std::vector<double> ag;
  std::optional<std::vector<double>> x, v, a, g;
  Split split = Split::test;

  std::size_t size() const { return ag.size(); }
  bool has(Channel c) const { return channel(c) != nullptr; }
  const std::vector<double>* channel(Channel c) const;
  void validate() const;
};

/// Provenance stored in the manifest of generated collections.
struct GenerationInfo {
  std::size_t n_records = 0;
  double duration = 0.0;
  double intensity = 0.0;
  std::uint64_t seed = 0;
  OscillatorParams params;
  /// Spectral and envelope settings; duration/dt/seed/intensity unused.
  GroundMotionSpec motion;
};

/// A set of equally sampled records. Reads through `take()` are counted so
/// callers can audit which splits a pipeline touched.
class RecordCollection {
 public:
  std::vector<GroundMotionRecord> records;
  double dt = 0.0;
  std::optional<GenerationInfo> generation;
  std::optional<std::uint64_t> split_seed;

  /// Records carrying the given split tag, in collection order.
  std::vector<const GroundMotionRecord*> take(Split s) const;
  std::size_t count(Split s) const;

  /// Number of take()-reads per record id since the last reset.
  const std::map<std::string, std::size_t>& access_log() const { return access_; }
  void reset_access_log() const { access_.clear(); }

  const GroundMotionRecord& find(const std::string& id) const;

 private:
  mutable std::map<std::string, std::size_t> access_;
};

struct SyntheticDatasetSpec {
  std::size_t n_records = 100;
  double duration = 50.0;
  double dt = 0.05;
  double intensity = 1.0;
  std::uint64_t seed = 0;
  OscillatorParams params;
  GroundMotionSpec motion;  // duration/dt/seed/intensity are overridden per record
};

/// Record i uses ground-motion seed derived from (seed, i); full state stored.
RecordCollection generate_synthetic_dataset(const SyntheticDatasetSpec& spec);

/// Seeded uniform selection without replacement: n_train records tagged
/// train, then n_val tagged val, the remainder test.
void split(RecordCollection& collection, std::size_t n_train, std::uint64_t seed, std::size_t n_val = 0);

/// value_normalized = (value - offset) / scale.
struct ChannelScale {
  double scale = 1.0;
  double offset = 0.0;

  double apply(double v) const { return (v - offset) / scale; }
  double invert(double v) const { return v * scale + offset; }
};

/// Input scaling (peak |ag| of the training split) and output standardization.
struct Normalizer {
  ChannelScale ag;
  ChannelScale x, v, g;

  const ChannelScale& output(std::size_t i) const;

  std::vector<double> apply(const ChannelScale& s, std::span<const double> series) const;
  std::vector<double> invert(const ChannelScale& s, std::span<const double> series) const;
};

/// Fits on the given (training) records only. With state labels the output
/// channels are standardized; without them the scales are estimated from the
/// measured relative acceleration (dominant frequency from zero crossings).
Normalizer fit_normalizer(std::span<const GroundMotionRecord* const> train, bool use_state_labels,
                          double gamma = 1.0);

/// One CSV per record plus manifest.json inside `dir`.
void save_records(const std::filesystem::path& dir, const RecordCollection& collection);
/// Accepts the directory or the manifest file itself.
RecordCollection load_records(const std::filesystem::path& path);

/// Parses a single record CSV (header t,ag[,x,v,a,g] in any column order).
GroundMotionRecord read_record_csv(const std::filesystem::path& file, std::optional<double> expected_dt = {});
void write_record_csv(const std::filesystem::path& file, const GroundMotionRecord& record);

/// %.17g formatting used by every CSV writer.
std::string format_real(double v);

}  // namespace phyulstm
