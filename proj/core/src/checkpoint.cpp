#include "phyulstm/checkpoint.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <cmath>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>

#include "serialization.hpp"

namespace phyulstm {

namespace detail {

json to_json(const ModelSpec& spec) {
  const UNetPlan& u = spec.unet;
  return {{"unet",
           {{"in_channels", u.in_channels},
            {"encoder_filters", u.encoder_filters},
            {"bottleneck_filters", u.bottleneck_filters},
            {"decoder_filters", u.decoder_filters},
            {"kernel", u.kernel},
            {"pool", u.pool},
            {"out_channels", u.out_channels}}},
          {"lstm_units", spec.lstm_units},
          {"dense_units", spec.dense_units},
          {"batch_norm", {{"momentum", spec.batch_norm.momentum}, {"epsilon", spec.batch_norm.epsilon}}}};
}

namespace {

template <class T>
void take(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

void reject_unknown(const json& j, std::initializer_list<const char*> known, const char* where) {
  if (!j.is_object()) throw std::invalid_argument(std::string(where) + " must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument(std::string("unknown key '") + key + "' in " + where);
  }
}

}  // namespace

ModelSpec model_spec_from_json(const json& j, ModelSpec base) {
  reject_unknown(j, {"unet", "lstm_units", "dense_units", "batch_norm"}, "model");
  if (j.contains("unet")) {
    const json& u = j.at("unet");
    reject_unknown(u,
                   {"in_channels", "encoder_filters", "bottleneck_filters", "decoder_filters", "kernel", "pool",
                    "out_channels"},
                   "model.unet");
    take(u, "in_channels", base.unet.in_channels);
    take(u, "encoder_filters", base.unet.encoder_filters);
    take(u, "bottleneck_filters", base.unet.bottleneck_filters);
    take(u, "decoder_filters", base.unet.decoder_filters);
    take(u, "kernel", base.unet.kernel);
    take(u, "pool", base.unet.pool);
    take(u, "out_channels", base.unet.out_channels);
  }
  take(j, "lstm_units", base.lstm_units);
  take(j, "dense_units", base.dense_units);
  if (j.contains("batch_norm")) {
    const json& b = j.at("batch_norm");
    reject_unknown(b, {"momentum", "epsilon"}, "model.batch_norm");
    take(b, "momentum", base.batch_norm.momentum);
    take(b, "epsilon", base.batch_norm.epsilon);
  }
  return base;
}

json to_json(const TrainConfig& c) {
  return {{"regime", to_string(c.regime)},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"adam_epsilon", c.adam_epsilon},
          {"batch_size", c.batch_size},
          {"patience", c.patience},
          {"min_delta", c.min_delta},
          {"seed", c.seed},
          {"w1", c.w1},
          {"w2", c.w2},
          {"gamma", c.gamma},
          {"clip_norm", c.clip_norm}};
}

TrainConfig train_config_from_json(const json& j, TrainConfig base) {
  reject_unknown(j,
                 {"regime", "epochs", "learning_rate", "beta1", "beta2", "adam_epsilon", "batch_size", "patience",
                  "min_delta", "seed", "w1", "w2", "gamma", "clip_norm"},
                 "train");
  if (j.contains("regime")) base.regime = parse_regime(j.at("regime").get<std::string>());
  take(j, "epochs", base.epochs);
  take(j, "learning_rate", base.learning_rate);
  take(j, "beta1", base.beta1);
  take(j, "beta2", base.beta2);
  take(j, "adam_epsilon", base.adam_epsilon);
  take(j, "batch_size", base.batch_size);
  take(j, "patience", base.patience);
  take(j, "min_delta", base.min_delta);
  take(j, "seed", base.seed);
  take(j, "w1", base.w1);
  take(j, "w2", base.w2);
  take(j, "gamma", base.gamma);
  take(j, "clip_norm", base.clip_norm);
  return base;
}

json to_json(const Normalizer& n) {
  auto ch = [](const ChannelScale& s) { return json{{"scale", s.scale}, {"offset", s.offset}}; };
  return {{"ag", ch(n.ag)}, {"x", ch(n.x)}, {"v", ch(n.v)}, {"g", ch(n.g)}};
}

Normalizer normalizer_from_json(const json& j) {
  auto ch = [&](const char* key) {
    if (!j.contains(key)) throw std::runtime_error(std::string("checkpoint: normalizer lacks channel '") + key + "'");
    const json& c = j.at(key);
    ChannelScale s{c.at("scale").get<double>(), c.at("offset").get<double>()};
    if (!(s.scale != 0.0) || !std::isfinite(s.scale) || !std::isfinite(s.offset))
      throw std::runtime_error(std::string("checkpoint: invalid scale for normalizer channel '") + key + "'");
    return s;
  };
  return {ch("ag"), ch("x"), ch("v"), ch("g")};
}

}  // namespace detail

namespace {

constexpr std::array<char, 8> kMagic{'P', 'H', 'Y', 'U', 'L', 'S', 'T', 'M'};

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

void put_u64(std::ostream& out, std::uint64_t v) {
  std::array<char, 8> b{};
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(b.data(), 8);
}

std::uint64_t get_u64(const unsigned char* b) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void put_doubles(std::ostream& out, std::span<const double> data) {
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size() * 8));
  } else {
    for (double d : data) put_u64(out, std::bit_cast<std::uint64_t>(d));
  }
}

void get_doubles(const unsigned char* src, std::span<double> dst) {
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(dst.data(), src, dst.size() * 8);
  } else {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::bit_cast<double>(get_u64(src + 8 * i));
  }
}

template <class T>
T field(const detail::json& j, const char* key) {
  if (!j.contains(key)) throw std::runtime_error(std::string("checkpoint: missing header field '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const detail::json::exception&) {
    throw std::runtime_error(std::string("checkpoint: header field '") + key + "' has the wrong type");
  }
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
  detail::json params = detail::json::array();
  std::uint64_t offset = 0;
  for (const Parameter* p : ck.model.parameters()) {
    const Shape s = p->value.shape();
    params.push_back({{"name", p->name},
                      {"shape", {s.batch, s.time, s.channels}},
                      {"offset", offset},
                      {"trainable", p->trainable}});
    offset += p->value.size() * 8;
  }
  detail::json header{{"format_version", Checkpoint::kFormatVersion},
                      {"payload_bytes", offset},
                      {"parameters", params},
                      {"model", detail::to_json(ck.model.spec())},
                      {"normalizer", detail::to_json(ck.normalizer)},
                      {"regime", to_string(ck.regime)},
                      {"dt", ck.dt},
                      {"steps", ck.steps},
                      {"gamma", ck.config.gamma},
                      {"seed", ck.config.seed},
                      {"config", detail::to_json(ck.config)},
                      {"metrics", ck.metrics}};
  const std::string text = header.dump();
  out.write(kMagic.data(), kMagic.size());
  put_u64(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (const Parameter* p : ck.model.parameters()) put_doubles(out, p->value.data());
  if (!out) throw std::runtime_error("checkpoint: write failed");
}

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ck) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("checkpoint: cannot open " + file.string() + " for writing");
  write_checkpoint(out, ck);
}

Checkpoint read_checkpoint(std::istream& in) {
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const auto* raw = reinterpret_cast<const unsigned char*>(bytes.data());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0)
    throw std::runtime_error("checkpoint: bad magic, not a phyulstm checkpoint");
  const std::uint64_t header_len = get_u64(raw + 8);
  if (header_len > bytes.size() - 16)
    throw std::runtime_error("checkpoint: header length " + std::to_string(header_len) + " exceeds file size " +
                             std::to_string(bytes.size()));

  detail::json header;
  try {
    header = detail::json::parse(bytes.substr(16, header_len));
  } catch (const detail::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: malformed header: ") + e.what());
  }
  const int version = field<int>(header, "format_version");
  if (version != Checkpoint::kFormatVersion)
    throw std::runtime_error("checkpoint: unsupported format_version " + std::to_string(version) + " (expected " +
                             std::to_string(Checkpoint::kFormatVersion) + ")");

  const std::uint64_t payload_bytes = field<std::uint64_t>(header, "payload_bytes");
  const std::uint64_t actual = bytes.size() - 16 - header_len;
  if (payload_bytes != actual)
    throw std::runtime_error("checkpoint: payload is " + std::to_string(actual) + " bytes, header declares " +
                             std::to_string(payload_bytes));

  Checkpoint ck;
  try {
    ck.config = detail::train_config_from_json(field<detail::json>(header, "config"));
    ck.model = Surrogate(detail::model_spec_from_json(field<detail::json>(header, "model")));
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  } catch (const detail::json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }
  ck.normalizer = detail::normalizer_from_json(field<detail::json>(header, "normalizer"));
  ck.regime = parse_regime(field<std::string>(header, "regime"));
  ck.dt = field<double>(header, "dt");
  ck.steps = field<std::size_t>(header, "steps");
  ck.metrics = field<std::map<std::string, double>>(header, "metrics");

  const auto entries = field<detail::json>(header, "parameters");
  auto params = ck.model.parameters();
  if (entries.size() != params.size())
    throw std::runtime_error("checkpoint: " + std::to_string(entries.size()) + " parameters stored, model has " +
                             std::to_string(params.size()));
  const unsigned char* payload = raw + 16 + header_len;
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    const auto& e = entries[i];
    const auto name = field<std::string>(e, "name");
    if (name != p.name)
      throw std::runtime_error("checkpoint: parameter " + std::to_string(i) + " is '" + name + "', expected '" +
                               p.name + "'");
    const auto dims = field<std::vector<std::size_t>>(e, "shape");
    const Shape want = p.value.shape();
    if (dims.size() != 3 || Shape{dims[0], dims[1], dims[2]} != want) {
      std::string got;
      for (std::size_t d : dims) got += (got.empty() ? "" : ",") + std::to_string(d);
      throw std::runtime_error("checkpoint: parameter '" + name + "' has shape (" + got + "), expected " +
                               want.to_string());
    }
    const auto offset = field<std::uint64_t>(e, "offset");
    if (offset + p.value.size() * 8 > payload_bytes)
      throw std::runtime_error("checkpoint: parameter '" + name + "' extends past the payload");
    get_doubles(payload + offset, p.value.data());
    p.trainable = field<bool>(e, "trainable");
    p.zero_grad();
  }
  return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("checkpoint: cannot open " + file.string());
  return read_checkpoint(in);
}

}  // namespace phyulstm
