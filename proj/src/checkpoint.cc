#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

#include "sqdr/error.h"
#include "sqdr/vad_model.h"

namespace sqdr {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'S', 'Q', 'D', 'R'};

class Writer {
 public:
  template <typename T>
  void Put(T v) {
    char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    bytes_.append(buf, sizeof(T));
  }
  void PutString(const std::string& s) {
    Put<uint32_t>(static_cast<uint32_t>(s.size()));
    bytes_ += s;
  }
  void PutDoubles(std::span<const double> v) {
    bytes_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(double));
  }
  void PutRaw(const char* p, size_t n) { bytes_.append(p, n); }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  Reader(std::string bytes, std::string where)
      : bytes_(std::move(bytes)), where_(std::move(where)) {}

  void Need(size_t n) const {
    if (pos_ + n > bytes_.size()) {
      throw Error(ErrorKind::kTruncatedFile,
                  where_ + ": needs " + std::to_string(n) + " bytes at offset " +
                      std::to_string(pos_) + ", file has " + std::to_string(bytes_.size()));
    }
  }
  template <typename T>
  T Get() {
    Need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string GetString() {
    const auto n = Get<uint32_t>();
    Need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void GetDoubles(std::span<double> out) {
    Need(out.size() * sizeof(double));
    std::memcpy(out.data(), bytes_.data() + pos_, out.size() * sizeof(double));
    pos_ += out.size() * sizeof(double);
  }
  bool AtEnd() const { return pos_ == bytes_.size(); }
  const std::string& where() const { return where_; }

 private:
  std::string bytes_;
  std::string where_;
  size_t pos_ = 0;
};

std::string FormatDouble(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

ModelConfig ReadHeader(Reader& in) {
  in.Need(4);
  char magic[4];
  for (char& c : magic) c = in.Get<char>();
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw Error(ErrorKind::kBadMagic, in.where() + ": not an SQDR checkpoint");
  }
  const auto version = in.Get<uint32_t>();
  if (version != kCheckpointVersion) {
    throw Error(ErrorKind::kVersionMismatch,
                in.where() + ": version " + std::to_string(version) + ", expected " +
                    std::to_string(kCheckpointVersion));
  }
  return ParseConfigRecord(in.GetString());
}

CheckpointMeta ReadBody(Reader& in, Model& model, bool* has_momentum) {
  auto slots = model.Slots();
  const auto n_sections = in.Get<uint32_t>();
  if (n_sections != slots.size()) {
    throw Error(ErrorKind::kInvalidConfig,
                in.where() + ": " + std::to_string(n_sections) + " sections, model has " +
                    std::to_string(slots.size()));
  }
  for (ParamSlot* slot : slots) {
    const std::string name = in.GetString();
    const auto kind = in.Get<uint8_t>();
    const auto rank = in.Get<uint32_t>();
    std::vector<size_t> shape(rank);
    for (auto& d : shape) d = static_cast<size_t>(in.Get<uint64_t>());
    if (name != slot->name || shape != slot->value.shape() ||
        (kind == 0) != slot->learnable) {
      throw Error(ErrorKind::kInvalidConfig,
                  in.where() + ": section '" + name + "' does not match model slot '" +
                      slot->name + "' " + slot->value.ShapeString());
    }
    in.GetDoubles(slot->value.data());
  }
  const bool momentum = in.Get<uint8_t>() != 0;
  if (has_momentum) *has_momentum = momentum;
  for (ParamSlot* slot : slots) {
    slot->grad.Fill(0.0);
    slot->momentum.Fill(0.0);
    if (momentum && slot->learnable) in.GetDoubles(slot->momentum.data());
  }
  CheckpointMeta meta;
  meta.epoch = in.Get<uint64_t>();
  meta.seed = in.Get<uint64_t>();
  if (!in.AtEnd()) {
    throw Error(ErrorKind::kInvalidConfig, in.where() + ": trailing bytes after metadata");
  }
  return meta;
}

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

}  // namespace

std::string SerializeConfig(const ModelConfig& c) {
  std::ostringstream s;
  s << "channels=" << c.channels << '\n'
    << "n_encoders=" << c.n_encoders << '\n'
    << "patch=" << c.patch << '\n'
    << "groups=" << c.groups << '\n'
    << "n_filters=" << c.frontend.n_filters << '\n'
    << "half_len=" << c.frontend.half_len << '\n'
    << "frame_len=" << c.frontend.frame_len << '\n'
    << "hop_len=" << c.frontend.hop_len << '\n'
    << "sample_rate=" << c.frontend.sample_rate << '\n'
    << "log_floor=" << FormatDouble(c.frontend.log_floor) << '\n';
  return s.str();
}

ModelConfig ParseConfigRecord(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorKind::kInvalidConfig, "config record line without '=': " + line);
    }
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto take = [&](const char* key) {
    auto it = kv.find(key);
    if (it == kv.end()) {
      throw Error(ErrorKind::kInvalidConfig, std::string("config record misses ") + key);
    }
    std::string v = it->second;
    kv.erase(it);
    return v;
  };
  ModelConfig c;
  try {
    c.channels = std::stoi(take("channels"));
    c.n_encoders = std::stoi(take("n_encoders"));
    c.patch = std::stoi(take("patch"));
    c.groups = std::stoi(take("groups"));
    c.frontend.n_filters = std::stoi(take("n_filters"));
    c.frontend.half_len = std::stoi(take("half_len"));
    c.frontend.frame_len = std::stoi(take("frame_len"));
    c.frontend.hop_len = std::stoi(take("hop_len"));
    c.frontend.sample_rate = std::stoi(take("sample_rate"));
    c.frontend.log_floor = std::stod(take("log_floor"));
  } catch (const std::logic_error&) {
    throw Error(ErrorKind::kInvalidConfig, "malformed number in config record");
  }
  if (!kv.empty()) {
    throw Error(ErrorKind::kInvalidConfig, "unknown config record key " + kv.begin()->first);
  }
  c.Validate();
  return c;
}

void SaveCheckpoint(const Model& model, const std::filesystem::path& path,
                    const CheckpointMeta& meta, bool with_momentum) {
  Writer out;
  out.PutRaw(kMagic, 4);
  out.Put<uint32_t>(kCheckpointVersion);
  out.PutString(SerializeConfig(model.config()));
  const auto slots = model.Slots();
  out.Put<uint32_t>(static_cast<uint32_t>(slots.size()));
  for (const ParamSlot* slot : slots) {
    out.PutString(slot->name);
    out.Put<uint8_t>(slot->learnable ? 0 : 1);
    out.Put<uint32_t>(static_cast<uint32_t>(slot->value.rank()));
    for (size_t d : slot->value.shape()) out.Put<uint64_t>(d);
    out.PutDoubles(slot->value.data());
  }
  out.Put<uint8_t>(with_momentum ? 1 : 0);
  if (with_momentum) {
    for (const ParamSlot* slot : slots) {
      if (slot->learnable) out.PutDoubles(slot->momentum.data());
    }
  }
  out.Put<uint64_t>(meta.epoch);
  out.Put<uint64_t>(meta.seed);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  f.write(out.bytes().data(), static_cast<std::streamsize>(out.bytes().size()));
  if (!f) throw Error(ErrorKind::kIo, "short write to " + path.string());
}

LoadedCheckpoint LoadCheckpoint(const std::filesystem::path& path) {
  Reader in(ReadFile(path), path.string());
  LoadedCheckpoint out{Model(ReadHeader(in)), {}, false};
  out.meta = ReadBody(in, out.model, &out.has_momentum);
  return out;
}

CheckpointMeta LoadCheckpointInto(Model& model, const std::filesystem::path& path) {
  Reader in(ReadFile(path), path.string());
  const ModelConfig stored = ReadHeader(in);
  if (!(stored == model.config())) {
    throw Error(ErrorKind::kInvalidConfig,
                path.string() + ": stored config differs from the target model");
  }
  Model staged(stored);
  const CheckpointMeta meta = ReadBody(in, staged, nullptr);
  model = std::move(staged);
  return meta;
}

}  // namespace sqdr
