#include "dq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "dq/json_io.hpp"
#include "dq/util.hpp"

namespace dq {

using nlohmann::json;

namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'D', '2', 'Q', 'C'};

template <class T>
void put(std::string& out, T value) {
  char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  out.append(buf, sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  template <class T>
  T get() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string take(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string checkpoint_bytes(const Predictor& p, const CheckpointOptions& options) {
  if (!p.trained) throw CheckpointError("cannot checkpoint an untrained predictor");
  json tensors = json::array();
  p.params.for_each([&tensors](std::string_view name, const Matrix& m) {
    tensors.push_back({{"name", std::string(name)}, {"rows", m.rows()}, {"cols", m.cols()}});
  });

  std::vector<EmpiricalCdf> cdfs;
  json cdf_sizes = json::array();
  for (const auto& e : p.group_cdfs.cdfs) {
    std::size_t knots = options.quantile_grid;
    if (knots == 0) knots = e.size() <= kFullSampleLimit ? e.size() : kDefaultGrid;
    cdfs.push_back(e.compressed(knots));
    cdf_sizes.push_back(cdfs.back().size());
  }

  json header{{"method", to_string(p.kind)},
              {"config_hash", options.config_hash},
              {"model", p.config},
              {"schema", p.schema},
              {"schema_hash", hex64(p.schema.hash())},
              {"tensors", tensors},
              {"groups", p.groups},
              {"cdf_sizes", cdf_sizes},
              {"q60_threshold", p.q60_threshold},
              {"wlr_mode", to_string(p.wlr_mode)},
              {"meta",
               {{"seed", p.meta.seed},
                {"data_fingerprint", hex64(p.meta.data_fingerprint)},
                {"train_rows", p.meta.train_rows},
                {"epoch_losses", p.meta.epoch_losses}}}};
  const std::string text = header.dump();

  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  p.params.for_each([&out](std::string_view, const Matrix& m) {
    // Column-major element order, matching Eigen's storage.
    out.append(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(double));
  });
  for (const auto& e : cdfs) {
    out.append(reinterpret_cast<const char*>(e.sorted_values().data()), e.size() * sizeof(double));
  }
  return out;
}

Predictor predictor_from_bytes(const std::string& bytes, std::string* config_hash) {
  Reader in(bytes);
  if (in.take(4) != std::string(kMagic, 4)) throw CheckpointError("not a checkpoint (bad magic)");
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = in.get<std::uint64_t>();
  json header;
  try {
    header = json::parse(in.take(static_cast<std::size_t>(header_len)));
  } catch (const json::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }

  Predictor p;
  try {
    p.kind = parse_method(header.at("method").get<std::string>());
    p.config = header.at("model").get<ModelConfig>();
    p.schema = header.at("schema").get<Schema>();
    p.groups = header.at("groups").get<DurationGroups>();
    p.q60_threshold = header.at("q60_threshold").get<double>();
    p.wlr_mode = parse_wlr_mode(header.at("wlr_mode").get<std::string>());
    const auto& meta = header.at("meta");
    p.meta.seed = meta.at("seed").get<std::uint64_t>();
    p.meta.data_fingerprint = std::stoull(meta.at("data_fingerprint").get<std::string>(), nullptr, 16);
    p.meta.train_rows = meta.at("train_rows").get<std::size_t>();
    p.meta.epoch_losses = meta.at("epoch_losses").get<std::vector<double>>();
    if (config_hash) *config_hash = header.at("config_hash").get<std::string>();
  } catch (const std::exception& e) {
    throw CheckpointError(std::string("corrupt checkpoint header: ") + e.what());
  }

  p.params = zero_params(p.config);
  const auto& tensors = header.at("tensors");
  std::size_t t = 0;
  p.params.for_each([&](std::string_view name, Matrix& m) {
    if (t >= tensors.size() || tensors[t].at("name").get<std::string>() != name ||
        tensors[t].at("rows").get<Eigen::Index>() != m.rows() ||
        tensors[t].at("cols").get<Eigen::Index>() != m.cols()) {
      throw CheckpointError("checkpoint tensor layout does not match its model config at '" +
                            std::string(name) + "'");
    }
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = in.get<double>();
    ++t;
  });
  if (t != tensors.size()) throw CheckpointError("checkpoint has unexpected extra tensors");

  for (const auto& size : header.at("cdf_sizes")) {
    std::vector<double> values(size.get<std::size_t>());
    for (auto& v : values) v = in.get<double>();
    p.group_cdfs.cdfs.emplace_back(std::move(values));
  }
  if (!in.done()) throw CheckpointError("checkpoint has trailing bytes");
  if (uses_duration_groups(p.kind) && p.group_cdfs.size() != p.groups.m) {
    throw CheckpointError("checkpoint groups and CDFs are not aligned");
  }
  p.trained = true;
  return p;
}

void save_checkpoint(const Predictor& p, const std::filesystem::path& path, const CheckpointOptions& options) {
  const std::string bytes = checkpoint_bytes(p, options);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw CheckpointError("cannot open " + path.string() + " for writing");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("I/O failure while writing " + path.string());
}

Predictor load_checkpoint(const std::filesystem::path& path, std::string* config_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return predictor_from_bytes(bytes, config_hash);
}

}  // namespace dq
