#include "dq/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "dq/util.hpp"

namespace dq {

using nlohmann::json;

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t stream, std::uint64_t counter) {
  SplitMix64 a(parent ^ (stream * 0xD1B54A32D192ED03ULL));
  std::uint64_t h = a();
  SplitMix64 b(h ^ (counter * 0x9E3779B97F4A7C15ULL));
  b();
  return b();
}

FileFormat parse_format(const std::string& name) {
  if (name == "jsonl") return FileFormat::kJsonl;
  if (name == "csv") return FileFormat::kCsv;
  throw DataError("unknown dataset format '" + name + "' (expected jsonl or csv)");
}

FileFormat format_from_extension(const std::filesystem::path& path) {
  return path.extension() == ".csv" ? FileFormat::kCsv : FileFormat::kJsonl;
}

std::uint64_t Schema::hash() const {
  std::string key = "dense=" + std::to_string(dense_len) + ";vocab=";
  for (auto v : id_vocab_sizes) key += std::to_string(v) + ",";
  return fnv1a(key);
}

std::vector<double> Dataset::durations() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.duration);
  return out;
}

std::vector<double> Dataset::watch_times() const {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.watch_time);
  return out;
}

std::vector<std::int64_t> Dataset::user_ids() const {
  std::vector<std::int64_t> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.user_id);
  return out;
}

namespace {

[[noreturn]] void violation(std::size_t index, const std::string& field, const std::string& what) {
  throw DataError("schema violation in record " + std::to_string(index) + ": field '" + field +
                  "' " + what);
}

std::string num(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

void validate_record(const InteractionRecord& r, const Schema& schema, std::size_t index) {
  if (!(r.duration > 0.0) || !std::isfinite(r.duration)) {
    violation(index, "duration", "must be a finite value > 0 (got " + num(r.duration) + ")");
  }
  if (!(r.watch_time >= 0.0) || !std::isfinite(r.watch_time)) {
    violation(index, "watch_time", "must be a finite value >= 0 (got " + num(r.watch_time) + ")");
  }
  if (r.dense.size() != schema.dense_len) {
    violation(index, "dense",
              "has length " + std::to_string(r.dense.size()) + ", schema declares " +
                  std::to_string(schema.dense_len));
  }
  for (std::size_t j = 0; j < r.dense.size(); ++j) {
    if (!std::isfinite(r.dense[j])) violation(index, "dense", "entry " + std::to_string(j) + " is not finite");
  }
  if (r.ids.size() != schema.id_slots()) {
    violation(index, "ids",
              "has length " + std::to_string(r.ids.size()) + ", schema declares " +
                  std::to_string(schema.id_slots()));
  }
  for (std::size_t j = 0; j < r.ids.size(); ++j) {
    if (r.ids[j] < 0 || r.ids[j] >= schema.id_vocab_sizes[j]) {
      violation(index, "ids",
                "slot " + std::to_string(j) + " value " + std::to_string(r.ids[j]) +
                    " outside vocabulary [0, " + std::to_string(schema.id_vocab_sizes[j]) + ")");
    }
  }
}

void validate_dataset(const Dataset& ds) {
  if (ds.records.empty()) throw DataError("empty dataset");
  for (std::size_t i = 0; i < ds.records.size(); ++i) validate_record(ds.records[i], ds.schema, i);
}

Schema infer_schema(std::span<const InteractionRecord> records) {
  Schema s;
  if (records.empty()) return s;
  s.dense_len = records.front().dense.size();
  s.id_vocab_sizes.assign(records.front().ids.size(), 0);
  for (const auto& r : records) {
    for (std::size_t j = 0; j < r.ids.size() && j < s.id_vocab_sizes.size(); ++j) {
      s.id_vocab_sizes[j] = std::max(s.id_vocab_sizes[j], r.ids[j] + 1);
    }
  }
  for (std::size_t j = 0; j < s.dense_len; ++j) s.dense_names.push_back("dense_" + std::to_string(j));
  for (std::size_t j = 0; j < s.id_slots(); ++j) s.id_names.push_back("id_" + std::to_string(j));
  return s;
}

namespace {

const char* const kJsonKeys[] = {"user_id", "video_id", "duration", "watch_time", "dense", "ids"};

InteractionRecord record_from_json(const json& j, std::size_t line_no) {
  auto fail = [&](const std::string& what) {
    throw DataError("parse error at line " + std::to_string(line_no) + ": " + what);
  };
  if (!j.is_object()) fail("expected a JSON object");
  for (const char* key : kJsonKeys) {
    if (!j.contains(key)) fail(std::string("missing key '") + key + "'");
  }
  if (j.size() != std::size(kJsonKeys)) fail("unexpected extra keys");
  InteractionRecord r;
  try {
    r.user_id = j.at("user_id").get<std::int64_t>();
    r.video_id = j.at("video_id").get<std::int64_t>();
    r.duration = j.at("duration").get<double>();
    r.watch_time = j.at("watch_time").get<double>();
    r.dense = j.at("dense").get<std::vector<double>>();
    r.ids = j.at("ids").get<std::vector<std::int64_t>>();
  } catch (const json::exception& e) {
    fail(e.what());
  }
  return r;
}

json record_to_json(const InteractionRecord& r) {
  return json{{"user_id", r.user_id}, {"video_id", r.video_id}, {"duration", r.duration},
              {"watch_time", r.watch_time}, {"dense", r.dense},     {"ids", r.ids}};
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

template <class T>
T parse_field(std::string_view text, std::size_t line_no, std::string_view field) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw DataError("parse error at line " + std::to_string(line_no) + ": field '" +
                    std::string(field) + "' has invalid value '" + std::string(text) + "'");
  }
  return value;
}

std::string csv_header(std::size_t dense_len, std::size_t id_slots) {
  std::string h = "user_id,video_id,duration,watch_time";
  for (std::size_t j = 0; j < dense_len; ++j) h += ",dense_" + std::to_string(j);
  for (std::size_t j = 0; j < id_slots; ++j) h += ",id_" + std::to_string(j);
  return h;
}

std::vector<InteractionRecord> read_jsonl(std::istream& in) {
  std::vector<InteractionRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError("parse error at line " + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(record_from_json(j, line_no));
  }
  return out;
}

std::vector<InteractionRecord> read_csv(std::istream& in) {
  std::vector<InteractionRecord> out;
  std::string line;
  if (!std::getline(in, line)) return out;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_commas(line);
  std::size_t dense_len = 0, id_slots = 0;
  for (auto h : header) {
    if (h.starts_with("dense_")) ++dense_len;
    if (h.starts_with("id_")) ++id_slots;
  }
  if (line != csv_header(dense_len, id_slots)) {
    throw DataError("parse error at line 1: header does not match expected '" +
                    csv_header(dense_len, id_slots) + "'");
  }
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_commas(line);
    if (cells.size() != header.size()) {
      throw DataError("parse error at line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " fields, got " + std::to_string(cells.size()));
    }
    InteractionRecord r;
    r.user_id = parse_field<std::int64_t>(cells[0], line_no, "user_id");
    r.video_id = parse_field<std::int64_t>(cells[1], line_no, "video_id");
    r.duration = parse_field<double>(cells[2], line_no, "duration");
    r.watch_time = parse_field<double>(cells[3], line_no, "watch_time");
    for (std::size_t j = 0; j < dense_len; ++j) {
      r.dense.push_back(parse_field<double>(cells[4 + j], line_no, header[4 + j]));
    }
    for (std::size_t j = 0; j < id_slots; ++j) {
      r.ids.push_back(parse_field<std::int64_t>(cells[4 + dense_len + j], line_no, header[4 + dense_len + j]));
    }
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<InteractionRecord> read_records(const std::filesystem::path& path, FileFormat format) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset file " + path.string());
  auto records = format == FileFormat::kJsonl ? read_jsonl(in) : read_csv(in);
  if (records.empty()) throw DataError("empty dataset file " + path.string());
  return records;
}

}  // namespace

Dataset load_dataset(const std::filesystem::path& path, FileFormat format) {
  Dataset ds;
  ds.records = read_records(path, format);
  ds.schema = infer_schema(ds.records);
  validate_dataset(ds);
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path, FileFormat format, const Schema& declared) {
  Dataset ds;
  ds.records = read_records(path, format);
  ds.schema = declared;
  validate_dataset(ds);
  return ds;
}

void save_dataset(const Dataset& ds, const std::filesystem::path& path, FileFormat format) {
  if (ds.records.empty()) throw DataError("empty dataset");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  if (format == FileFormat::kJsonl) {
    for (const auto& r : ds.records) out << record_to_json(r).dump() << '\n';
  } else {
    const auto& first = ds.records.front();
    out << csv_header(first.dense.size(), first.ids.size()) << '\n';
    char buf[32];
    auto put = [&](double v) {
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out.write(buf, ptr - buf);
    };
    for (const auto& r : ds.records) {
      out << r.user_id << ',' << r.video_id << ',';
      put(r.duration);
      out << ',';
      put(r.watch_time);
      for (double v : r.dense) {
        out << ',';
        put(v);
      }
      for (auto v : r.ids) out << ',' << v;
      out << '\n';
    }
  }
  if (!out) throw DataError("I/O failure while writing " + path.string());
}

std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double test_fraction,
                                             std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::invalid_argument("test_fraction must lie in (0, 1)");
  }
  const std::size_t n = ds.size();
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<char> is_test(n, 0);
  for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = 1;

  Dataset train, test;
  train.schema = test.schema = ds.schema;
  train.records.reserve(n - n_test);
  test.records.reserve(n_test);
  for (std::size_t i = 0; i < n; ++i) {
    (is_test[i] ? test : train).records.push_back(ds.records[i]);
  }
  return {std::move(train), std::move(test)};
}

std::uint64_t fingerprint(const Dataset& ds) {
  std::uint64_t h = kFnvOffset;
  auto mix = [&h](const void* p, std::size_t n) {
    h = fnv1a(std::string_view(static_cast<const char*>(p), n), h);
  };
  for (const auto& r : ds.records) {
    mix(&r.user_id, sizeof r.user_id);
    mix(&r.video_id, sizeof r.video_id);
    mix(&r.duration, sizeof r.duration);
    mix(&r.watch_time, sizeof r.watch_time);
    mix(r.dense.data(), r.dense.size() * sizeof(double));
    mix(r.ids.data(), r.ids.size() * sizeof(std::int64_t));
  }
  return h;
}

std::string schema_to_json(const Schema& schema) {
  json j{{"dense_len", schema.dense_len},
         {"id_vocab_sizes", schema.id_vocab_sizes},
         {"dense_names", schema.dense_names},
         {"id_names", schema.id_names}};
  return j.dump();
}

Schema schema_from_json(const std::string& text) {
  const json j = json::parse(text);
  Schema s;
  s.dense_len = j.at("dense_len").get<std::size_t>();
  s.id_vocab_sizes = j.at("id_vocab_sizes").get<std::vector<std::int64_t>>();
  s.dense_names = j.value("dense_names", std::vector<std::string>{});
  s.id_names = j.value("id_names", std::vector<std::string>{});
  return s;
}

}  // namespace dq
