#pragma once

// Interaction-log schema, validation and JSONL/CSV persistence.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dq {

// Raised for malformed input files and records that break the schema.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class FileFormat { kJsonl, kCsv };

FileFormat parse_format(const std::string& name);
FileFormat format_from_extension(const std::filesystem::path& path);

struct InteractionRecord {
  std::int64_t user_id = 0;
  std::int64_t video_id = 0;
  double duration = 0.0;    // seconds, > 0
  double watch_time = 0.0;  // seconds, >= 0; may exceed duration
  std::vector<double> dense;
  std::vector<std::int64_t> ids;

  bool operator==(const InteractionRecord&) const = default;
};

struct Schema {
  std::size_t dense_len = 0;
  // One entry per id slot; every id in that slot must be < its vocab size.
  std::vector<std::int64_t> id_vocab_sizes;
  std::vector<std::string> dense_names;
  std::vector<std::string> id_names;

  std::size_t id_slots() const { return id_vocab_sizes.size(); }
  // Stable 64-bit fingerprint of the shape-relevant fields.
  std::uint64_t hash() const;

  bool operator==(const Schema&) const = default;
};

struct Dataset {
  std::vector<InteractionRecord> records;
  Schema schema;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }

  std::vector<double> durations() const;
  std::vector<double> watch_times() const;
  std::vector<std::int64_t> user_ids() const;
};

// Throws DataError naming the offending field and record index.
void validate_record(const InteractionRecord& r, const Schema& schema, std::size_t index);
void validate_dataset(const Dataset& ds);

// Smallest schema that admits every record (vocab = max id + 1 per slot).
Schema infer_schema(std::span<const InteractionRecord> records);

Dataset load_dataset(const std::filesystem::path& path, FileFormat format);
// Validates against a declared schema instead of inferring one.
Dataset load_dataset(const std::filesystem::path& path, FileFormat format, const Schema& declared);

void save_dataset(const Dataset& ds, const std::filesystem::path& path, FileFormat format);

// Disjoint partition (train, test); record order is preserved inside each part.
std::pair<Dataset, Dataset> split_train_test(const Dataset& ds, double test_fraction,
                                             std::uint64_t seed);

// Order-sensitive fingerprint of the records, used in checkpoints and manifests.
std::uint64_t fingerprint(const Dataset& ds);

// Shared JSON helpers for schema round-tripping.
std::string schema_to_json(const Schema& schema);
Schema schema_from_json(const std::string& text);

}  // namespace dq
