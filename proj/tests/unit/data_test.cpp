#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "dq/data.hpp"
#include "test_support.hpp"

namespace dq {
namespace {

using testing::scratch_dir;
using testing::small_dataset;
using testing::small_record;
using testing::small_schema;

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}

TEST(Data, LoadsRowsInFileOrder) {
  const auto path = scratch_dir() / "three.jsonl";
  write_file(path,
             "{\"user_id\":2,\"video_id\":0,\"duration\":10.0,\"watch_time\":3.0,\"dense\":[1.0],\"ids\":[2,0]}\n"
             "{\"user_id\":0,\"video_id\":1,\"duration\":20.0,\"watch_time\":0.0,\"dense\":[2.0],\"ids\":[0,1]}\n"
             "{\"user_id\":1,\"video_id\":2,\"duration\":30.0,\"watch_time\":45.0,\"dense\":[3.0],\"ids\":[1,2]}\n");
  const Dataset ds = load_dataset(path, FileFormat::kJsonl);
  ASSERT_EQ(ds.size(), 3u);
  EXPECT_EQ(ds.records[0].user_id, 2);
  EXPECT_EQ(ds.records[1].user_id, 0);
  EXPECT_EQ(ds.records[2].user_id, 1);
  EXPECT_DOUBLE_EQ(ds.records[2].watch_time, 45.0);  // may exceed duration
  EXPECT_EQ(ds.schema.dense_len, 1u);
  EXPECT_EQ(ds.schema.id_vocab_sizes, (std::vector<std::int64_t>{3, 3}));
}

TEST(Data, ZeroDurationIsLocatedSchemaViolation) {
  const auto path = scratch_dir() / "bad.jsonl";
  write_file(path,
             "{\"user_id\":0,\"video_id\":0,\"duration\":10.0,\"watch_time\":3.0,\"dense\":[],\"ids\":[]}\n"
             "{\"user_id\":0,\"video_id\":1,\"duration\":0.0,\"watch_time\":1.0,\"dense\":[],\"ids\":[]}\n");
  try {
    load_dataset(path, FileFormat::kJsonl);
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("duration"), std::string::npos) << msg;
    EXPECT_NE(msg.find("record 1"), std::string::npos) << msg;
  }
}

TEST(Data, ValidationRejectsEveryInvariantBreach) {
  const Schema s = small_schema();
  const InteractionRecord ok = small_record(1, 2, 10.0, 4.0);
  EXPECT_NO_THROW(validate_record(ok, s, 0));

  auto expect_field = [&](InteractionRecord r, const std::string& field) {
    try {
      validate_record(r, s, 4);
      ADD_FAILURE() << "accepted bad " << field;
    } catch (const DataError& e) {
      const std::string msg = e.what();
      EXPECT_NE(msg.find(field), std::string::npos) << msg;
      EXPECT_NE(msg.find("record 4"), std::string::npos) << msg;
    }
  };
  InteractionRecord r = ok;
  r.duration = -1.0;
  expect_field(r, "duration");
  r = ok;
  r.watch_time = -0.5;
  expect_field(r, "watch_time");
  r = ok;
  r.dense.push_back(1.0);
  expect_field(r, "dense");
  r = ok;
  r.ids = {1};
  expect_field(r, "ids");
  r = ok;
  r.ids[1] = 7;  // vocab of slot 1 is 7
  expect_field(r, "ids");
}

TEST(Data, ParseErrorsReportLineNumbers) {
  const auto dir = scratch_dir();
  write_file(dir / "garbage.jsonl",
             "{\"user_id\":0,\"video_id\":0,\"duration\":1.0,\"watch_time\":1.0,\"dense\":[],\"ids\":[]}\n"
             "{not json\n");
  try {
    load_dataset(dir / "garbage.jsonl", FileFormat::kJsonl);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  write_file(dir / "missing.jsonl", "{\"user_id\":0,\"video_id\":0,\"duration\":1.0,\"dense\":[],\"ids\":[]}\n");
  EXPECT_THROW(load_dataset(dir / "missing.jsonl", FileFormat::kJsonl), DataError);

  write_file(dir / "short.csv", "user_id,video_id,duration,watch_time\n1,2,3.0\n");
  try {
    load_dataset(dir / "short.csv", FileFormat::kCsv);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
}

TEST(Data, EmptyInputsAreRejected) {
  const auto dir = scratch_dir();
  write_file(dir / "empty.jsonl", "");
  EXPECT_THROW(load_dataset(dir / "empty.jsonl", FileFormat::kJsonl), DataError);
  Dataset empty;
  try {
    save_dataset(empty, dir / "out.jsonl", FileFormat::kJsonl);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_STREQ(e.what(), "empty dataset");
  }
  EXPECT_THROW(load_dataset(dir / "does_not_exist.jsonl", FileFormat::kJsonl), DataError);
}

TEST(Data, SingleRecordIsOneLine) {
  const auto path = scratch_dir() / "one.jsonl";
  Dataset ds;
  ds.schema = small_schema();
  ds.records.push_back(small_record(1, 2, 3.0, 1.0));
  save_dataset(ds, path, FileFormat::kJsonl);
  std::ifstream in(path);
  std::string line;
  std::size_t lines = 0;
  while (std::getline(in, line)) ++lines;
  EXPECT_EQ(lines, 1u);
}

class RoundTrip : public ::testing::TestWithParam<FileFormat> {};

TEST_P(RoundTrip, SaveThenLoadIsIdentity) {
  const auto path = scratch_dir() / (GetParam() == FileFormat::kJsonl ? "ds.jsonl" : "ds.csv");
  Dataset ds = small_dataset(200, 3);
  ds.records[0].watch_time = 12.345678901;
  save_dataset(ds, path, GetParam());
  const Dataset back = load_dataset(path, GetParam(), ds.schema);
  ASSERT_EQ(back.size(), ds.size());
  EXPECT_NEAR(back.records[0].watch_time, 12.345678901, 1e-9);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& a = ds.records[i];
    const auto& b = back.records[i];
    EXPECT_EQ(a.user_id, b.user_id);
    EXPECT_EQ(a.video_id, b.video_id);
    EXPECT_NEAR(a.duration, b.duration, 1e-9);
    EXPECT_NEAR(a.watch_time, b.watch_time, 1e-9);
    ASSERT_EQ(a.dense.size(), b.dense.size());
    for (std::size_t j = 0; j < a.dense.size(); ++j) EXPECT_NEAR(a.dense[j], b.dense[j], 1e-9);
    EXPECT_EQ(a.ids, b.ids);
  }
  EXPECT_EQ(fingerprint(back), fingerprint(ds));  // shortest round-trip text is exact
}

INSTANTIATE_TEST_SUITE_P(Formats, RoundTrip, ::testing::Values(FileFormat::kJsonl, FileFormat::kCsv));

TEST(Data, DeclaredSchemaIsEnforcedOnLoad) {
  const auto path = scratch_dir() / "ds.jsonl";
  const Dataset ds = small_dataset(10);
  save_dataset(ds, path, FileFormat::kJsonl);
  Schema narrow = ds.schema;
  narrow.id_vocab_sizes = {2, 2};
  EXPECT_THROW(load_dataset(path, FileFormat::kJsonl, narrow), DataError);
}

TEST(Data, FormatNames) {
  EXPECT_EQ(parse_format("jsonl"), FileFormat::kJsonl);
  EXPECT_EQ(parse_format("csv"), FileFormat::kCsv);
  EXPECT_THROW(parse_format("parquet"), DataError);
  EXPECT_EQ(format_from_extension("a/b.csv"), FileFormat::kCsv);
  EXPECT_EQ(format_from_extension("a/b.jsonl"), FileFormat::kJsonl);
}

TEST(Split, SmallPartition) {
  const Dataset ds = small_dataset(10);
  const auto [train, test] = split_train_test(ds, 0.2, 7);
  EXPECT_EQ(train.size(), 8u);
  EXPECT_EQ(test.size(), 2u);
  std::multiset<double> all, parts;
  for (const auto& r : ds.records) all.insert(r.watch_time);
  for (const auto& r : train.records) parts.insert(r.watch_time);
  for (const auto& r : test.records) parts.insert(r.watch_time);
  EXPECT_EQ(all, parts);
}

TEST(Split, Deterministic) {
  const Dataset ds = small_dataset(50);
  const auto a = split_train_test(ds, 0.3, 11);
  const auto b = split_train_test(ds, 0.3, 11);
  EXPECT_EQ(a.first.records, b.first.records);
  EXPECT_EQ(a.second.records, b.second.records);
  const auto c = split_train_test(ds, 0.3, 12);
  EXPECT_NE(a.second.records, c.second.records);
}

TEST(Split, LargeCountsAndPartition) {
  const Dataset ds = small_dataset(100'000, 5);
  const auto [train, test] = split_train_test(ds, 0.1, 3);
  EXPECT_EQ(test.size(), 10'000u);
  EXPECT_EQ(train.size() + test.size(), ds.size());
  // Every record appears exactly once: match by the (unique) watch times.
  std::multiset<double> seen;
  for (const auto& r : train.records) seen.insert(r.watch_time);
  for (const auto& r : test.records) seen.insert(r.watch_time);
  std::multiset<double> all;
  for (const auto& r : ds.records) all.insert(r.watch_time);
  EXPECT_EQ(seen, all);
}

TEST(Split, RejectsBadFraction) {
  const Dataset ds = small_dataset(10);
  EXPECT_THROW(split_train_test(ds, 0.0, 1), std::invalid_argument);
  EXPECT_THROW(split_train_test(ds, 1.0, 1), std::invalid_argument);
  EXPECT_THROW(split_train_test(ds, -0.1, 1), std::invalid_argument);
}

TEST(Schema, JsonRoundTripAndHash) {
  const Schema s = small_schema();
  EXPECT_EQ(schema_from_json(schema_to_json(s)), s);
  Schema t = s;
  t.id_vocab_sizes[0] += 1;
  EXPECT_NE(s.hash(), t.hash());
}

}  // namespace
}  // namespace dq
