#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "deeprec/dates.hpp"
#include "deeprec/random.hpp"
#include "deeprec/tensor.hpp"

namespace deeprec {

struct RatingRecord {
  std::string user;
  std::string item;
  float rating = 0.0f;
  std::int64_t timestamp = 0;  // epoch seconds
  std::string timestamp_text;  // as read, so subsets are written back verbatim
};

enum class TextFormat { Csv, Tsv };

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Reads `user,item,rating,timestamp` lines (tab separated for Tsv). Blank
/// lines, `#` comments and a leading header line are skipped; CRLF is accepted.
std::vector<RatingRecord> parse_ratings(std::istream& in, TextFormat format);

/// Format chosen by extension: `.tsv`/`.tab` are tab separated, anything else CSV.
std::vector<RatingRecord> read_ratings_file(const std::string& path);
TextFormat format_for_path(const std::string& path);

void write_ratings(std::ostream& out, std::span<const RatingRecord> records, TextFormat format);
void write_ratings_file(const std::string& path, std::span<const RatingRecord> records);

/// One record per (user, item); the latest timestamp wins, later lines break
/// ties. Survivors keep their relative input order.
std::vector<RatingRecord> deduplicate_latest(std::span<const RatingRecord> records);

struct SparseVector {
  std::vector<std::uint32_t> indices;  // strictly ascending
  std::vector<float> values;
  std::size_t dim = 0;

  std::vector<float> densify() const;
  static SparseVector from_dense(std::span<const float> dense);
};

/// Immutable user -> (item, rating) store in CSR layout.
class RatingDataset {
 public:
  RatingDataset() = default;

  /// Duplicates are resolved with deduplicate_latest. Ids are assigned in
  /// order of first appearance.
  static RatingDataset from_records(std::span<const RatingRecord> records);

  /// Items are indexed against a fixed vocabulary; ratings on other items are
  /// dropped and counted in `dropped`.
  static RatingDataset from_records(std::span<const RatingRecord> records,
                                    std::span<const std::string> item_vocabulary,
                                    std::size_t* dropped = nullptr);

  std::size_t n_users() const { return user_tokens_.size(); }
  std::size_t n_items() const { return item_tokens_.size(); }
  std::size_t n_ratings() const { return items_.size(); }

  const std::string& user_token(std::uint32_t user) const { return user_tokens_.at(user); }
  const std::string& item_token(std::uint32_t item) const { return item_tokens_.at(item); }
  const std::vector<std::string>& item_tokens() const { return item_tokens_; }
  const std::vector<std::string>& user_tokens() const { return user_tokens_; }

  std::optional<std::uint32_t> find_user(const std::string& token) const;
  std::optional<std::uint32_t> find_item(const std::string& token) const;

  std::span<const std::uint32_t> user_items(std::uint32_t user) const;
  std::span<const float> user_ratings(std::uint32_t user) const;

  /// Throws std::out_of_range for an unknown user.
  SparseVector user_vector(std::uint32_t user) const;

 private:
  void build(std::span<const RatingRecord> records, bool fixed_items, std::size_t* dropped);

  std::vector<std::string> user_tokens_;
  std::vector<std::string> item_tokens_;
  std::unordered_map<std::string, std::uint32_t> user_index_;
  std::unordered_map<std::string, std::uint32_t> item_index_;
  std::vector<std::size_t> offsets_{0};
  std::vector<std::uint32_t> items_;
  std::vector<float> ratings_;
};

struct EvalEntry {
  std::uint32_t user;
  std::uint32_t item;
  float rating;
};

/// Held-out ratings keyed by train-set ids.
struct EvalSet {
  std::vector<EvalEntry> entries;
  std::vector<RatingRecord> records;  // the same ratings, as read

  std::size_t size() const { return entries.size(); }
  bool empty() const { return entries.empty(); }
  std::size_t n_users() const;
  std::size_t n_items() const;
};

/// Keeps only ratings whose user and item both exist in `train`.
EvalSet make_eval_set(const RatingDataset& train, std::span<const RatingRecord> records,
                      std::size_t* dropped = nullptr);

struct SplitSpec {
  DayNumber train_start = 0;
  DayNumber train_end = 0;
  DayNumber test_start = 0;
  DayNumber test_end = 0;
  double valid_fraction = 0.5;
  std::uint64_t split_seed = 0;

  void validate() const;
};

struct SplitCounts {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t ratings = 0;
};

struct TimeSplit {
  RatingDataset train;
  EvalSet test;
  EvalSet validation;
  std::vector<RatingRecord> train_records;
  std::size_t interval_ratings = 0;  // testing-interval ratings before cold filtering
  std::size_t cold_dropped = 0;
};

/// Train keeps ratings with day in [train_start, train_end]. Each rating with
/// day in [test_start, test_end] goes to validation with probability
/// valid_fraction, otherwise to test; ratings whose user or item is absent
/// from train are then removed from both.
TimeSplit time_split(std::span<const RatingRecord> records, const SplitSpec& spec);

SplitCounts count_subset(const RatingDataset& train);
SplitCounts count_subset(const EvalSet& eval);

/// JSON manifest: boundaries, seed, and per-subset counts.
std::string split_manifest_json(const TimeSplit& split, const SplitSpec& spec);

template <typename T>
struct Batch {
  Matrix<T> ratings;  // 0 where unrated
  Matrix<T> mask;     // 1 where rated
  std::vector<std::uint32_t> users;

  Index rows() const { return ratings.rows(); }
};

template <typename T>
Batch<T> make_batch(const RatingDataset& data, std::span<const std::uint32_t> users);

/// One epoch over every user in a seeded order, `batch_size` users at a time;
/// the final batch may be short.
template <typename T>
class BatchIterator {
 public:
  BatchIterator(const RatingDataset& data, std::size_t batch_size, std::uint64_t epoch_seed);

  std::optional<Batch<T>> next();
  std::size_t num_batches() const;
  const std::vector<std::uint32_t>& order() const { return order_; }

 private:
  const RatingDataset* data_;
  std::size_t batch_size_;
  std::vector<std::uint32_t> order_;
  std::size_t position_ = 0;
};

}  // namespace deeprec
