#include "deeprec/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_set>

#include <json.hpp>

namespace deeprec {

namespace {

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    fields.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return fields;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

std::optional<float> parse_float(std::string_view s) {
  float value = 0.0f;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return value;
}

std::string pair_key(const std::string& user, const std::string& item) {
  std::string key;
  key.reserve(user.size() + item.size() + 1);
  key += user;
  key += '\x1f';
  key += item;
  return key;
}

}  // namespace

std::vector<RatingRecord> parse_ratings(std::istream& in, TextFormat format) {
  const char sep = format == TextFormat::Tsv ? '\t' : ',';
  std::vector<RatingRecord> records;
  std::string raw;
  std::size_t line_no = 0;
  bool seen_data = false;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line(raw);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (trim(line).empty() || trim(line).front() == '#') continue;

    auto fields = split_fields(line, sep);
    if (fields.size() != 4) {
      throw ParseError("expected 4 fields (user,item,rating,timestamp), found " +
                           std::to_string(fields.size()),
                       line_no);
    }
    for (auto& f : fields) f = trim(f);
    const auto rating = parse_float(fields[2]);
    const auto timestamp = parse_timestamp(fields[3]);
    if (!seen_data && !rating && !timestamp) {
      seen_data = true;  // header line
      continue;
    }
    seen_data = true;
    if (fields[0].empty() || fields[1].empty()) throw ParseError("empty user or item id", line_no);
    if (!rating) throw ParseError("unparseable rating '" + std::string(fields[2]) + "'", line_no);
    if (!(*rating >= 1.0f && *rating <= 5.0f)) {
      throw ParseError("rating " + std::string(fields[2]) + " outside [1, 5]", line_no);
    }
    if (!timestamp) throw ParseError("unparseable timestamp '" + std::string(fields[3]) + "'", line_no);
    records.push_back(RatingRecord{std::string(fields[0]), std::string(fields[1]), *rating,
                                   *timestamp, std::string(fields[3])});
  }
  return records;
}

TextFormat format_for_path(const std::string& path) {
  const auto dot = path.rfind('.');
  if (dot != std::string::npos) {
    const std::string ext = path.substr(dot);
    if (ext == ".tsv" || ext == ".tab") return TextFormat::Tsv;
  }
  return TextFormat::Csv;
}

std::vector<RatingRecord> read_ratings_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open ratings file '" + path + "'");
  try {
    return parse_ratings(in, format_for_path(path));
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

void write_ratings(std::ostream& out, std::span<const RatingRecord> records, TextFormat format) {
  const char sep = format == TextFormat::Tsv ? '\t' : ',';
  char buffer[32];
  for (const auto& r : records) {
    const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), r.rating);
    (void)ec;
    out << r.user << sep << r.item << sep << std::string_view(buffer, ptr - buffer) << sep
        << (r.timestamp_text.empty() ? std::to_string(r.timestamp) : r.timestamp_text) << '\n';
  }
}

void write_ratings_file(const std::string& path, std::span<const RatingRecord> records) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  write_ratings(out, records, format_for_path(path));
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

std::vector<RatingRecord> deduplicate_latest(std::span<const RatingRecord> records) {
  std::unordered_map<std::string, std::size_t> winner;
  winner.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto [it, inserted] = winner.try_emplace(pair_key(records[i].user, records[i].item), i);
    if (!inserted && records[i].timestamp >= records[it->second].timestamp) it->second = i;
  }
  if (winner.size() == records.size()) return {records.begin(), records.end()};
  std::vector<char> keep(records.size(), 0);
  for (const auto& [key, index] : winner) keep[index] = 1;
  std::vector<RatingRecord> out;
  out.reserve(winner.size());
  for (std::size_t i = 0; i < records.size(); ++i)
    if (keep[i]) out.push_back(records[i]);
  return out;
}

std::vector<float> SparseVector::densify() const {
  std::vector<float> dense(dim, 0.0f);
  for (std::size_t k = 0; k < indices.size(); ++k) dense[indices[k]] = values[k];
  return dense;
}

SparseVector SparseVector::from_dense(std::span<const float> dense) {
  SparseVector v;
  v.dim = dense.size();
  for (std::size_t i = 0; i < dense.size(); ++i) {
    if (dense[i] != 0.0f) {
      v.indices.push_back(static_cast<std::uint32_t>(i));
      v.values.push_back(dense[i]);
    }
  }
  return v;
}

RatingDataset RatingDataset::from_records(std::span<const RatingRecord> records) {
  RatingDataset ds;
  ds.build(records, false, nullptr);
  return ds;
}

RatingDataset RatingDataset::from_records(std::span<const RatingRecord> records,
                                          std::span<const std::string> item_vocabulary,
                                          std::size_t* dropped) {
  RatingDataset ds;
  for (const auto& token : item_vocabulary) {
    const auto id = static_cast<std::uint32_t>(ds.item_tokens_.size());
    if (ds.item_index_.try_emplace(token, id).second) ds.item_tokens_.push_back(token);
  }
  ds.build(records, true, dropped);
  return ds;
}

void RatingDataset::build(std::span<const RatingRecord> input, bool fixed_items,
                          std::size_t* dropped) {
  const auto records = deduplicate_latest(input);
  std::size_t skipped = 0;
  std::vector<std::vector<std::pair<std::uint32_t, float>>> per_user;
  for (const auto& r : records) {
    auto item_it = item_index_.find(r.item);
    if (item_it == item_index_.end()) {
      if (fixed_items) {
        ++skipped;
        continue;
      }
      item_it = item_index_.emplace(r.item, static_cast<std::uint32_t>(item_tokens_.size())).first;
      item_tokens_.push_back(r.item);
    }
    auto [user_it, new_user] =
        user_index_.try_emplace(r.user, static_cast<std::uint32_t>(user_tokens_.size()));
    if (new_user) {
      user_tokens_.push_back(r.user);
      per_user.emplace_back();
    }
    per_user[user_it->second].emplace_back(item_it->second, r.rating);
  }
  if (dropped != nullptr) *dropped = skipped;

  offsets_.assign(1, 0);
  offsets_.reserve(per_user.size() + 1);
  items_.clear();
  ratings_.clear();
  items_.reserve(records.size());
  ratings_.reserve(records.size());
  for (auto& list : per_user) {
    std::sort(list.begin(), list.end());
    for (const auto& [item, rating] : list) {
      items_.push_back(item);
      ratings_.push_back(rating);
    }
    offsets_.push_back(items_.size());
  }
}

std::optional<std::uint32_t> RatingDataset::find_user(const std::string& token) const {
  const auto it = user_index_.find(token);
  if (it == user_index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::uint32_t> RatingDataset::find_item(const std::string& token) const {
  const auto it = item_index_.find(token);
  if (it == item_index_.end()) return std::nullopt;
  return it->second;
}

std::span<const std::uint32_t> RatingDataset::user_items(std::uint32_t user) const {
  if (user >= n_users()) throw std::out_of_range("unknown user id " + std::to_string(user));
  return {items_.data() + offsets_[user], offsets_[user + 1] - offsets_[user]};
}

std::span<const float> RatingDataset::user_ratings(std::uint32_t user) const {
  if (user >= n_users()) throw std::out_of_range("unknown user id " + std::to_string(user));
  return {ratings_.data() + offsets_[user], offsets_[user + 1] - offsets_[user]};
}

SparseVector RatingDataset::user_vector(std::uint32_t user) const {
  const auto items = user_items(user);
  const auto values = user_ratings(user);
  return SparseVector{{items.begin(), items.end()}, {values.begin(), values.end()}, n_items()};
}

std::size_t EvalSet::n_users() const {
  std::unordered_set<std::uint32_t> users;
  for (const auto& e : entries) users.insert(e.user);
  return users.size();
}

std::size_t EvalSet::n_items() const {
  std::unordered_set<std::uint32_t> items;
  for (const auto& e : entries) items.insert(e.item);
  return items.size();
}

EvalSet make_eval_set(const RatingDataset& train, std::span<const RatingRecord> records,
                      std::size_t* dropped) {
  EvalSet eval;
  std::size_t skipped = 0;
  for (const auto& r : records) {
    const auto user = train.find_user(r.user);
    const auto item = train.find_item(r.item);
    if (!user || !item) {
      ++skipped;
      continue;
    }
    eval.entries.push_back(EvalEntry{*user, *item, r.rating});
    eval.records.push_back(r);
  }
  if (dropped != nullptr) *dropped = skipped;
  return eval;
}

void SplitSpec::validate() const {
  require(train_start <= train_end, "split: train_start is after train_end");
  require(test_start <= test_end, "split: test_start is after test_end");
  require(train_end <= test_start, "split: train interval must end before the test interval");
  require(valid_fraction >= 0.0 && valid_fraction <= 1.0, "split: valid_fraction outside [0, 1]");
}

TimeSplit time_split(std::span<const RatingRecord> input, const SplitSpec& spec) {
  spec.validate();
  const auto records = deduplicate_latest(input);

  TimeSplit split;
  std::vector<RatingRecord> test_interval;
  for (const auto& r : records) {
    const DayNumber day = day_of(r.timestamp);
    // A test_start equal to train_end sends that day to train only.
    if (day >= spec.train_start && day <= spec.train_end) {
      split.train_records.push_back(r);
    } else if (day >= spec.test_start && day <= spec.test_end) {
      test_interval.push_back(r);
    }
  }
  if (split.train_records.empty()) throw std::invalid_argument("split: train interval is empty");
  split.train = RatingDataset::from_records(split.train_records);
  split.interval_ratings = test_interval.size();

  Rng rng(spec.split_seed);
  std::vector<RatingRecord> to_test;
  std::vector<RatingRecord> to_valid;
  for (auto& r : test_interval) {
    // Draw for every interval rating so assignment does not depend on filtering.
    const bool validation = rng.uniform() < spec.valid_fraction;
    (validation ? to_valid : to_test).push_back(std::move(r));
  }
  std::size_t dropped_test = 0;
  std::size_t dropped_valid = 0;
  split.test = make_eval_set(split.train, to_test, &dropped_test);
  split.validation = make_eval_set(split.train, to_valid, &dropped_valid);
  split.cold_dropped = dropped_test + dropped_valid;
  return split;
}

SplitCounts count_subset(const RatingDataset& train) {
  return SplitCounts{train.n_users(), train.n_items(), train.n_ratings()};
}

SplitCounts count_subset(const EvalSet& eval) {
  return SplitCounts{eval.n_users(), eval.n_items(), eval.size()};
}

std::string split_manifest_json(const TimeSplit& split, const SplitSpec& spec) {
  auto counts = [](const SplitCounts& c) {
    return nlohmann::json{{"users", c.users}, {"items", c.items}, {"ratings", c.ratings}};
  };
  nlohmann::json manifest = {
      {"format_version", 1},
      {"train_start", format_date(spec.train_start)},
      {"train_end", format_date(spec.train_end)},
      {"test_start", format_date(spec.test_start)},
      {"test_end", format_date(spec.test_end)},
      {"valid_fraction", spec.valid_fraction},
      {"seed", spec.split_seed},
      {"testing_interval_ratings", split.interval_ratings},
      {"cold_dropped", split.cold_dropped},
      {"train", counts(count_subset(split.train))},
      {"test", counts(count_subset(split.test))},
      {"validation", counts(count_subset(split.validation))},
  };
  return manifest.dump(2);
}

template <typename T>
Batch<T> make_batch(const RatingDataset& data, std::span<const std::uint32_t> users) {
  Batch<T> batch;
  const auto rows = static_cast<Index>(users.size());
  const auto cols = static_cast<Index>(data.n_items());
  batch.ratings = Matrix<T>::Zero(rows, cols);
  batch.mask = Matrix<T>::Zero(rows, cols);
  batch.users.assign(users.begin(), users.end());
  for (Index r = 0; r < rows; ++r) {
    const auto items = data.user_items(users[static_cast<std::size_t>(r)]);
    const auto values = data.user_ratings(users[static_cast<std::size_t>(r)]);
    for (std::size_t k = 0; k < items.size(); ++k) {
      batch.ratings(r, items[k]) = static_cast<T>(values[k]);
      batch.mask(r, items[k]) = T(1);
    }
  }
  return batch;
}

template <typename T>
BatchIterator<T>::BatchIterator(const RatingDataset& data, std::size_t batch_size,
                                std::uint64_t epoch_seed)
    : data_(&data), batch_size_(batch_size) {
  require(batch_size_ >= 1, "batch size must be at least 1");
  order_.resize(data.n_users());
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = static_cast<std::uint32_t>(i);
  Rng rng(epoch_seed);
  rng.shuffle(order_);
}

template <typename T>
std::optional<Batch<T>> BatchIterator<T>::next() {
  if (position_ >= order_.size()) return std::nullopt;
  const std::size_t count = std::min(batch_size_, order_.size() - position_);
  auto batch = make_batch<T>(*data_, std::span(order_).subspan(position_, count));
  position_ += count;
  return batch;
}

template <typename T>
std::size_t BatchIterator<T>::num_batches() const {
  return (order_.size() + batch_size_ - 1) / batch_size_;
}

template Batch<float> make_batch<float>(const RatingDataset&, std::span<const std::uint32_t>);
template Batch<double> make_batch<double>(const RatingDataset&, std::span<const std::uint32_t>);
template class BatchIterator<float>;
template class BatchIterator<double>;

}  // namespace deeprec
