/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "tempex/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string_view>

#include "tempex/error.hpp"

namespace tempex::data {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',' || line[i] == '\t') {
      std::string_view f = line.substr(start, i - start);
      while (!f.empty() && (f.front() == ' ' || f.front() == '\r')) f.remove_prefix(1);
      while (!f.empty() && (f.back() == ' ' || f.back() == '\r')) f.remove_suffix(1);
      fields.push_back(f);
      start = i + 1;
    }
  }
  return fields;
}

std::optional<long long> parse_int(std::string_view s) {
  long long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

struct Metadata {
  std::optional<int> epoch_length_days, origin_day, num_epochs;
  std::size_t num_users = 0, num_items = 0;
};

void parse_metadata(std::string_view line, Metadata& meta) {
  std::istringstream in{std::string(line)};
  std::string token;
  while (in >> token) {
    const auto eq = token.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = token.substr(0, eq);
    const auto value = parse_int(std::string_view(token).substr(eq + 1));
    if (!value) continue;
    if (key == "epoch_length_days") meta.epoch_length_days = static_cast<int>(*value);
    else if (key == "origin_day") meta.origin_day = static_cast<int>(*value);
    else if (key == "num_epochs") meta.num_epochs = static_cast<int>(*value);
    else if (key == "num_users") meta.num_users = static_cast<std::size_t>(*value);
    else if (key == "num_items") meta.num_items = static_cast<std::size_t>(*value);
  }
}

[[noreturn]] void malformed(std::size_t line_no, const std::string& why) {
  throw Error(ErrorCode::MalformedLine, "line " + std::to_string(line_no) + ": " + why);
}

void check_rating(long long r, std::size_t line_no) {
  if (r < kMinRating || r > kMaxRating) {
    throw Error(ErrorCode::RatingOutOfRange,
                "line " + std::to_string(line_no) + ": rating " + std::to_string(r) + " not in [1,5]");
  }
}

}  // namespace

int EpochGrid::epoch_of(int day) const noexcept {
  const int offset = day - origin_day;
  // floor division; offsets are non-negative for valid datasets
  return offset >= 0 ? offset / epoch_length_days : -((-offset + epoch_length_days - 1) / epoch_length_days);
}

RatingDataset RatingDataset::from_events(std::span<const RatingEvent> raw, const GridConfig& grid,
                                         std::size_t num_users, std::size_t num_items) {
  if (raw.empty()) throw Error(ErrorCode::EmptyDataset, "no rating events");
  RatingDataset ds;
  ds.grid_.epoch_length_days = grid.epoch_length_days.value_or(30);
  if (ds.grid_.epoch_length_days <= 0) throw Error(ErrorCode::ConfigInvalid, "epoch_length_days must be > 0");
  int min_day = std::numeric_limits<int>::max();
  for (const auto& e : raw) {
    if (e.day < 0) throw Error(ErrorCode::MalformedLine, "negative day " + std::to_string(e.day));
    if (e.rating < kMinRating || e.rating > kMaxRating) {
      throw Error(ErrorCode::RatingOutOfRange, "rating " + std::to_string(e.rating) + " not in [1,5]");
    }
    min_day = std::min(min_day, e.day);
  }
  ds.grid_.origin_day = grid.origin_day.value_or(min_day);
  if (ds.grid_.origin_day < 0 || ds.grid_.origin_day > min_day) {
    throw Error(ErrorCode::ConfigInvalid, "origin_day must lie in [0, earliest day]");
  }

  // Key (user, item, epoch) -> position in `raw` of the surviving duplicate.
  std::map<std::tuple<std::uint32_t, std::uint32_t, int>, std::size_t> latest;
  int max_epoch = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const int epoch = ds.grid_.epoch_of(raw[i].day);
    max_epoch = std::max(max_epoch, epoch);
    auto [it, inserted] = latest.try_emplace({raw[i].user, raw[i].item, epoch}, i);
    if (!inserted && raw[i].day >= raw[it->second].day) it->second = i;
    num_users = std::max<std::size_t>(num_users, raw[i].user + std::size_t{1});
    num_items = std::max<std::size_t>(num_items, raw[i].item + std::size_t{1});
  }
  ds.grid_.num_epochs = grid.num_epochs.value_or(max_epoch + 1);
  if (ds.grid_.num_epochs <= max_epoch) {
    throw Error(ErrorCode::ConfigInvalid, "num_epochs " + std::to_string(ds.grid_.num_epochs) +
                                              " too small for latest epoch " + std::to_string(max_epoch));
  }
  ds.num_users_ = num_users;
  ds.num_items_ = num_items;

  ds.events_.reserve(latest.size());
  for (const auto& [key, idx] : latest) {
    const RatingEvent& r = raw[idx];
    ds.events_.push_back({r.user, r.item, r.day, r.rating, std::get<2>(key), Split::Train});
  }
  ds.build_indices();
  return ds;
}

void RatingDataset::build_indices() {
  std::sort(events_.begin(), events_.end(), [](const Event& a, const Event& b) {
    return std::tie(a.user, a.epoch, a.item) < std::tie(b.user, b.epoch, b.item);
  });
  user_offsets_.assign(num_users_ + 1, 0);
  item_offsets_.assign(num_items_ + 1, 0);
  for (const auto& e : events_) {
    ++user_offsets_[e.user + 1];
    ++item_offsets_[e.item + 1];
  }
  std::partial_sum(user_offsets_.begin(), user_offsets_.end(), user_offsets_.begin());
  std::partial_sum(item_offsets_.begin(), item_offsets_.end(), item_offsets_.begin());

  item_index_.resize(events_.size());
  std::iota(item_index_.begin(), item_index_.end(), 0u);
  std::stable_sort(item_index_.begin(), item_index_.end(), [this](std::uint32_t a, std::uint32_t b) {
    const Event& x = events_[a];
    const Event& y = events_[b];
    return std::tie(x.item, x.epoch, x.user) < std::tie(y.item, y.epoch, y.user);
  });
  // events_ is already user-ordered.
  user_index_.resize(events_.size());
  std::iota(user_index_.begin(), user_index_.end(), 0u);
}

std::span<const std::uint32_t> RatingDataset::by_user(std::uint32_t user) const {
  return std::span<const std::uint32_t>(user_index_).subspan(user_offsets_[user],
                                                             user_offsets_[user + 1] - user_offsets_[user]);
}

std::span<const std::uint32_t> RatingDataset::by_item(std::uint32_t item) const {
  return std::span<const std::uint32_t>(item_index_).subspan(item_offsets_[item],
                                                             item_offsets_[item + 1] - item_offsets_[item]);
}

RatingDataset RatingDataset::with_splits(std::span<const Split> tags) const {
  if (tags.size() != events_.size()) throw Error(ErrorCode::ShapeMismatch, "split tag count != event count");
  RatingDataset out = *this;
  for (std::size_t i = 0; i < tags.size(); ++i) out.events_[i].split = tags[i];
  return out;
}

std::optional<int> RatingDataset::train_rating(std::uint32_t user, std::uint32_t item, int epoch) const {
  const auto begin = events_.begin() + user_offsets_[user];
  const auto end = events_.begin() + user_offsets_[user + 1];
  const auto it = std::lower_bound(begin, end, std::pair{epoch, item}, [](const Event& e, const auto& key) {
    return std::pair{e.epoch, e.item} < key;
  });
  if (it == end || it->epoch != epoch || it->item != item || !it->is_train()) return std::nullopt;
  return it->rating;
}

std::size_t RatingDataset::count(Split split) const noexcept {
  return static_cast<std::size_t>(
      std::count_if(events_.begin(), events_.end(), [split](const Event& e) { return e.split == split; }));
}

int RatingDataset::last_train_epoch() const noexcept {
  int last = -1;
  for (const auto& e : events_) {
    if (e.is_train()) last = std::max(last, e.epoch);
  }
  return last;
}

int RatingDataset::last_train_day() const noexcept {
  int last = -1;
  for (const auto& e : events_) {
    if (e.is_train()) last = std::max(last, e.day);
  }
  return last;
}

double RatingDataset::train_mean() const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& e : events_) {
    if (!e.is_train()) continue;
    sum += e.rating;
    ++n;
  }
  if (n == 0) throw Error(ErrorCode::EmptyDataset, "no train events");
  return sum / static_cast<double>(n);
}

// ---------------------------------------------------------------------------

RatingDataset ingest(std::istream& in, const GridConfig& grid) {
  std::vector<RatingEvent> raw;
  std::vector<Split> tags;
  bool any_tag = false;
  Metadata meta;
  std::string line;
  std::size_t line_no = 0;
  bool seen_data = false;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    while (!view.empty() && (view.back() == '\r' || view.back() == ' ')) view.remove_suffix(1);
    if (view.empty()) continue;
    if (view.front() == '#') {
      if (view.find("tempex-dataset") != std::string_view::npos) parse_metadata(view, meta);
      continue;
    }
    const auto fields = split_fields(view);
    if (!seen_data && !fields.empty() && !parse_int(fields[0])) {
      seen_data = true;  // header row
      continue;
    }
    seen_data = true;
    if (fields.size() != 4 && fields.size() != 5) malformed(line_no, "expected 4 or 5 fields");
    long long v[4];
    for (int k = 0; k < 4; ++k) {
      const auto parsed = parse_int(fields[k]);
      if (!parsed) malformed(line_no, "field " + std::to_string(k + 1) + " is not an integer");
      v[k] = *parsed;
    }
    if (v[0] < 0 || v[1] < 0 || v[2] < 0 || v[0] > std::numeric_limits<std::int32_t>::max() ||
        v[1] > std::numeric_limits<std::int32_t>::max() || v[2] > std::numeric_limits<std::int32_t>::max()) {
      malformed(line_no, "ids and day must be non-negative 32-bit integers");
    }
    check_rating(v[3], line_no);
    Split tag = Split::Train;
    if (fields.size() == 5) {
      if (fields[4] == "train") tag = Split::Train;
      else if (fields[4] == "test") tag = Split::Test;
      else malformed(line_no, "split column must be train or test");
      any_tag = true;
    }
    raw.push_back({static_cast<std::uint32_t>(v[0]), static_cast<std::uint32_t>(v[1]), static_cast<std::int32_t>(v[2]),
                   static_cast<std::int32_t>(v[3])});
    tags.push_back(tag);
  }
  if (raw.empty()) throw Error(ErrorCode::EmptyDataset, "no rating rows");

  GridConfig effective = grid;
  if (!effective.epoch_length_days) effective.epoch_length_days = meta.epoch_length_days;
  if (!effective.origin_day) effective.origin_day = meta.origin_day;
  if (!effective.num_epochs) effective.num_epochs = meta.num_epochs;
  RatingDataset ds = RatingDataset::from_events(raw, effective, meta.num_users, meta.num_items);
  if (!any_tag) return ds;

  // Carry the tag of each surviving event over by its (user, item, epoch, day).
  std::map<std::tuple<std::uint32_t, std::uint32_t, int>, Split> tag_of;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    tag_of[{raw[i].user, raw[i].item, raw[i].day}] = tags[i];
  }
  std::vector<Split> out_tags;
  out_tags.reserve(ds.size());
  for (const auto& e : ds.events()) out_tags.push_back(tag_of.at({e.user, e.item, e.day}));
  return ds.with_splits(out_tags);
}

RatingDataset ingest(const std::string& path, const GridConfig& grid) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingArtifact, "cannot open dataset " + path);
  return ingest(in, grid);
}

void write(const RatingDataset& ds, std::ostream& out, bool with_split) {
  const auto& g = ds.grid();
  out << "# tempex-dataset epoch_length_days=" << g.epoch_length_days << " origin_day=" << g.origin_day
      << " num_epochs=" << g.num_epochs << " num_users=" << ds.num_users() << " num_items=" << ds.num_items()
      << "\n";
  out << "user_id,item_id,day,rating" << (with_split ? ",split" : "") << "\n";
  for (const auto& e : ds.events()) {
    out << e.user << ',' << e.item << ',' << e.day << ',' << e.rating;
    if (with_split) out << ',' << (e.is_train() ? "train" : "test");
    out << '\n';
  }
}

void write(const RatingDataset& ds, const std::string& path, bool with_split) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path);
  write(ds, out, with_split);
  if (!out) throw Error(ErrorCode::Io, "write failed for " + path);
}

RatingDataset split(const RatingDataset& ds, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error(ErrorCode::ConfigInvalid, "test_fraction must lie in (0,1)");
  }
  if (ds.size() == 0) throw Error(ErrorCode::EmptyDataset, "cannot split an empty dataset");
  std::mt19937_64 rng(seed);
  std::vector<Split> tags(ds.size(), Split::Train);
  std::vector<std::pair<std::uint64_t, std::uint32_t>> order;  // (tie key, event index)
  for (std::uint32_t u = 0; u < ds.num_users(); ++u) {
    const auto idx = ds.by_user(u);
    const std::size_t n = idx.size();
    if (n < 2) continue;
    order.clear();
    for (std::uint32_t i : idx) order.emplace_back(rng(), i);
    std::sort(order.begin(), order.end(), [&ds](const auto& a, const auto& b) {
      const int da = ds.event(a.second).day, db = ds.event(b.second).day;
      return da != db ? da < db : a.first < b.first;
    });
    // The epsilon keeps exact products (0.5 * 4) from rounding up.
    auto n_test = static_cast<std::size_t>(std::ceil(test_fraction * static_cast<double>(n) - 1e-9));
    n_test = std::min(n_test, n - 1);
    for (std::size_t k = n - n_test; k < n; ++k) tags[order[k].second] = Split::Test;
  }
  return ds.with_splits(tags);
}

RatingDataset holdout_last_train_epoch(const RatingDataset& ds) {
  std::vector<RatingEvent> raw;
  std::vector<int> epochs;
  for (const auto& e : ds.events()) {
    if (e.is_train()) raw.push_back({e.user, e.item, e.day, e.rating});
  }
  if (raw.empty()) throw Error(ErrorCode::EmptyDataset, "no train events to hold out");
  GridConfig grid{ds.grid().epoch_length_days, ds.grid().origin_day, ds.grid().num_epochs};
  RatingDataset train = RatingDataset::from_events(raw, grid, ds.num_users(), ds.num_items());
  std::vector<Split> tags(train.size(), Split::Train);
  for (std::uint32_t u = 0; u < train.num_users(); ++u) {
    const auto idx = train.by_user(u);
    if (idx.empty()) continue;
    const int first = train.event(idx.front()).epoch;
    const int last = train.event(idx.back()).epoch;
    if (first == last) continue;
    for (std::uint32_t i : idx) {
      if (train.event(i).epoch == last) tags[i] = Split::Test;
    }
  }
  return train.with_splits(tags);
}

RatingDataset synth(const SynthConfig& c) {
  if (c.num_users < 1 || c.num_items < 1 || c.num_epochs < 1 || c.rank < 1 || c.epoch_length_days < 1) {
    throw Error(ErrorCode::ConfigInvalid, "synth counts must all be >= 1");
  }
  if (!(c.density > 0.0 && c.density <= 1.0)) throw Error(ErrorCode::ConfigInvalid, "synth density must lie in (0,1]");
  if (c.noise_sd < 0.0 || c.drift < 0.0) throw Error(ErrorCode::ConfigInvalid, "synth noise_sd and drift must be >= 0");

  std::mt19937_64 rng(c.seed);
  const std::size_t k = c.rank;
  const double kd = static_cast<double>(k);
  // Entries in [sqrt(1.5/k), sqrt(5/k)] keep <a, b> inside [1.5, 5].
  std::uniform_real_distribution<double> factor(std::sqrt(1.5 / kd), std::sqrt(5.0 / kd));
  std::normal_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  std::uniform_int_distribution<int> day_in_epoch(0, c.epoch_length_days - 1);

  std::vector<double> user_f(c.num_users * k), item_f(c.num_items * k);
  for (double& v : user_f) v = factor(rng);
  for (double& v : item_f) v = factor(rng);

  std::vector<RatingEvent> raw;
  for (int t = 0; t < c.num_epochs; ++t) {
    if (t > 0 && c.drift > 0.0) {
      for (double& v : user_f) v = std::max(0.0, v + c.drift * unit(rng) / std::sqrt(kd));
    }
    for (std::uint32_t i = 0; i < c.num_users; ++i) {
      for (std::uint32_t j = 0; j < c.num_items; ++j) {
        if (coin(rng) >= c.density) continue;
        double r = 0.0;
        for (std::size_t q = 0; q < k; ++q) r += user_f[i * k + q] * item_f[j * k + q];
        if (c.noise_sd > 0.0) r += c.noise_sd * unit(rng);
        const int rating = std::clamp(static_cast<int>(std::lround(r)), kMinRating, kMaxRating);
        raw.push_back({i, j, t * c.epoch_length_days + day_in_epoch(rng), rating});
      }
    }
  }
  if (raw.empty()) throw Error(ErrorCode::EmptyDataset, "synthetic draw produced no events; raise density");
  return RatingDataset::from_events(raw, GridConfig{c.epoch_length_days, 0, c.num_epochs}, c.num_users, c.num_items);
}

}  // namespace tempex::data
