/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, TempEx contributors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tempex::data {

constexpr int kMinRating = 1;
constexpr int kMaxRating = 5;

/// One raw (user, item, day, rating) observation.
struct RatingEvent {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  std::int32_t day = 0;
  std::int32_t rating = 0;

  friend bool operator==(const RatingEvent&, const RatingEvent&) = default;
};

enum class Split : std::uint8_t { Train, Test };

/// A RatingEvent after epoch binning, with its split tag.
struct Event {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  std::int32_t day = 0;
  std::int32_t rating = 0;
  std::int32_t epoch = 0;
  Split split = Split::Train;

  bool is_train() const noexcept { return split == Split::Train; }
  friend bool operator==(const Event&, const Event&) = default;
};

struct EpochGrid {
  int epoch_length_days = 30;
  int origin_day = 0;
  int num_epochs = 1;

  int epoch_of(int day) const noexcept;
  friend bool operator==(const EpochGrid&, const EpochGrid&) = default;
};

/// Unset fields are taken from a dataset file's metadata line if present,
/// otherwise: epoch length 30 days, origin at the earliest day, and just
/// enough epochs to hold the latest day.
struct GridConfig {
  std::optional<int> epoch_length_days;
  std::optional<int> origin_day;
  std::optional<int> num_epochs;
};

/// Immutable, epoch-binned rating store indexed by user and by item.
///
/// Events are kept sorted by (user, epoch, item), which is also a unique key:
/// duplicates of one (user, item, epoch) are resolved at construction by
/// keeping the one with the latest day (the later input wins a same-day tie).
class RatingDataset {
 public:
  RatingDataset() = default;

  /// Bins raw events on the grid described by `grid`. Dimensions default to
  /// max id + 1 and may only be enlarged by the explicit arguments.
  static RatingDataset from_events(std::span<const RatingEvent> raw, const GridConfig& grid,
                                   std::size_t num_users = 0, std::size_t num_items = 0);

  /// Same events with new split tags (one per event, in events() order).
  RatingDataset with_splits(std::span<const Split> tags) const;

  std::span<const Event> events() const noexcept { return events_; }
  const Event& event(std::size_t index) const { return events_[index]; }
  std::size_t size() const noexcept { return events_.size(); }

  /// Event indices for a user, ordered by (epoch, item).
  std::span<const std::uint32_t> by_user(std::uint32_t user) const;
  /// Event indices for an item, ordered by (epoch, user).
  std::span<const std::uint32_t> by_item(std::uint32_t item) const;

  std::size_t num_users() const noexcept { return num_users_; }
  std::size_t num_items() const noexcept { return num_items_; }
  int num_epochs() const noexcept { return grid_.num_epochs; }
  const EpochGrid& grid() const noexcept { return grid_; }

  /// Train-split rating of (user, item) at an epoch, if any.
  std::optional<int> train_rating(std::uint32_t user, std::uint32_t item, int epoch) const;

  std::size_t count(Split split) const noexcept;
  /// Latest epoch holding a train event (-1 if there is none).
  int last_train_epoch() const noexcept;
  /// Latest day holding a train event (-1 if there is none).
  int last_train_day() const noexcept;
  double train_mean() const;

  friend bool operator==(const RatingDataset& a, const RatingDataset& b) {
    return a.events_ == b.events_ && a.grid_ == b.grid_ && a.num_users_ == b.num_users_ &&
           a.num_items_ == b.num_items_;
  }

 private:
  void build_indices();

  std::vector<Event> events_;
  EpochGrid grid_;
  std::size_t num_users_ = 0;
  std::size_t num_items_ = 0;
  std::vector<std::uint32_t> user_offsets_;
  std::vector<std::uint32_t> item_offsets_;
  std::vector<std::uint32_t> user_index_;
  std::vector<std::uint32_t> item_index_;
};

/// Reads delimited `user_id,item_id,day,rating[,train|test]` text. Commas or
/// tabs separate fields; a non-numeric first line is taken as a header and
/// `#` lines are comments, except a `# tempex-dataset key=value ...` line
/// which supplies grid and dimension defaults.
RatingDataset ingest(const std::string& path, const GridConfig& grid = {});
RatingDataset ingest(std::istream& in, const GridConfig& grid = {});

/// Writes a metadata line, a header and one row per event. The split column
/// is included when `with_split` is set.
void write(const RatingDataset& ds, std::ostream& out, bool with_split = true);
void write(const RatingDataset& ds, const std::string& path, bool with_split = true);

/// Per-user temporal holdout: the chronologically last ceil(fraction * n)
/// events of each user become test, keeping at least one train event for
/// every user with two or more events. The seed only orders same-day events.
RatingDataset split(const RatingDataset& ds, double test_fraction, std::uint64_t seed);

/// Drops test events and retags each user's events in their last train epoch
/// as test, provided the user has train events in an earlier epoch too.
RatingDataset holdout_last_train_epoch(const RatingDataset& ds);

struct SynthConfig {
  std::size_t num_users = 50;
  std::size_t num_items = 40;
  int num_epochs = 6;
  std::uint64_t seed = 1;
  double noise_sd = 0.25;
  /// Probability that a given (user, item, epoch) is observed.
  double density = 0.2;
  std::size_t rank = 2;
  /// Per-epoch random-walk step of user factors.
  double drift = 0.05;
  int epoch_length_days = 30;
};

/// Planted low-rank ratings r = clamp(round(<a_i(t), b_j> + noise), 1, 5)
/// with slowly drifting user factors a_i(t). All events are tagged train.
RatingDataset synth(const SynthConfig& config);

}  // namespace tempex::data
