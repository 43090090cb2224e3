#pragma once

#include <array>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <vector>

#include "prefalign/channel.hpp"
#include "prefalign/pairgen.hpp"
#include "prefalign/rng.hpp"

namespace prefalign {

enum class TaskKind { ReadingAccuracy, NaturalnessCmos, SimilarityAb };
std::string_view to_string(TaskKind k);
TaskKind task_kind_from_string(std::string_view s);

/// Wire names: no_error, has_error, a2, a1, tie, b1, b2 ("A+2" style is also accepted).
enum class Judgment { NoError, HasError, A2, A1, Tie, B1, B2 };
std::string_view to_string(Judgment j);
Judgment judgment_from_string(std::string_view s);
bool legal_for(TaskKind k, Judgment j);
/// Swaps the A and B sides of a five-point judgment; binary judgments are unchanged.
Judgment flip(Judgment j);

enum class Side { Positive, Negative };
std::string_view to_string(Side s);

struct AnnotationTask {
  std::uint64_t id = 0;
  TaskKind kind = TaskKind::NaturalnessCmos;
  std::size_t pair_index = 0;
  std::size_t slot = 0;
  Side side = Side::Positive;  // reading accuracy only: which sample of the pair is shown
  bool swapped = false;        // A/B tasks: true when A shows the loser
  std::uint64_t seed = 0;      // randomization seed the A/B order was derived from

  friend bool operator==(const AnnotationTask&, const AnnotationTask&) = default;
};

struct AnnotationRecord {
  std::uint64_t task_id = 0;
  std::string session;
  Judgment judgment = Judgment::Tie;
  std::int64_t timestamp_ms = 0;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

inline constexpr std::size_t kDefaultReplication = 3;

/// A/B tasks: one per pair per replication slot. Reading-accuracy tasks show one
/// sample, so each slot yields a positive-side and a negative-side task.
std::vector<AnnotationTask> create_tasks(std::size_t n_pairs, TaskKind kind, std::size_t replication, RngStream& rng,
                                         std::uint64_t first_id = 0);

struct ReadingRow {
  std::string model;
  std::size_t positive_n = 0, positive_ok = 0;
  std::size_t negative_n = 0, negative_ok = 0;
  /// Percent of no_error judgments; NaN when the side has no records.
  double positive = 0.0, negative = 0.0, all = 0.0;
};

struct ReadingTable {
  std::vector<ReadingRow> rows;  // sorted by model id
};

ReadingTable aggregate_reading_accuracy(const std::vector<AnnotationRecord>& records,
                                        const std::vector<AnnotationTask>& tasks,
                                        const std::vector<PreferencePair>& pairs);

/// Buckets ordered {A+2, A+1, Tie, B+1, B+2} with A the pair's automatic (lower-WER) winner.
struct FiveBucket {
  std::array<std::size_t, 5> counts{};
  std::array<double, 5> percent{};
  std::size_t total = 0;
};

struct Agreement {
  std::size_t n = 0;
  std::size_t winner_n = 0, tie_n = 0, loser_n = 0;
  double winner = 0.0, tie = 0.0, loser = 0.0;  // percent
};

struct CmosTable {
  FiveBucket distribution;
  /// Restricted to pairs with wer_l - wer_w >= gap threshold.
  Agreement agreement;
};

CmosTable aggregate_cmos(const std::vector<AnnotationRecord>& records, const std::vector<AnnotationTask>& tasks,
                         const std::vector<PreferencePair>& pairs, double gap_threshold = kDefaultGapThreshold);

struct SimilarityTable {
  FiveBucket distribution;
  double win = 0.0, tie = 0.0, lose = 0.0;  // percent, from the winner sample's perspective
};

SimilarityTable aggregate_similarity(const std::vector<AnnotationRecord>& records,
                                     const std::vector<AnnotationTask>& tasks,
                                     const std::vector<PreferencePair>& pairs);

std::string to_json(const ReadingTable& t);
std::string to_json(const CmosTable& t);
std::string to_json(const SimilarityTable& t);

class AnnoError : public std::runtime_error {
 public:
  enum class Code { NotFound = 404, Conflict = 409, Unprocessable = 422, BadRequest = 400 };
  AnnoError(Code c, const std::string& what) : std::runtime_error(what), code(c) {}
  Code code;
};

/// Milliseconds since an arbitrary epoch.
using Clock = std::function<std::int64_t()>;
Clock system_clock_ms();

inline constexpr std::int64_t kDefaultLeaseMs = 15 * 60 * 1000;
inline constexpr std::size_t kDefaultCompactEvery = 1000;

struct AnnoStoreOptions {
  std::filesystem::path journal;  // empty keeps everything in memory
  std::size_t compact_every = kDefaultCompactEvery;
  std::int64_t lease_ms = kDefaultLeaseMs;
  std::size_t quota = 1;  // answers per task
  double gap_threshold = kDefaultGapThreshold;
  std::uint64_t seed = 0;
  Clock clock;
  ChannelSpec channel;
};

/// Immutable view handed to readers; writers publish a new one after each mutation.
struct StoreSnapshot {
  std::shared_ptr<const std::vector<PreferencePair>> pairs;
  std::shared_ptr<const std::vector<AnnotationTask>> tasks;
  std::shared_ptr<const std::vector<AnnotationRecord>> records;
  std::shared_ptr<const std::vector<std::string>> sessions;
};

/// Journal-backed annotation state. All mutations (including leases) go through one
/// writer mutex and are appended to the journal before they become visible.
class AnnoStore {
 public:
  explicit AnnoStore(AnnoStoreOptions opts);
  ~AnnoStore();
  AnnoStore(const AnnoStore&) = delete;
  AnnoStore& operator=(const AnnoStore&) = delete;

  /// Pairs are stored as they read back from the journal.
  void add_pairs(const std::vector<PreferencePair>& pairs);
  /// Tasks over every stored pair; ids continue after the existing tasks.
  std::vector<AnnotationTask> add_tasks(TaskKind kind, std::size_t replication, std::uint64_t seed);

  std::string new_session();
  /// Unanswered, unleased task for `session` whose (kind, pair, side) group has the
  /// fewest answers, ties to the lowest id; the session never gets two tasks of one
  /// group. A session polling again gets its current lease back.
  std::optional<AnnotationTask> next_task(const std::string& session);
  void submit(std::uint64_t task_id, const std::string& session, Judgment judgment);

  StoreSnapshot snapshot() const;
  /// Compacted journal text of the current snapshot.
  std::string export_journal() const;
  void compact();
  std::vector<std::uint64_t> under_replicated() const;
  std::size_t appends_since_compaction() const;

  ReadingTable reading() const;
  CmosTable cmos() const;
  SimilarityTable similarity() const;
  /// Task plus display payload (prompt text, sample arrays in A/B order, reference).
  std::string task_json(const AnnotationTask& t) const;

  const AnnoStoreOptions& options() const noexcept { return opts_; }

 private:
  struct Lease {
    std::string session;
    std::int64_t expires = 0;
  };

  void replay();
  void apply_line(const std::string& line, std::size_t lineno);
  void append(const std::string& line);
  void publish();
  void maybe_compact();
  void compact_locked();
  std::string render_journal(const StoreSnapshot& s) const;
  std::int64_t now() const;

  AnnoStoreOptions opts_;
  mutable std::mutex writer_;
  mutable std::shared_mutex snap_mutex_;
  StoreSnapshot snap_;

  // writer-owned state
  std::vector<PreferencePair> pairs_;
  std::vector<AnnotationTask> tasks_;
  std::vector<AnnotationRecord> records_;
  std::vector<std::string> sessions_;
  std::set<std::string> session_set_;
  std::set<std::pair<std::uint64_t, std::string>> answered_;
  std::vector<std::size_t> task_answers_;
  std::map<std::tuple<int, std::size_t, int>, std::size_t> group_answers_;
  std::map<std::uint64_t, Lease> leases_;
  std::FILE* journal_ = nullptr;
  std::size_t appends_since_compaction_ = 0;
};

}  // namespace prefalign
