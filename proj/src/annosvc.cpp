#include "prefalign/annosvc.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <limits>
#include <tuple>

#include <unistd.h>

#include "json.hpp"
#include "prefalign/dataset_io.hpp"

namespace prefalign {

using nlohmann::json;

std::string_view to_string(TaskKind k) {
  switch (k) {
    case TaskKind::ReadingAccuracy: return "reading_accuracy";
    case TaskKind::NaturalnessCmos: return "naturalness_cmos";
    case TaskKind::SimilarityAb: return "similarity_ab";
  }
  return "?";
}

TaskKind task_kind_from_string(std::string_view s) {
  for (auto k : {TaskKind::ReadingAccuracy, TaskKind::NaturalnessCmos, TaskKind::SimilarityAb})
    if (to_string(k) == s) return k;
  throw ContractViolation("unknown task kind: " + std::string(s));
}

std::string_view to_string(Judgment j) {
  switch (j) {
    case Judgment::NoError: return "no_error";
    case Judgment::HasError: return "has_error";
    case Judgment::A2: return "a2";
    case Judgment::A1: return "a1";
    case Judgment::Tie: return "tie";
    case Judgment::B1: return "b1";
    case Judgment::B2: return "b2";
  }
  return "?";
}

Judgment judgment_from_string(std::string_view s) {
  static const std::pair<std::string_view, Judgment> table[] = {
      {"no_error", Judgment::NoError}, {"has_error", Judgment::HasError}, {"a2", Judgment::A2},
      {"a1", Judgment::A1},           {"tie", Judgment::Tie},            {"b1", Judgment::B1},
      {"b2", Judgment::B2},           {"A+2", Judgment::A2},             {"A+1", Judgment::A1},
      {"Tie", Judgment::Tie},         {"B+1", Judgment::B1},             {"B+2", Judgment::B2}};
  for (const auto& [name, j] : table)
    if (name == s) return j;
  throw ContractViolation("unknown judgment: " + std::string(s));
}

bool legal_for(TaskKind k, Judgment j) {
  const bool binary = j == Judgment::NoError || j == Judgment::HasError;
  return k == TaskKind::ReadingAccuracy ? binary : !binary;
}

Judgment flip(Judgment j) {
  switch (j) {
    case Judgment::A2: return Judgment::B2;
    case Judgment::A1: return Judgment::B1;
    case Judgment::B1: return Judgment::A1;
    case Judgment::B2: return Judgment::A2;
    default: return j;
  }
}

std::string_view to_string(Side s) { return s == Side::Positive ? "positive" : "negative"; }

namespace {

Side side_from_string(std::string_view s) {
  if (s == "positive") return Side::Positive;
  if (s == "negative") return Side::Negative;
  throw ContractViolation("unknown side: " + std::string(s));
}

}  // namespace

std::vector<AnnotationTask> create_tasks(std::size_t n_pairs, TaskKind kind, std::size_t replication, RngStream& rng,
                                         std::uint64_t first_id) {
  require(n_pairs > 0, "create_tasks: no pairs");
  require(replication > 0, "create_tasks: replication must be positive");
  std::vector<AnnotationTask> out;
  std::uint64_t id = first_id;
  for (std::size_t p = 0; p < n_pairs; ++p) {
    for (std::size_t slot = 0; slot < replication; ++slot) {
      if (kind == TaskKind::ReadingAccuracy) {
        for (Side side : {Side::Positive, Side::Negative}) {
          AnnotationTask t;
          t.id = id++;
          t.kind = kind;
          t.pair_index = p;
          t.slot = slot;
          t.side = side;
          t.seed = rng.next_u64();
          out.push_back(t);
        }
      } else {
        AnnotationTask t;
        t.id = id++;
        t.kind = kind;
        t.pair_index = p;
        t.slot = slot;
        t.seed = rng.next_u64();
        t.swapped = (splitmix64(t.seed) >> 63) != 0;
        out.push_back(t);
      }
    }
  }
  return out;
}

namespace {

std::map<std::uint64_t, const AnnotationTask*> index_tasks(const std::vector<AnnotationTask>& tasks) {
  std::map<std::uint64_t, const AnnotationTask*> m;
  for (const auto& t : tasks) m[t.id] = &t;
  return m;
}

const AnnotationTask& lookup(const std::map<std::uint64_t, const AnnotationTask*>& m, std::uint64_t id) {
  auto it = m.find(id);
  require(it != m.end(), "aggregate: record refers to an unknown task");
  return *it->second;
}

double pct(std::size_t k, std::size_t n) {
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : 100.0 * static_cast<double>(k) / static_cast<double>(n);
}

std::size_t bucket_of(Judgment j) {
  switch (j) {
    case Judgment::A2: return 0;
    case Judgment::A1: return 1;
    case Judgment::Tie: return 2;
    case Judgment::B1: return 3;
    case Judgment::B2: return 4;
    default: throw ContractViolation("aggregate: binary judgment on an A/B task");
  }
}

/// Judgment re-expressed with A = the pair's winner.
Judgment oriented(const AnnotationTask& t, Judgment j) { return t.swapped ? flip(j) : j; }

FiveBucket five_bucket(const std::vector<AnnotationRecord>& records, const std::vector<AnnotationTask>& tasks,
                       TaskKind kind) {
  const auto idx = index_tasks(tasks);
  FiveBucket b;
  for (const auto& r : records) {
    const auto& t = lookup(idx, r.task_id);
    if (t.kind != kind) continue;
    ++b.counts[bucket_of(oriented(t, r.judgment))];
    ++b.total;
  }
  for (std::size_t i = 0; i < 5; ++i) b.percent[i] = b.total ? pct(b.counts[i], b.total) : 0.0;
  return b;
}

}  // namespace

ReadingTable aggregate_reading_accuracy(const std::vector<AnnotationRecord>& records,
                                        const std::vector<AnnotationTask>& tasks,
                                        const std::vector<PreferencePair>& pairs) {
  const auto idx = index_tasks(tasks);
  std::map<std::string, ReadingRow> rows;
  for (const auto& r : records) {
    const auto& t = lookup(idx, r.task_id);
    if (t.kind != TaskKind::ReadingAccuracy) continue;
    require(t.pair_index < pairs.size(), "aggregate: task refers to an unknown pair");
    const auto& sm = pairs[t.pair_index].source_models;
    require(!sm.empty(), "aggregate: pair without source model");
    const std::string& model = t.side == Side::Positive ? sm.front() : sm.back();
    auto& row = rows[model];
    row.model = model;
    const bool ok = r.judgment == Judgment::NoError;
    if (t.side == Side::Positive) {
      ++row.positive_n;
      row.positive_ok += ok;
    } else {
      ++row.negative_n;
      row.negative_ok += ok;
    }
  }
  ReadingTable out;
  for (auto& [_, row] : rows) {
    row.positive = pct(row.positive_ok, row.positive_n);
    row.negative = pct(row.negative_ok, row.negative_n);
    row.all = pct(row.positive_ok + row.negative_ok, row.positive_n + row.negative_n);
    out.rows.push_back(row);
  }
  return out;
}

CmosTable aggregate_cmos(const std::vector<AnnotationRecord>& records, const std::vector<AnnotationTask>& tasks,
                         const std::vector<PreferencePair>& pairs, double gap_threshold) {
  CmosTable out;
  out.distribution = five_bucket(records, tasks, TaskKind::NaturalnessCmos);
  const auto idx = index_tasks(tasks);
  auto& a = out.agreement;
  for (const auto& r : records) {
    const auto& t = lookup(idx, r.task_id);
    if (t.kind != TaskKind::NaturalnessCmos) continue;
    require(t.pair_index < pairs.size(), "aggregate: task refers to an unknown pair");
    const auto& p = pairs[t.pair_index];
    if (p.wer_l - p.wer_w < gap_threshold) continue;
    ++a.n;
    const auto b = bucket_of(oriented(t, r.judgment));
    if (b < 2) ++a.winner_n;
    else if (b == 2) ++a.tie_n;
    else ++a.loser_n;
  }
  a.winner = a.n ? pct(a.winner_n, a.n) : 0.0;
  a.tie = a.n ? pct(a.tie_n, a.n) : 0.0;
  a.loser = a.n ? pct(a.loser_n, a.n) : 0.0;
  return out;
}

SimilarityTable aggregate_similarity(const std::vector<AnnotationRecord>& records,
                                     const std::vector<AnnotationTask>& tasks,
                                     const std::vector<PreferencePair>& pairs) {
  SimilarityTable out;
  out.distribution = five_bucket(records, tasks, TaskKind::SimilarityAb);
  const auto idx = index_tasks(tasks);
  for (const auto& r : records) {
    const auto& t = lookup(idx, r.task_id);
    if (t.kind == TaskKind::SimilarityAb)
      require(t.pair_index < pairs.size(), "aggregate: task refers to an unknown pair");
  }
  const auto& c = out.distribution.counts;
  const auto n = out.distribution.total;
  out.win = n ? pct(c[0] + c[1], n) : 0.0;
  out.tie = n ? pct(c[2], n) : 0.0;
  out.lose = n ? pct(c[3] + c[4], n) : 0.0;
  return out;
}

namespace {

json num(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

json five_json(const FiveBucket& b) {
  static const char* names[] = {"A+2", "A+1", "Tie", "B+1", "B+2"};
  json buckets = json::array();
  for (std::size_t i = 0; i < 5; ++i)
    buckets.push_back({{"bucket", names[i]}, {"count", b.counts[i]}, {"percent", num(b.percent[i])}});
  return {{"buckets", buckets}, {"total", b.total}};
}

}  // namespace

std::string to_json(const ReadingTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows)
    rows.push_back({{"model", r.model},
                    {"positive", num(r.positive)},
                    {"negative", num(r.negative)},
                    {"all", num(r.all)},
                    {"positive_n", r.positive_n},
                    {"negative_n", r.negative_n},
                    {"positive_ok", r.positive_ok},
                    {"negative_ok", r.negative_ok}});
  return json{{"kind", "reading"}, {"rows", rows}}.dump();
}

std::string to_json(const CmosTable& t) {
  const auto& a = t.agreement;
  return json{{"kind", "cmos"},
              {"distribution", five_json(t.distribution)},
              {"agreement",
               {{"n", a.n},
                {"winner", a.winner},
                {"tie", a.tie},
                {"loser", a.loser},
                {"winner_n", a.winner_n},
                {"tie_n", a.tie_n},
                {"loser_n", a.loser_n}}}}
      .dump();
}

std::string to_json(const SimilarityTable& t) {
  return json{{"kind", "similarity"},
              {"distribution", five_json(t.distribution)},
              {"win", t.win},
              {"tie", t.tie},
              {"lose", t.lose}}
      .dump();
}

Clock system_clock_ms() {
  return [] {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
  };
}

// ---------------------------------------------------------------------------

namespace {

std::string task_line(const AnnotationTask& t) {
  return json{{"type", "task"},     {"id", t.id},
              {"kind", std::string(to_string(t.kind))},
              {"pair", t.pair_index}, {"slot", t.slot},
              {"side", std::string(to_string(t.side))},
              {"swapped", t.swapped}, {"seed", t.seed}}
      .dump();
}

std::string record_line(const AnnotationRecord& r) {
  return json{{"type", "record"},
              {"task", r.task_id},
              {"session", r.session},
              {"judgment", std::string(to_string(r.judgment))},
              {"ts", r.timestamp_ms}}
      .dump();
}

std::string session_line(const std::string& s) { return json{{"type", "session"}, {"id", s}}.dump(); }

std::string pair_line(std::size_t index, const PreferencePair& p) {
  return "{\"type\":\"pair\",\"index\":" + std::to_string(index) + ",\"pair\":" + pair_to_json(p) + "}";
}

using GroupKey = std::tuple<int, std::size_t, int>;

GroupKey group_of(const AnnotationTask& t) {
  return {static_cast<int>(t.kind), t.pair_index, t.kind == TaskKind::ReadingAccuracy ? static_cast<int>(t.side) : 0};
}

}  // namespace

AnnoStore::AnnoStore(AnnoStoreOptions opts) : opts_(std::move(opts)) {
  if (!opts_.clock) opts_.clock = system_clock_ms();
  require(opts_.quota >= 1, "AnnoStore: quota must be >= 1");
  require(opts_.lease_ms > 0, "AnnoStore: lease must be positive");
  if (!opts_.journal.empty()) {
    if (opts_.journal.has_parent_path()) std::filesystem::create_directories(opts_.journal.parent_path());
    replay();
    journal_ = std::fopen(opts_.journal.c_str(), "ab");
    if (!journal_) throw std::runtime_error("AnnoStore: cannot open journal " + opts_.journal.string());
  }
  publish();
}

AnnoStore::~AnnoStore() {
  if (journal_) std::fclose(journal_);
}

std::int64_t AnnoStore::now() const { return opts_.clock(); }

void AnnoStore::replay() {
  if (!std::filesystem::exists(opts_.journal)) return;
  const std::string text = read_text(opts_.journal);
  std::size_t pos = 0, lineno = 0, good_end = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    ++lineno;
    if (nl == std::string::npos) break;  // torn final write
    const std::string line = text.substr(pos, nl - pos);
    if (!line.empty()) apply_line(line, lineno);
    pos = nl + 1;
    good_end = pos;
  }
  if (good_end < text.size()) std::filesystem::resize_file(opts_.journal, good_end);
}

void AnnoStore::apply_line(const std::string& line, std::size_t lineno) {
  json j;
  try {
    j = json::parse(line);
    const auto type = j.at("type").get<std::string>();
    if (type == "pair") {
      require(j.at("index").get<std::size_t>() == pairs_.size(), "journal: pair index out of order");
      pairs_.push_back(pair_from_json(j.at("pair").dump(), lineno));
    } else if (type == "task") {
      AnnotationTask t;
      t.id = j.at("id").get<std::uint64_t>();
      require(t.id == tasks_.size(), "journal: task id out of order");
      t.kind = task_kind_from_string(j.at("kind").get<std::string>());
      t.pair_index = j.at("pair").get<std::size_t>();
      t.slot = j.at("slot").get<std::size_t>();
      t.side = side_from_string(j.at("side").get<std::string>());
      t.swapped = j.at("swapped").get<bool>();
      t.seed = j.at("seed").get<std::uint64_t>();
      require(t.pair_index < pairs_.size(), "journal: task refers to an unknown pair");
      tasks_.push_back(t);
      task_answers_.push_back(0);
    } else if (type == "session") {
      const auto id = j.at("id").get<std::string>();
      sessions_.push_back(id);
      session_set_.insert(id);
    } else if (type == "record") {
      AnnotationRecord r;
      r.task_id = j.at("task").get<std::uint64_t>();
      r.session = j.at("session").get<std::string>();
      r.judgment = judgment_from_string(j.at("judgment").get<std::string>());
      r.timestamp_ms = j.at("ts").get<std::int64_t>();
      require(r.task_id < tasks_.size(), "journal: record refers to an unknown task");
      records_.push_back(r);
      answered_.insert({r.task_id, r.session});
      ++task_answers_[r.task_id];
      ++group_answers_[group_of(tasks_[r.task_id])];
    } else {
      throw ContractViolation("journal: unknown entry type " + type);
    }
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(lineno, "journal", e.what());
  }
}

void AnnoStore::append(const std::string& line) {
  if (!journal_) return;
  const std::string out = line + "\n";
  if (std::fwrite(out.data(), 1, out.size(), journal_) != out.size() || std::fflush(journal_) != 0)
    throw std::runtime_error("AnnoStore: journal write failed");
  ++appends_since_compaction_;
}

void AnnoStore::publish() {
  StoreSnapshot s;
  s.pairs = std::make_shared<const std::vector<PreferencePair>>(pairs_);
  s.tasks = std::make_shared<const std::vector<AnnotationTask>>(tasks_);
  s.records = std::make_shared<const std::vector<AnnotationRecord>>(records_);
  s.sessions = std::make_shared<const std::vector<std::string>>(sessions_);
  std::unique_lock lock(snap_mutex_);
  snap_ = std::move(s);
}

StoreSnapshot AnnoStore::snapshot() const {
  std::shared_lock lock(snap_mutex_);
  return snap_;
}

void AnnoStore::maybe_compact() {
  if (journal_ && opts_.compact_every > 0 && appends_since_compaction_ >= opts_.compact_every) compact_locked();
}

std::string AnnoStore::render_journal(const StoreSnapshot& s) const {
  std::string out;
  for (std::size_t i = 0; i < s.pairs->size(); ++i) out += pair_line(i, (*s.pairs)[i]) + "\n";
  for (const auto& t : *s.tasks) out += task_line(t) + "\n";
  for (const auto& id : *s.sessions) out += session_line(id) + "\n";
  for (const auto& r : *s.records) out += record_line(r) + "\n";
  return out;
}

std::string AnnoStore::export_journal() const { return render_journal(snapshot()); }

void AnnoStore::compact_locked() {
  if (!journal_) return;
  const std::string text = render_journal(snapshot());
  const auto tmp = opts_.journal.string() + ".tmp";
  std::FILE* f = std::fopen(tmp.c_str(), "wb");
  if (!f) throw std::runtime_error("AnnoStore: cannot open " + tmp);
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size() && std::fflush(f) == 0 &&
                  ::fsync(fileno(f)) == 0;
  std::fclose(f);
  if (!ok) throw std::runtime_error("AnnoStore: compaction write failed");
  std::fclose(journal_);
  journal_ = nullptr;
  std::filesystem::rename(tmp, opts_.journal);
  journal_ = std::fopen(opts_.journal.c_str(), "ab");
  if (!journal_) throw std::runtime_error("AnnoStore: cannot reopen journal");
  appends_since_compaction_ = 0;
}

void AnnoStore::compact() {
  std::lock_guard lock(writer_);
  compact_locked();
}

std::size_t AnnoStore::appends_since_compaction() const {
  std::lock_guard lock(writer_);
  return appends_since_compaction_;
}

void AnnoStore::add_pairs(const std::vector<PreferencePair>& pairs) {
  std::lock_guard lock(writer_);
  for (const auto& p : pairs) {
    const std::string line = pair_line(pairs_.size(), p);
    append(line);
    pairs_.push_back(pair_from_json(json::parse(line).at("pair").dump()));
  }
  publish();
  maybe_compact();
}

std::vector<AnnotationTask> AnnoStore::add_tasks(TaskKind kind, std::size_t replication, std::uint64_t seed) {
  std::lock_guard lock(writer_);
  RngStream rng(seed, static_cast<std::uint64_t>(kind));
  auto tasks = create_tasks(pairs_.size(), kind, replication, rng, tasks_.size());
  for (const auto& t : tasks) {
    append(task_line(t));
    tasks_.push_back(t);
    task_answers_.push_back(0);
  }
  publish();
  maybe_compact();
  return tasks;
}

std::string AnnoStore::new_session() {
  std::lock_guard lock(writer_);
  char buf[24];
  std::string id;
  for (std::uint64_t k = sessions_.size();; ++k) {
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(splitmix64(opts_.seed ^ splitmix64(k + 1))));
    id = buf;
    if (!session_set_.count(id)) break;
  }
  append(session_line(id));
  sessions_.push_back(id);
  session_set_.insert(id);
  publish();
  maybe_compact();
  return id;
}

std::optional<AnnotationTask> AnnoStore::next_task(const std::string& session) {
  std::lock_guard lock(writer_);
  if (!session_set_.count(session)) throw AnnoError(AnnoError::Code::NotFound, "unknown session");
  const std::int64_t t_now = now();

  std::set<GroupKey> blocked;
  for (const auto& [task, s] : answered_)
    if (s == session) blocked.insert(group_of(tasks_[task]));

  std::map<std::uint64_t, std::size_t> active;  // task -> live leases
  for (const auto& [task, lease] : leases_) {
    if (lease.expires <= t_now) continue;
    if (lease.session == session && task_answers_[task] < opts_.quota) return tasks_[task];
    ++active[task];
  }

  const AnnotationTask* best = nullptr;
  std::size_t best_load = 0;
  for (const auto& t : tasks_) {
    const auto lease_it = active.find(t.id);
    const std::size_t leased = lease_it == active.end() ? 0 : lease_it->second;
    if (task_answers_[t.id] + leased >= opts_.quota) continue;
    if (answered_.count({t.id, session})) continue;
    const auto g = group_of(t);
    if (blocked.count(g)) continue;
    const auto ga = group_answers_.find(g);
    const std::size_t load = ga == group_answers_.end() ? 0 : ga->second;
    if (!best || load < best_load) {
      best = &t;
      best_load = load;
    }
  }
  if (!best) return std::nullopt;
  leases_[best->id] = Lease{session, t_now + opts_.lease_ms};
  return *best;
}

void AnnoStore::submit(std::uint64_t task_id, const std::string& session, Judgment judgment) {
  std::lock_guard lock(writer_);
  if (!session_set_.count(session)) throw AnnoError(AnnoError::Code::NotFound, "unknown session");
  if (task_id >= tasks_.size()) throw AnnoError(AnnoError::Code::NotFound, "unknown task");
  const auto& t = tasks_[task_id];
  if (!legal_for(t.kind, judgment))
    throw AnnoError(AnnoError::Code::Unprocessable,
                    "judgment " + std::string(to_string(judgment)) + " is not legal for " + std::string(to_string(t.kind)));
  if (answered_.count({task_id, session}))
    throw AnnoError(AnnoError::Code::Conflict, "task already answered by this session");
  if (task_answers_[task_id] >= opts_.quota) throw AnnoError(AnnoError::Code::Conflict, "task quota reached");
  const std::int64_t t_now = now();
  if (auto it = leases_.find(task_id); it != leases_.end() && it->second.expires > t_now && it->second.session != session)
    throw AnnoError(AnnoError::Code::Conflict, "task is leased to another session");

  AnnotationRecord r{task_id, session, judgment, t_now};
  append(record_line(r));
  records_.push_back(r);
  answered_.insert({task_id, session});
  ++task_answers_[task_id];
  ++group_answers_[group_of(t)];
  if (auto it = leases_.find(task_id); it != leases_.end() && it->second.session == session) leases_.erase(it);
  publish();
  maybe_compact();
}

std::vector<std::uint64_t> AnnoStore::under_replicated() const {
  const auto s = snapshot();
  std::vector<std::size_t> answers(s.tasks->size(), 0);
  for (const auto& r : *s.records) ++answers[r.task_id];
  std::vector<std::uint64_t> out;
  for (const auto& t : *s.tasks)
    if (answers[t.id] < opts_.quota) out.push_back(t.id);
  return out;
}

ReadingTable AnnoStore::reading() const {
  const auto s = snapshot();
  return aggregate_reading_accuracy(*s.records, *s.tasks, *s.pairs);
}

CmosTable AnnoStore::cmos() const {
  const auto s = snapshot();
  return aggregate_cmos(*s.records, *s.tasks, *s.pairs, opts_.gap_threshold);
}

SimilarityTable AnnoStore::similarity() const {
  const auto s = snapshot();
  return aggregate_similarity(*s.records, *s.tasks, *s.pairs);
}

namespace {

json sample_json(const SpeechSample& y) {
  json j = {{"kind", std::string(to_string(y.kind))}};
  if (y.kind == SampleKind::Discrete) {
    j["tokens"] = y.tokens;
  } else {
    json frames = json::array();
    for (const auto& f : y.frames) frames.push_back({f[0], f[1]});
    j["frames"] = frames;
  }
  return j;
}

}  // namespace

std::string AnnoStore::task_json(const AnnotationTask& t) const {
  const auto s = snapshot();
  require(t.pair_index < s.pairs->size(), "task_json: unknown pair");
  const auto& p = (*s.pairs)[t.pair_index];
  const Domain& d = opts_.channel.domain;
  json j = {{"task_id", t.id},
            {"kind", std::string(to_string(t.kind))},
            {"prompt_text", render_text(p.prompt.text, d)},
            {"speaker", p.prompt.speaker}};
  if (t.kind == TaskKind::ReadingAccuracy) {
    j["sample"] = sample_json(t.side == Side::Positive ? p.winner : p.loser);
    j["choices"] = {"no_error", "has_error"};
  } else {
    const auto& a = t.swapped ? p.loser : p.winner;
    const auto& b = t.swapped ? p.winner : p.loser;
    j["sample_a"] = sample_json(a);
    j["sample_b"] = sample_json(b);
    j["choices"] = {"a2", "a1", "tie", "b1", "b2"};
    if (t.kind == TaskKind::SimilarityAb)
      j["reference"] = sample_json(render_reference(words_only(p.prompt.text, d), p.prompt.speaker, opts_.channel,
                                                    p.winner.kind));
  }
  return j.dump();
}

}  // namespace prefalign
