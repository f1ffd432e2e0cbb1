#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "autows/data_model.hpp"
#include "autows/error.hpp"
#include "autows/lf_engine.hpp"

namespace autows {

// Validation-set quality of one candidate LF. Precision, recall and accuracy
// use only the points the LF votes on; all four are 0 when it never votes.
struct CandidateStats {
  std::string lf_id;
  double coverage = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double accuracy = 0.0;
};

nlohmann::json to_json(const CandidateStats& s);

CandidateStats compute_stats(const LabelingFunction& lf, const DatasetBundle& bundle);

inline constexpr std::size_t kDefaultMinPool = 10;

// max(0.5, 1/C) + 0.1
double default_accuracy_threshold(int classes);

// One unipolar candidate per (class, descriptor), trained on the full labeled
// set with a fitted abstain margin and no selection. Throws
// IncompatibleError("pool_too_small") when fewer than `min_pool` candidates
// can be generated.
LFSet build_pool(const DatasetBundle& bundle, const SynthesisConfig& config, std::size_t min_pool = kDefaultMinPool);

enum class SessionMode { automated, interactive };
enum class Verdict { pending, useful, not_useful };

std::string_view to_string(SessionMode m);
std::string_view to_string(Verdict v);

class SessionError : public Error {
 public:
  enum class Code { unknown_candidate, already_decided, finalized, wrong_mode };
  SessionError(Code code, const std::string& what) : Error(what), code_(code) {}
  Code code() const noexcept { return code_; }

 private:
  Code code_;
};

struct VerdictRecord {
  std::string lf_id;
  bool useful = false;
};

struct SelectionResult {
  LFSet selected;
  bool empty_warning = false;  // no candidate was judged useful
};

// Vetting state over a candidate pool. Candidates are offered by descending
// accuracy * coverage (ties keep pool order); the final set is the useful
// candidates ordered by descending accuracy, then id.
class Session {
 public:
  Session(LFSet pool, std::vector<CandidateStats> stats, SessionMode mode, double accuracy_threshold);

  static Session create(LFSet pool, const DatasetBundle& bundle, SessionMode mode, double accuracy_threshold);

  SessionMode mode() const { return mode_; }
  double accuracy_threshold() const { return threshold_; }
  bool finalized() const { return finalized_; }
  const LFSet& pool() const { return pool_; }
  const std::vector<std::string>& cursor_order() const { return order_; }
  const std::vector<VerdictRecord>& verdict_log() const { return log_; }
  const CandidateStats& stats(const std::string& lf_id) const;
  Verdict verdict(const std::string& lf_id) const;
  std::size_t pending_count() const;

  // Highest-priority pending candidate, or nullopt when none remain.
  std::optional<CandidateStats> next() const;
  void record(const std::string& lf_id, bool useful);
  SelectionResult finalize();

  nlohmann::json state_json() const;

 private:
  std::size_t index_of(const std::string& lf_id) const;
  void require_open() const;

  LFSet pool_;
  std::vector<CandidateStats> stats_;
  std::vector<std::string> order_;
  std::vector<Verdict> verdicts_;
  std::vector<VerdictRecord> log_;
  std::map<std::string, std::size_t> index_;
  SessionMode mode_;
  double threshold_;
  bool finalized_ = false;
};

// Automated rule: useful iff accuracy >= t and coverage > 0.
SelectionResult run_automated(Session& session);

// Applies a recorded verdict log to a fresh session and finalizes it.
SelectionResult replay(Session session, const std::vector<VerdictRecord>& log);

std::string verdict_log_line(const VerdictRecord& r);
std::vector<VerdictRecord> read_verdict_log(const std::filesystem::path& path);

// Thread-safe map of live sessions. Operations on one session are serialized;
// different sessions proceed independently.
class SessionStore {
 public:
  std::string create(Session session);
  bool contains(const std::string& id) const;
  // Runs `fn` with exclusive access to the session; throws SessionError-like
  // autows::Error("unknown session") if absent.
  void with(const std::string& id, const std::function<void(Session&)>& fn);
  std::vector<std::string> ids() const;

 private:
  struct Entry {
    std::mutex mutex;
    Session session;
    explicit Entry(Session s) : session(std::move(s)) {}
  };
  mutable std::mutex mutex_;
  std::map<std::string, std::unique_ptr<Entry>> sessions_;
  std::size_t next_id_ = 1;
};

}  // namespace autows
