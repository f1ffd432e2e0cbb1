#include "autows/iws_engine.hpp"

#include <algorithm>
#include <fstream>

#include "autows/error.hpp"

namespace autows {

nlohmann::json to_json(const CandidateStats& s) {
  return {{"lf_id", s.lf_id},
          {"coverage", s.coverage},
          {"precision", s.precision},
          {"recall", s.recall},
          {"accuracy", s.accuracy}};
}

CandidateStats compute_stats(const LabelingFunction& lf, const DatasetBundle& bundle) {
  const std::vector<int> votes = lf_votes(lf, bundle.val_features.values());
  const auto& gold = bundle.val_labels.values;
  CandidateStats s;
  s.lf_id = lf.id;
  if (gold.empty()) return s;

  std::vector<char> covered(gold.size(), 0);
  double n_covered = 0.0, correct = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (votes[i] == kAbstain) continue;
    covered[i] = 1;
    n_covered += 1.0;
    if (votes[i] == gold[i]) correct += 1.0;
  }
  if (n_covered == 0.0) return s;
  s.coverage = n_covered / static_cast<double>(gold.size());
  s.accuracy = correct / n_covered;

  if (lf.polarity == Polarity::unipolar) {
    double positives = 0.0;
    for (int g : gold) positives += g == lf.target_class ? 1.0 : 0.0;
    // Every covered vote is for the target class, so true positives = correct.
    s.precision = correct / n_covered;
    s.recall = positives == 0.0 ? 0.0 : correct / positives;
  } else {
    std::vector<int> pred(votes.begin(), votes.end());
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (!covered[i]) pred[i] = 0;
    }
    s.precision = score(Metric::precision, pred, gold, covered, bundle.classes());
    s.recall = score(Metric::recall, pred, gold, covered, bundle.classes());
  }
  return s;
}

double default_accuracy_threshold(int classes) {
  return std::max(0.5, 1.0 / static_cast<double>(classes)) + 0.1;
}

LFSet build_pool(const DatasetBundle& bundle, const SynthesisConfig& config, std::size_t min_pool) {
  if (bundle.val_labels.size() == 0) throw Error("empty validation labels");
  const Matrix& x = bundle.val_features.values();
  const auto candidates = generate_candidates(x.cols(), config);
  const int classes = bundle.classes();
  const std::size_t planned = candidates.size() * static_cast<std::size_t>(classes);
  if (planned < min_pool) {
    throw IncompatibleError("pool_too_small", "candidate pool of " + std::to_string(planned) +
                                                  " is below the minimum of " + std::to_string(min_pool) +
                                                  " for a " + std::to_string(x.cols()) + "-dimensional representation");
  }

  LFSet pool;
  pool.classes = classes;
  pool.config = to_json(config);
  pool.config["polarity"] = "unipolar";
  pool.config["min_pool"] = min_pool;

  const auto& y = bundle.val_labels.values;
  for (int c = 0; c < classes; ++c) {
    std::vector<int> binary(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) binary[i] = y[i] == c ? 1 : 0;
    for (const auto& cand : candidates) {
      const Matrix xr = restrict_columns(x, cand.subset);
      WeakLearner learner;
      try {
        learner = train_candidate(cand, xr, binary, 2, config);
      } catch (const Error&) {
        continue;
      }
      const AbstainFit fit = fit_abstain_margin(predict_proba(learner, xr), binary, config.threshold_weights);
      pool.lfs.push_back(LabelingFunction{"c" + std::to_string(c) + "-" + cand.label(), std::move(learner),
                                          Polarity::unipolar, c, fit.beta});
    }
  }
  if (pool.lfs.size() < min_pool) {
    throw IncompatibleError("pool_too_small", "only " + std::to_string(pool.lfs.size()) +
                                                  " candidates could be trained (minimum " +
                                                  std::to_string(min_pool) + ")");
  }
  return pool;
}

std::string_view to_string(SessionMode m) { return m == SessionMode::automated ? "automated" : "interactive"; }

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::pending: return "pending";
    case Verdict::useful: return "useful";
    case Verdict::not_useful: return "not_useful";
  }
  return "?";
}

Session::Session(LFSet pool, std::vector<CandidateStats> stats, SessionMode mode, double accuracy_threshold)
    : pool_(std::move(pool)), stats_(std::move(stats)), mode_(mode), threshold_(accuracy_threshold) {
  if (stats_.size() != pool_.lfs.size()) throw Error("stats do not match candidate pool");
  for (std::size_t i = 0; i < pool_.lfs.size(); ++i) {
    const auto& id = pool_.lfs[i].id;
    if (stats_[i].lf_id != id) throw Error("stats order does not match candidate pool");
    if (!index_.emplace(id, i).second) throw Error("duplicate candidate id: " + id);
    order_.push_back(id);
  }
  verdicts_.assign(pool_.lfs.size(), Verdict::pending);
}

Session Session::create(LFSet pool, const DatasetBundle& bundle, SessionMode mode, double accuracy_threshold) {
  std::vector<CandidateStats> stats;
  stats.reserve(pool.lfs.size());
  for (const auto& lf : pool.lfs) stats.push_back(compute_stats(lf, bundle));
  return Session(std::move(pool), std::move(stats), mode, accuracy_threshold);
}

std::size_t Session::index_of(const std::string& lf_id) const {
  const auto it = index_.find(lf_id);
  if (it == index_.end()) throw SessionError(SessionError::Code::unknown_candidate, "unknown candidate: " + lf_id);
  return it->second;
}

void Session::require_open() const {
  if (finalized_) throw SessionError(SessionError::Code::finalized, "session already finalized");
}

const CandidateStats& Session::stats(const std::string& lf_id) const { return stats_[index_of(lf_id)]; }

Verdict Session::verdict(const std::string& lf_id) const { return verdicts_[index_of(lf_id)]; }

std::size_t Session::pending_count() const {
  return static_cast<std::size_t>(std::count(verdicts_.begin(), verdicts_.end(), Verdict::pending));
}

std::optional<CandidateStats> Session::next() const {
  require_open();
  std::optional<std::size_t> best;
  double best_priority = -1.0;
  for (std::size_t i = 0; i < stats_.size(); ++i) {
    if (verdicts_[i] != Verdict::pending) continue;
    const double priority = stats_[i].accuracy * stats_[i].coverage;
    if (!best || priority > best_priority) {
      best = i;
      best_priority = priority;
    }
  }
  if (!best) return std::nullopt;
  return stats_[*best];
}

void Session::record(const std::string& lf_id, bool useful) {
  require_open();
  const std::size_t i = index_of(lf_id);
  if (verdicts_[i] != Verdict::pending) {
    throw SessionError(SessionError::Code::already_decided, "already decided: " + lf_id);
  }
  verdicts_[i] = useful ? Verdict::useful : Verdict::not_useful;
  log_.push_back({lf_id, useful});
}

SelectionResult Session::finalize() {
  require_open();
  finalized_ = true;
  std::vector<std::size_t> chosen;
  for (std::size_t i = 0; i < verdicts_.size(); ++i) {
    if (verdicts_[i] == Verdict::useful) chosen.push_back(i);
  }
  std::sort(chosen.begin(), chosen.end(), [&](std::size_t a, std::size_t b) {
    if (stats_[a].accuracy != stats_[b].accuracy) return stats_[a].accuracy > stats_[b].accuracy;
    return pool_.lfs[a].id < pool_.lfs[b].id;
  });
  SelectionResult result;
  result.selected.classes = pool_.classes;
  result.selected.config = pool_.config;
  result.selected.config["selection"] = std::string(to_string(mode_));
  result.selected.config["accuracy_threshold"] = threshold_;
  for (std::size_t i : chosen) result.selected.lfs.push_back(pool_.lfs[i]);
  result.empty_warning = chosen.empty();
  return result;
}

nlohmann::json Session::state_json() const {
  nlohmann::json log = nlohmann::json::array();
  for (const auto& r : log_) log.push_back({{"lf_id", r.lf_id}, {"useful", r.useful}});
  nlohmann::json candidates = nlohmann::json::array();
  for (std::size_t i = 0; i < stats_.size(); ++i) {
    auto c = to_json(stats_[i]);
    c["verdict"] = std::string(to_string(verdicts_[i]));
    c["target_class"] = pool_.lfs[i].target_class;
    c["learner"] = std::string(to_string(pool_.lfs[i].learner.kind));
    candidates.push_back(std::move(c));
  }
  return {{"mode", std::string(to_string(mode_))},
          {"accuracy_threshold", threshold_},
          {"finalized", finalized_},
          {"pending", pending_count()},
          {"decided", log_.size()},
          {"verdicts", log},
          {"candidates", candidates}};
}

SelectionResult run_automated(Session& session) {
  if (session.mode() != SessionMode::automated) {
    throw SessionError(SessionError::Code::wrong_mode, "run_automated requires an automated session");
  }
  for (const auto& id : session.cursor_order()) {
    if (session.verdict(id) != Verdict::pending) continue;
    const auto& s = session.stats(id);
    session.record(id, s.coverage > 0.0 && s.accuracy >= session.accuracy_threshold());
  }
  return session.finalize();
}

SelectionResult replay(Session session, const std::vector<VerdictRecord>& log) {
  for (const auto& r : log) session.record(r.lf_id, r.useful);
  return session.finalize();
}

std::string verdict_log_line(const VerdictRecord& r) {
  return nlohmann::json{{"lf_id", r.lf_id}, {"useful", r.useful}}.dump();
}

std::vector<VerdictRecord> read_verdict_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open verdict log: " + path.string());
  std::vector<VerdictRecord> out;
  std::string line;
  std::size_t ln = 0;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.at("lf_id").get<std::string>(), j.at("useful").get<bool>()});
    } catch (const nlohmann::json::exception& e) {
      throw Error(path.string() + ":" + std::to_string(ln) + ": " + e.what());
    }
  }
  return out;
}

std::string SessionStore::create(Session session) {
  std::lock_guard lock(mutex_);
  std::string id = "s" + std::to_string(next_id_++);
  sessions_.emplace(id, std::make_unique<Entry>(std::move(session)));
  return id;
}

bool SessionStore::contains(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return sessions_.count(id) != 0;
}

void SessionStore::with(const std::string& id, const std::function<void(Session&)>& fn) {
  Entry* entry = nullptr;
  {
    std::lock_guard lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error("unknown session: " + id);
    entry = it->second.get();
  }
  std::lock_guard lock(entry->mutex);
  fn(entry->session);
}

std::vector<std::string> SessionStore::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, entry] : sessions_) out.push_back(id);
  return out;
}

}  // namespace autows
