#include <doctest.h>

#include <fstream>
#include <set>
#include <thread>

#include "autows/error.hpp"
#include "autows/iws_engine.hpp"
#include "synth.hpp"

using namespace autows;
using namespace autows::testing;

namespace {

LabelingFunction constant_lf(const std::string& id, int target) {
  // A stump whose both leaves say "target" (class 1 of the binary learner).
  return LabelingFunction{id, WeakLearner{LearnerKind::stump, {0}, 2, StumpParams{0, 0.0, 1, 1}}, Polarity::unipolar,
                          target, 0.0};
}

Session hand_session(const std::vector<std::tuple<std::string, double, double>>& spec, SessionMode mode, double t) {
  LFSet pool;
  pool.classes = 2;
  std::vector<CandidateStats> stats;
  for (const auto& [id, coverage, accuracy] : spec) {
    pool.lfs.push_back(constant_lf(id, 0));
    stats.push_back(CandidateStats{id, coverage, accuracy, 0.5, accuracy});
  }
  return Session(std::move(pool), std::move(stats), mode, t);
}

DatasetBundle blob_bundle(int classes, Eigen::Index d, std::uint64_t seed) {
  BundleSpec spec;
  spec.classes = classes;
  spec.train = blobs(200, d, classes, 2.0, 1.0, seed);
  spec.val = blobs(100, d, classes, 2.0, 1.0, seed + 1);
  return make_bundle(spec);
}

SynthesisConfig stumps() {
  SynthesisConfig c;
  c.kinds = {LearnerKind::stump};
  return c;
}

}  // namespace

TEST_CASE("pool sizes follow candidates times classes") {
  CHECK(build_pool(blob_bundle(10, 20, 1), stumps()).lfs.size() == 200);
  SynthesisConfig capped = stumps();
  capped.cardinality = 2;
  capped.max_candidates = 5;
  CHECK(build_pool(blob_bundle(3, 6, 2), capped).lfs.size() <= 15);
  try {
    build_pool(blob_bundle(2, 2, 3), stumps());
    FAIL("expected pool_too_small");
  } catch (const IncompatibleError& e) {
    CHECK(e.code() == "pool_too_small");
  }
  CHECK(default_accuracy_threshold(2) == doctest::Approx(0.6));
  CHECK(default_accuracy_threshold(10) == doctest::Approx(0.6));
}

TEST_CASE("stats of an abstaining LF are zero") {
  const DatasetBundle b = blob_bundle(2, 2, 4);
  LabelingFunction lf{"never", WeakLearner{LearnerKind::logistic, {0}, 2, LogisticParams{Matrix::Zero(2, 2)}},
                      Polarity::unipolar, 1, 0.1};
  const CandidateStats s = compute_stats(lf, b);
  CHECK(s.coverage == 0.0);
  CHECK(s.accuracy == 0.0);
  CHECK(s.precision == 0.0);
  CHECK(s.recall == 0.0);
}

TEST_CASE("LF equal to the truth on half the points") {
  BundleSpec spec;
  spec.train = blobs(4, 1, 2, 0, 1, 5);
  spec.val.x = Matrix(4, 1);
  spec.val.x << -1, -2, 1, 2;
  spec.val.y = {0, 1, 1, 1};
  const DatasetBundle b = make_bundle(spec);
  // Votes class 1 when x > 0, abstains otherwise.
  LabelingFunction lf{"half", WeakLearner{LearnerKind::stump, {0}, 2, StumpParams{0, 0.0, 0, 1}}, Polarity::unipolar,
                      1, 0.0};
  const CandidateStats s = compute_stats(lf, b);
  CHECK(s.coverage == 0.5);
  CHECK(s.accuracy == 1.0);
  CHECK(s.recall == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("stats match direct counting on a ten-point instance") {
  BundleSpec spec;
  spec.classes = 3;
  spec.train = blobs(5, 1, 3, 0, 1, 6);
  spec.val.x = Matrix(10, 1);
  spec.val.x << -3, -2, -1, 0, 1, 2, 3, 4, 5, 6;
  spec.val.y = {0, 2, 0, 1, 1, 2, 1, 0, 1, 2};
  const DatasetBundle b = make_bundle(spec);
  for (double threshold : {-1.5, 0.5, 2.5, 4.5}) {
    LabelingFunction lf{"t", WeakLearner{LearnerKind::stump, {0}, 2, StumpParams{0, threshold, 0, 1}},
                        Polarity::unipolar, 1, 0.0};
    const CandidateStats s = compute_stats(lf, b);
    double tp = 0, fp = 0, fn = 0;
    for (int i = 0; i < 10; ++i) {
      const bool vote = spec.val.x(i, 0) > threshold;
      const bool pos = spec.val.y[i] == 1;
      tp += vote && pos;
      fp += vote && !pos;
      fn += !vote && pos;
    }
    CHECK(s.coverage == doctest::Approx((tp + fp) / 10));
    CHECK(s.precision == doctest::Approx(tp / (tp + fp)));
    CHECK(s.accuracy == doctest::Approx(tp / (tp + fp)));
    CHECK(s.recall == doctest::Approx(tp / (tp + fn)));
  }
}

TEST_CASE("session presents the highest accuracy times coverage first") {
  Session s = hand_session({{"a", 0.5, 0.9}, {"b", 0.9, 0.8}, {"c", 0.2, 1.0}}, SessionMode::interactive, 0.7);
  CHECK(s.next()->lf_id == "b");
  s.record("b", true);
  CHECK(s.next()->lf_id == "a");
  s.record("a", false);
  s.record("c", true);
  CHECK_FALSE(s.next().has_value());
  CHECK(s.pending_count() == 0);
  const SelectionResult r = s.finalize();
  REQUIRE(r.selected.lfs.size() == 2);
  CHECK(r.selected.lfs[0].id == "c");
  CHECK(r.selected.lfs[1].id == "b");
  CHECK_FALSE(r.empty_warning);
}

TEST_CASE("session errors") {
  Session s = hand_session({{"a", 0.5, 0.9}, {"b", 0.5, 0.6}}, SessionMode::interactive, 0.7);
  CHECK_THROWS_WITH_AS(s.record("zzz", true), doctest::Contains("unknown candidate"), SessionError);
  s.record("a", true);
  try {
    s.record("a", false);
    FAIL("expected already decided");
  } catch (const SessionError& e) {
    CHECK(e.code() == SessionError::Code::already_decided);
    CHECK(std::string(e.what()).find("already decided") != std::string::npos);
  }
  CHECK_THROWS_AS(run_automated(s), SessionError);
  s.finalize();
  CHECK_THROWS_AS(s.record("b", true), SessionError);
}

TEST_CASE("all rejected yields an empty selection with a warning") {
  Session s = hand_session({{"a", 0.5, 0.9}, {"b", 0.5, 0.6}}, SessionMode::interactive, 0.7);
  s.record("a", false);
  s.record("b", false);
  const SelectionResult r = s.finalize();
  CHECK(r.selected.lfs.empty());
  CHECK(r.empty_warning);
  const auto state = s.state_json();
  CHECK(state["finalized"] == true);
  CHECK(state["verdicts"].size() == 2);
}

TEST_CASE("automated selection follows the threshold") {
  const DatasetBundle b = blob_bundle(3, 5, 7);
  const LFSet pool = build_pool(b, stumps());

  Session everything = Session::create(pool, b, SessionMode::automated, 0.0);
  std::size_t positive = 0;
  for (const auto& id : everything.cursor_order()) positive += everything.stats(id).coverage > 0;
  CHECK(run_automated(everything).selected.lfs.size() == positive);

  Session impossible = Session::create(pool, b, SessionMode::automated, 1.01);
  const SelectionResult none = run_automated(impossible);
  CHECK(none.selected.lfs.empty());
  CHECK(none.empty_warning);

  Session filtered = Session::create(pool, b, SessionMode::automated, 0.7);
  std::set<std::string> expected;
  for (const auto& lf : pool.lfs) {
    const auto votes = lf_votes(lf, b.val_features.values());
    double covered = 0, correct = 0;
    for (std::size_t i = 0; i < votes.size(); ++i) {
      if (votes[i] == kAbstain) continue;
      covered += 1;
      correct += votes[i] == b.val_labels.values[i];
    }
    if (covered > 0 && correct / covered >= 0.7) expected.insert(lf.id);
  }
  std::set<std::string> got;
  for (const auto& lf : run_automated(filtered).selected.lfs) got.insert(lf.id);
  CHECK(got == expected);
  CHECK_FALSE(expected.empty());
}

TEST_CASE("replaying a verdict log reproduces the selection") {
  TempDir dir("replay");
  const DatasetBundle b = blob_bundle(2, 6, 8);
  const LFSet pool = build_pool(b, stumps());
  Session live = Session::create(pool, b, SessionMode::interactive, 0.7);
  {
    std::ofstream log(dir.path() / "v.ndjson");
    bool flip = false;
    while (auto next = live.next()) {
      const VerdictRecord r{next->lf_id, flip = !flip};
      live.record(r.lf_id, r.useful);
      log << verdict_log_line(r) << '\n';
    }
  }
  const auto records = read_verdict_log(dir.path() / "v.ndjson");
  CHECK(records.size() == pool.lfs.size());
  const SelectionResult a = live.finalize();
  const SelectionResult r = replay(Session::create(pool, b, SessionMode::interactive, 0.7), records);
  CHECK(to_json(a.selected) == to_json(r.selected));
}

TEST_CASE("session store isolates concurrent sessions") {
  SessionStore store;
  const std::string a = store.create(hand_session({{"x", 0.5, 0.9}, {"y", 0.5, 0.8}}, SessionMode::interactive, 0.7));
  const std::string b = store.create(hand_session({{"x", 0.5, 0.9}, {"y", 0.5, 0.8}}, SessionMode::interactive, 0.7));
  CHECK(a != b);
  std::thread ta([&] { store.with(a, [](Session& s) { s.record("x", true); s.record("y", false); }); });
  std::thread tb([&] { store.with(b, [](Session& s) { s.record("y", true); }); });
  ta.join();
  tb.join();
  store.with(a, [](Session& s) { CHECK(s.finalize().selected.lfs.size() == 1); });
  store.with(b, [](Session& s) {
    CHECK(s.verdict("x") == Verdict::pending);
    CHECK(s.finalize().selected.lfs[0].id == "y");
  });
  CHECK_THROWS_WITH_AS(store.with("nope", [](Session&) {}), doctest::Contains("unknown session"), Error);
}
