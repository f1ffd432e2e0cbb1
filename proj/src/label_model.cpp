#include "autows/label_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "autows/csv.hpp"
#include "autows/error.hpp"
#include "autows/random.hpp"

namespace autows {
namespace {

int argmax_row(const Matrix& m, Eigen::Index row) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < m.cols(); ++c) {
    if (m(row, c) > m(row, best)) best = c;
  }
  return static_cast<int>(best);
}

void require_lfs(const VoteMatrix& votes) {
  if (votes.lfs() == 0) throw Error("vote matrix has no labeling functions");
  votes.validate();
}

double log_sum_exp(const Eigen::VectorXd& v) {
  const double top = v.maxCoeff();
  return top + std::log((v.array() - top).exp().sum());
}

}  // namespace

void WeakLabelOutput::validate() const {
  const auto n = static_cast<Eigen::Index>(hard.size());
  if (posterior.rows() != n || covered.size() != hard.size()) throw Error("weak label output shape mismatch");
  std::size_t count = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const bool cov = covered[static_cast<std::size_t>(i)] != 0;
    if (cov != (hard[static_cast<std::size_t>(i)] != kAbstain)) {
      throw Error("hard label must be -1 exactly on uncovered rows");
    }
    if (cov) {
      ++count;
      if (std::abs(posterior.row(i).sum() - 1.0) >= 1e-9) throw Error("posterior row does not sum to 1");
    }
  }
  if (n > 0 && std::abs(coverage - static_cast<double>(count) / static_cast<double>(n)) > 1e-12) {
    throw Error("coverage does not match covered flags");
  }
}

WeakLabelOutput covered_output(Matrix posterior) {
  WeakLabelOutput out;
  const Eigen::Index n = posterior.rows();
  out.hard.resize(static_cast<std::size_t>(n));
  out.covered.assign(static_cast<std::size_t>(n), 1);
  for (Eigen::Index i = 0; i < n; ++i) out.hard[static_cast<std::size_t>(i)] = argmax_row(posterior, i);
  out.posterior = std::move(posterior);
  out.coverage = n > 0 ? 1.0 : 0.0;
  return out;
}

VoteMatrix merge_votes(const VoteMatrix& primary, const VoteMatrix& external) {
  if (primary.rows() != external.rows()) {
    throw Error("vote matrices differ in row count (" + std::to_string(primary.rows()) + " vs " +
                std::to_string(external.rows()) + ")");
  }
  if (primary.classes != external.classes) throw Error("vote matrices differ in class count");
  VoteMatrix out;
  out.classes = primary.classes;
  out.values.resize(primary.rows(), primary.lfs() + external.lfs());
  out.values << primary.values, external.values;
  for (const auto& id : primary.lf_ids) out.lf_ids.push_back("primary:" + id);
  for (const auto& id : external.lf_ids) out.lf_ids.push_back("external:" + id);
  return out;
}

double coverage(const VoteMatrix& votes) {
  if (votes.rows() == 0) return 0.0;
  Eigen::Index covered = 0;
  for (Eigen::Index i = 0; i < votes.rows(); ++i) {
    if ((votes.values.row(i).array() != kAbstain).any()) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(votes.rows());
}

WeakLabelOutput majority_vote(const VoteMatrix& votes) {
  require_lfs(votes);
  const Eigen::Index n = votes.rows();
  WeakLabelOutput out;
  out.posterior = Matrix::Zero(n, votes.classes);
  out.hard.assign(static_cast<std::size_t>(n), kAbstain);
  out.covered.assign(static_cast<std::size_t>(n), 0);
  Eigen::Index covered = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double total = 0.0;
    for (Eigen::Index k = 0; k < votes.lfs(); ++k) {
      const int v = votes.values(i, k);
      if (v == kAbstain) continue;
      out.posterior(i, v) += 1.0;
      total += 1.0;
    }
    if (total == 0.0) continue;
    out.posterior.row(i) /= total;
    out.hard[static_cast<std::size_t>(i)] = argmax_row(out.posterior, i);
    out.covered[static_cast<std::size_t>(i)] = 1;
    ++covered;
  }
  out.coverage = n > 0 ? static_cast<double>(covered) / static_cast<double>(n) : 0.0;
  return out;
}

DawidSkeneResult dawid_skene_fit(const VoteMatrix& votes, const DawidSkeneOptions& options) {
  require_lfs(votes);
  if (options.smoothing < 0.0) throw Error("smoothing must be nonnegative");
  const int classes = votes.classes;
  const Eigen::Index lfs = votes.lfs();
  const WeakLabelOutput init = majority_vote(votes);

  std::vector<Eigen::Index> rows;
  for (Eigen::Index i = 0; i < votes.rows(); ++i) {
    if (init.covered[static_cast<std::size_t>(i)]) rows.push_back(i);
  }
  const auto r_count = static_cast<Eigen::Index>(rows.size());

  Matrix t(r_count, classes);
  for (Eigen::Index r = 0; r < r_count; ++r) t.row(r) = init.posterior.row(rows[static_cast<std::size_t>(r)]);

  DawidSkeneModel model;
  model.class_prior = Eigen::VectorXd::Constant(classes, 1.0 / classes);
  model.confusion.assign(static_cast<std::size_t>(lfs), Matrix::Constant(classes, classes + 1, 1.0 / (classes + 1)));
  const double s = options.smoothing;
  const int outcomes = classes + 1;
  auto outcome = [&](Eigen::Index r, Eigen::Index k) {
    const int v = votes.values(rows[static_cast<std::size_t>(r)], k);
    return v == kAbstain ? classes : v;
  };

  std::vector<Eigen::Index> active;
  for (Eigen::Index k = 0; k < lfs; ++k) {
    if ((votes.values.col(k).array() != kAbstain).any()) active.push_back(k);
  }

  for (int iter = 1; iter <= options.max_iter && r_count > 0; ++iter) {
    // M-step
    model.class_prior = (t.colwise().sum().transpose().array() + s) / (static_cast<double>(r_count) + classes * s);
    for (Eigen::Index k : active) {
      Matrix counts = Matrix::Zero(classes, outcomes);
      for (Eigen::Index r = 0; r < r_count; ++r) counts.col(outcome(r, k)) += t.row(r).transpose();
      Matrix& conf = model.confusion[static_cast<std::size_t>(k)];
      for (int c = 0; c < classes; ++c) {
        const double denom = counts.row(c).sum() + outcomes * s;
        if (denom > 0.0) {
          conf.row(c) = (counts.row(c).array() + s) / denom;
        } else {
          conf.row(c).setConstant(1.0 / outcomes);
        }
      }
    }

    // E-step
    const Eigen::VectorXd log_prior = model.class_prior.array().log();
    std::vector<Matrix> log_conf(static_cast<std::size_t>(lfs));
    for (Eigen::Index k : active) log_conf[static_cast<std::size_t>(k)] = model.confusion[static_cast<std::size_t>(k)].array().log();

    double ll = 0.0;
    Eigen::VectorXd u(classes);
    for (Eigen::Index r = 0; r < r_count; ++r) {
      u = log_prior;
      for (Eigen::Index k : active) u += log_conf[static_cast<std::size_t>(k)].col(outcome(r, k));
      const double z = log_sum_exp(u);
      ll += z;
      t.row(r) = (u.array() - z).exp().transpose();
    }
    if (s > 0.0) {
      double penalty = log_prior.sum();
      for (Eigen::Index k : active) penalty += log_conf[static_cast<std::size_t>(k)].sum();
      ll += s * penalty;
    }
    if (!std::isfinite(ll)) throw Error("non-finite Dawid-Skene log-likelihood");

    const bool converged = !model.log_likelihood_trace.empty() &&
                           ll - model.log_likelihood_trace.back() < options.tol;
    model.log_likelihood_trace.push_back(ll);
    model.log_likelihood = ll;
    model.iterations_run = iter;
    if (converged) break;
  }

  WeakLabelOutput out;
  out.posterior = Matrix::Zero(votes.rows(), classes);
  out.hard.assign(static_cast<std::size_t>(votes.rows()), kAbstain);
  out.covered.assign(static_cast<std::size_t>(votes.rows()), 0);
  for (Eigen::Index r = 0; r < r_count; ++r) {
    const Eigen::Index i = rows[static_cast<std::size_t>(r)];
    out.posterior.row(i) = t.row(r);
    out.hard[static_cast<std::size_t>(i)] = argmax_row(out.posterior, i);
    out.covered[static_cast<std::size_t>(i)] = 1;
  }
  out.coverage = init.coverage;
  return {std::move(model), std::move(out)};
}

std::string_view to_string(FillPolicy p) {
  switch (p) {
    case FillPolicy::none: return "none";
    case FillPolicy::prior_sample: return "prior_sample";
    case FillPolicy::majority_class: return "majority_class";
  }
  return "?";
}

FillPolicy parse_fill_policy(std::string_view name) {
  if (name == "none") return FillPolicy::none;
  if (name == "prior_sample") return FillPolicy::prior_sample;
  if (name == "majority_class") return FillPolicy::majority_class;
  throw Error("unknown fill policy: " + std::string(name));
}

std::vector<int> filled_labels(const WeakLabelOutput& output, FillPolicy policy, std::uint64_t seed) {
  std::vector<int> labels = output.hard;
  if (policy == FillPolicy::none) return labels;
  const auto classes = static_cast<std::size_t>(output.posterior.cols());
  std::vector<double> counts(classes, 0.0);
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (output.covered[i]) {
      counts[static_cast<std::size_t>(labels[i])] += 1.0;
      total += 1.0;
    }
  }
  if (total == 0.0) {
    counts.assign(classes, 1.0);
    total = static_cast<double>(classes);
  }
  const int mode = static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
  Rng rng(seed);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (output.covered[i]) continue;
    if (policy == FillPolicy::majority_class) {
      labels[i] = mode;
      continue;
    }
    double u = rng.uniform() * total;
    int c = 0;
    while (c + 1 < static_cast<int>(classes) && u >= counts[static_cast<std::size_t>(c)]) {
      u -= counts[static_cast<std::size_t>(c)];
      ++c;
    }
    labels[i] = c;
  }
  return labels;
}

double accuracy_covered(const WeakLabelOutput& output, std::span<const int> gold) {
  if (gold.size() != output.size()) throw Error("gold labels do not match output length");
  double correct = 0.0, covered = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (!output.covered[i]) continue;
    covered += 1.0;
    if (output.hard[i] == gold[i]) correct += 1.0;
  }
  return covered == 0.0 ? 0.0 : correct / covered;
}

double accuracy_all(std::span<const int> labels, std::span<const int> gold) {
  if (gold.size() != labels.size()) throw Error("gold labels do not match output length");
  if (gold.empty()) return 0.0;
  double correct = 0.0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (labels[i] == gold[i]) correct += 1.0;
  }
  return correct / static_cast<double>(gold.size());
}

void write_weak_labels(const std::filesystem::path& path, const WeakLabelOutput& output) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write file: " + path.string());
  out << "hard,covered";
  for (Eigen::Index c = 0; c < output.posterior.cols(); ++c) out << ",p" << c;
  out << '\n';
  for (std::size_t i = 0; i < output.size(); ++i) {
    out << output.hard[i] << ',' << (output.covered[i] ? 1 : 0);
    for (Eigen::Index c = 0; c < output.posterior.cols(); ++c) {
      out << ',' << csv::format_double(output.posterior(static_cast<Eigen::Index>(i), c));
    }
    out << '\n';
  }
}

WeakLabelOutput read_weak_labels(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(path.string() + ": empty weak label file");
  const auto header = csv::split(line, ',');
  if (header.size() < 2 || header[0] != "hard" || header[1] != "covered") {
    throw Error(path.string() + ":1: header must start with hard,covered");
  }
  const auto classes = static_cast<Eigen::Index>(header.size() - 2);
  std::vector<std::vector<double>> rows;
  WeakLabelOutput out;
  std::size_t ln = 1;
  while (std::getline(in, line)) {
    ++ln;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(ln);
    const auto fields = csv::split(line, ',');
    if (fields.size() != header.size()) throw Error(where + ": wrong number of columns");
    out.hard.push_back(static_cast<int>(csv::parse_int(fields[0], where)));
    out.covered.push_back(csv::parse_int(fields[1], where) != 0 ? 1 : 0);
    std::vector<double> p;
    for (std::size_t c = 2; c < fields.size(); ++c) p.push_back(csv::parse_double(fields[c], where));
    rows.push_back(std::move(p));
  }
  out.posterior.resize(static_cast<Eigen::Index>(rows.size()), classes);
  std::size_t covered = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Eigen::Index c = 0; c < classes; ++c) out.posterior(static_cast<Eigen::Index>(i), c) = rows[i][static_cast<std::size_t>(c)];
    covered += out.covered[i] ? 1 : 0;
  }
  out.coverage = rows.empty() ? 0.0 : static_cast<double>(covered) / static_cast<double>(rows.size());
  out.validate();
  return out;
}

void write_votes(const std::filesystem::path& path, const VoteMatrix& votes) {
  csv::write_int_matrix(path, votes.values);
}

nlohmann::json to_json(const DawidSkeneModel& model) {
  nlohmann::json j;
  j["class_prior"] = std::vector<double>(model.class_prior.data(), model.class_prior.data() + model.class_prior.size());
  j["confusion"] = nlohmann::json::array();
  for (const auto& conf : model.confusion) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < conf.rows(); ++r) {
      std::vector<double> row;
      for (Eigen::Index c = 0; c < conf.cols(); ++c) row.push_back(conf(r, c));
      rows.push_back(row);
    }
    j["confusion"].push_back(rows);
  }
  j["iterations_run"] = model.iterations_run;
  j["log_likelihood"] = model.log_likelihood;
  return j;
}

}  // namespace autows
