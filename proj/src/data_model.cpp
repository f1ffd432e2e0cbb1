#include "autows/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "autows/csv.hpp"
#include "autows/error.hpp"

namespace autows {

using nlohmann::json;
namespace fs = std::filesystem;

FeatureMatrix::FeatureMatrix(Matrix values, std::string provenance)
    : values_(std::move(values)), provenance_(std::move(provenance)) {
  if (values_.rows() < 1 || values_.cols() < 1) throw Error("feature matrix must be at least 1x1");
  if (provenance_.empty()) throw Error("feature matrix provenance must be non-empty");
  if (!values_.allFinite()) {
    for (Eigen::Index r = 0; r < values_.rows(); ++r) {
      if (!values_.row(r).allFinite()) {
        throw Error("non-finite value in feature matrix at row " + std::to_string(r));
      }
    }
  }
}

void LabelVector::validate() const {
  if (classes < 2) throw Error("label vector needs at least 2 classes");
  if (!class_names.empty() && class_names.size() != static_cast<std::size_t>(classes)) {
    throw Error("class_names has " + std::to_string(class_names.size()) + " entries for " +
                std::to_string(classes) + " classes");
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] < 0 || values[i] >= classes) {
      throw Error("label out of range at row " + std::to_string(i) + ": " +
                  std::to_string(values[i]));
    }
  }
}

void VoteMatrix::validate() const {
  if (classes < 2) throw Error("vote matrix needs at least 2 classes");
  if (static_cast<std::size_t>(values.cols()) != lf_ids.size()) {
    throw Error("vote matrix has " + std::to_string(values.cols()) + " columns but " +
                std::to_string(lf_ids.size()) + " ids");
  }
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index k = 0; k < values.cols(); ++k) {
      const int v = values(i, k);
      if (v != kAbstain && (v < 0 || v >= classes)) {
        throw Error("vote out of range at row " + std::to_string(i) + ", column " +
                    std::to_string(k) + ": " + std::to_string(v));
      }
    }
  }
}

void DatasetBundle::validate() const {
  val_labels.validate();
  const Eigen::Index d = train_features.cols();
  const auto check = [&](const FeatureMatrix& f, const char* split) {
    if (f.cols() != d) {
      throw Error(std::string("shape mismatch: ") + split + " has " + std::to_string(f.cols()) +
                  " columns, train has " + std::to_string(d));
    }
    if (f.provenance() != train_features.provenance()) {
      throw Error(std::string("provenance mismatch in split ") + split);
    }
  };
  check(val_features, "val");
  if (static_cast<Eigen::Index>(val_labels.size()) != val_features.rows()) {
    throw Error("shape mismatch: " + std::to_string(val_labels.size()) + " val labels for " +
                std::to_string(val_features.rows()) + " val rows");
  }
  if (train_labels) {
    train_labels->validate();
    if (static_cast<Eigen::Index>(train_labels->size()) != train_features.rows()) {
      throw Error("shape mismatch: train labels do not match train rows");
    }
  }
  if (test_features) {
    check(*test_features, "test");
    if (!test_labels || static_cast<Eigen::Index>(test_labels->size()) != test_features->rows()) {
      throw Error("shape mismatch: test labels do not match test rows");
    }
    test_labels->validate();
  }
  if (external_votes) {
    external_votes->validate();
    if (external_votes->rows() != train_features.rows()) {
      throw Error("shape mismatch: external votes do not match train rows");
    }
    if (external_votes->classes != classes()) throw Error("external votes class count mismatch");
  }
}

namespace {

json read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("missing manifest file: " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string select_provenance(const json& manifest, const std::string& requested) {
  const auto& features = manifest.at("splits").at("train").at("features");
  if (!requested.empty()) {
    if (!features.contains(requested)) {
      throw IncompatibleError("modality", "provenance '" + requested + "' not in manifest");
    }
    return requested;
  }
  if (features.contains("raw")) return "raw";
  if (features.empty()) throw Error("manifest lists no train features");
  return features.begin().key();  // nlohmann::json objects iterate in key order
}

LabelVector read_labels(const fs::path& path, int classes,
                        const std::vector<std::string>& names) {
  LabelVector labels{csv::read_int_lines(path), classes, names};
  for (std::size_t i = 0; i < labels.values.size(); ++i) {
    const int v = labels.values[i];
    if (v < 0 || v >= classes) {
      throw Error(path.string() + ":" + std::to_string(i + 1) + ": label out of range (" +
                  std::to_string(v) + " not in [0, " + std::to_string(classes) + "))");
    }
  }
  return labels;
}

FeatureMatrix read_features(const fs::path& path, const std::string& provenance) {
  Matrix m = csv::read_real_matrix(path);
  try {
    return FeatureMatrix(std::move(m), provenance);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

}  // namespace

std::vector<std::string> manifest_provenances(const fs::path& manifest_path) {
  const json manifest = read_manifest(manifest_path);
  std::vector<std::string> out;
  for (const auto& [key, value] : manifest.at("splits").at("train").at("features").items()) {
    out.push_back(key);
  }
  return out;
}

DatasetBundle load_bundle(const fs::path& manifest_path, const LoadOptions& options) {
  const json manifest = read_manifest(manifest_path);
  const fs::path base = manifest_path.parent_path();
  const auto resolve = [&](const std::string& p) { return base / p; };

  DatasetBundle b;
  try {
    b.name = manifest.value("name", manifest_path.stem().string());
    const int classes = manifest.at("classes").get<int>();
    std::vector<std::string> names;
    if (manifest.contains("class_names")) names = manifest.at("class_names").get<std::vector<std::string>>();
    const std::string prov = select_provenance(manifest, options.provenance);
    const json& splits = manifest.at("splits");

    const auto features_of = [&](const json& split, const char* split_name) {
      const json& f = split.at("features");
      if (!f.contains(prov)) {
        throw IncompatibleError("modality", std::string("split ") + split_name +
                                                " lacks provenance '" + prov + "'");
      }
      return read_features(resolve(f.at(prov).get<std::string>()), prov);
    };

    b.train_features = features_of(splits.at("train"), "train");
    b.val_features = features_of(splits.at("val"), "val");
    b.val_labels = read_labels(resolve(splits.at("val").at("labels").get<std::string>()), classes, names);
    if (splits.at("train").contains("labels")) {
      b.train_labels = read_labels(resolve(splits.at("train").at("labels").get<std::string>()), classes, names);
    }
    if (splits.contains("test")) {
      b.test_features = features_of(splits.at("test"), "test");
      b.test_labels = read_labels(resolve(splits.at("test").at("labels").get<std::string>()), classes, names);
    }
    if (manifest.contains("external_votes")) {
      const fs::path vp = resolve(manifest.at("external_votes").get<std::string>());
      VoteMatrix votes;
      votes.values = csv::read_int_matrix(vp);
      votes.classes = classes;
      for (Eigen::Index k = 0; k < votes.values.cols(); ++k) votes.lf_ids.push_back("lf" + std::to_string(k));
      try {
        votes.validate();
      } catch (const Error& e) {
        throw Error(vp.string() + ": " + e.what());
      }
      b.external_votes = std::move(votes);
    }
  } catch (const json::exception& e) {
    throw Error(manifest_path.string() + ": malformed manifest: " + e.what());
  }

  try {
    b.validate();
  } catch (const IncompatibleError&) {
    throw;
  } catch (const Error& e) {
    throw Error(manifest_path.string() + ": " + e.what());
  }

  if (options.standardize) {
    const Standardizer s = fit_standardizer(b.train_features);
    b.train_features = apply_standardizer(s, b.train_features);
    b.val_features = apply_standardizer(s, b.val_features);
    if (b.test_features) b.test_features = apply_standardizer(s, *b.test_features);
  }
  return b;
}

DatasetBundle with_label_budget(const DatasetBundle& bundle, std::size_t budget) {
  if (budget == 0) throw Error("label budget must be positive");
  if (budget > bundle.val_labels.size()) {
    throw Error("budget exceeds available labels (" + std::to_string(budget) + " > " +
                std::to_string(bundle.val_labels.size()) + ")");
  }
  DatasetBundle out = bundle;
  const auto m = static_cast<Eigen::Index>(budget);
  out.val_features = FeatureMatrix(bundle.val_features.values().topRows(m), bundle.val_features.provenance());
  out.val_labels.values.resize(budget);
  return out;
}

PcaModel fit_pca(const FeatureMatrix& features, Eigen::Index k, Eigen::Index max_dimension) {
  const Matrix& x = features.values();
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  if (k < 1 || k > std::min(n, d)) {
    throw Error("PCA needs 1 <= k <= min(n, d); got k=" + std::to_string(k) + " for " +
                std::to_string(n) + "x" + std::to_string(d));
  }
  if (d > max_dimension) {
    throw Error("PCA dimension " + std::to_string(d) + " exceeds cap " + std::to_string(max_dimension));
  }

  PcaModel model;
  model.mean = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - model.mean.transpose();
  const double denom = static_cast<double>(std::max<Eigen::Index>(n - 1, 1));
  const Matrix cov = (centered.transpose() * centered) / denom;

  Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
  if (eig.info() != Eigen::Success) throw Error("PCA eigendecomposition failed");
  const Vector& values = eig.eigenvalues();  // ascending
  const double top = std::max(values(d - 1), 0.0);
  if (top <= 1e-300) throw Error("zero-variance input: PCA rank is 0");

  model.components.resize(k, d);
  model.explained_variance.resize(k);
  for (Eigen::Index j = 0; j < k; ++j) {
    const Eigen::Index src = d - 1 - j;
    Vector c = eig.eigenvectors().col(src);
    const double biggest = c.cwiseAbs().maxCoeff();
    for (Eigen::Index t = 0; t < d; ++t) {
      if (std::abs(c(t)) >= biggest - 1e-12) {
        if (c(t) < 0) c = -c;
        break;
      }
    }
    model.components.row(j) = c.transpose();
    // Round-off can leave tiny negative eigenvalues on rank-deficient data.
    model.explained_variance(j) = std::max(values(src), 0.0);
  }
  return model;
}

FeatureMatrix apply_pca(const PcaModel& model, const FeatureMatrix& features) {
  if (features.cols() != model.mean.size()) {
    throw Error("PCA dimension mismatch: model expects " + std::to_string(model.mean.size()) +
                " columns, got " + std::to_string(features.cols()));
  }
  Matrix projected =
      (features.values().rowwise() - model.mean.transpose()) * model.components.transpose();
  return FeatureMatrix(std::move(projected),
                       features.provenance() + "+pca" + std::to_string(model.k()));
}

Matrix inverse_pca(const PcaModel& model, const Matrix& projected) {
  if (projected.cols() != model.k()) throw Error("PCA inverse dimension mismatch");
  return (projected * model.components).rowwise() + model.mean.transpose();
}

Standardizer fit_standardizer(const FeatureMatrix& features) {
  const Matrix& x = features.values();
  Standardizer s;
  s.mean = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - s.mean.transpose();
  s.scale = (centered.array().square().colwise().sum() / static_cast<double>(x.rows()))
                .sqrt()
                .max(1e-12)
                .transpose();
  return s;
}

FeatureMatrix apply_standardizer(const Standardizer& s, const FeatureMatrix& features) {
  if (features.cols() != s.mean.size()) throw Error("standardizer dimension mismatch");
  Matrix out = (features.values().rowwise() - s.mean.transpose()).array().rowwise() /
               s.scale.transpose().array();
  return FeatureMatrix(std::move(out), features.provenance() + "+std");
}

std::size_t bit_reverse(std::size_t index, unsigned bits) {
  std::size_t out = 0;
  for (unsigned b = 0; b < bits; ++b) {
    out = (out << 1) | ((index >> b) & 1U);
  }
  return out;
}

FeatureMatrix bit_reversal_permute(const FeatureMatrix& features, Eigen::Index side) {
  if (side < 1 || (side & (side - 1)) != 0) throw Error("side must be a power of two");
  if (features.cols() != side * side) {
    throw Error("feature width " + std::to_string(features.cols()) + " is not side^2 = " +
                std::to_string(side * side));
  }
  unsigned bits = 0;
  while ((Eigen::Index{1} << bits) < side) ++bits;

  std::vector<Eigen::Index> perm(static_cast<std::size_t>(side));
  for (Eigen::Index i = 0; i < side; ++i) {
    perm[static_cast<std::size_t>(i)] = static_cast<Eigen::Index>(bit_reverse(static_cast<std::size_t>(i), bits));
  }
  const Matrix& x = features.values();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < side; ++r) {
    for (Eigen::Index c = 0; c < side; ++c) {
      const Eigen::Index dst = perm[static_cast<std::size_t>(r)] * side + perm[static_cast<std::size_t>(c)];
      out.col(dst) = x.col(r * side + c);
    }
  }
  return FeatureMatrix(std::move(out), features.provenance() + "+bitrev");
}

}  // namespace autows
