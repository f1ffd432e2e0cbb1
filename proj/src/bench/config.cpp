#include <fstream>
#include <sstream>

#include <openssl/evp.h>

#include "autows/bench.hpp"
#include "autows/error.hpp"

namespace autows::bench {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(Method m) {
  switch (m) {
    case Method::snuba_unipolar: return "snuba_unipolar";
    case Method::snuba_multipolar: return "snuba_multipolar";
    case Method::iws_auto: return "iws_auto";
    case Method::iws_interactive: return "iws_interactive";
    case Method::goggles: return "goggles";
    case Method::few_shot: return "few_shot";
    case Method::label_prop: return "label_prop";
    case Method::zero_shot: return "zero_shot";
  }
  return "?";
}

Method parse_method(std::string_view name) {
  for (Method m : {Method::snuba_unipolar, Method::snuba_multipolar, Method::iws_auto, Method::iws_interactive,
                   Method::goggles, Method::few_shot, Method::label_prop, Method::zero_shot}) {
    if (to_string(m) == name) return m;
  }
  throw Error("unknown method: " + std::string(name));
}

std::string_view to_string(LabelModelKind k) { return k == LabelModelKind::majority ? "majority" : "dawid_skene"; }

LabelModelKind parse_label_model(std::string_view name) {
  if (name == "majority") return LabelModelKind::majority;
  if (name == "dawid_skene") return LabelModelKind::dawid_skene;
  throw Error("unknown label model: " + std::string(name));
}

json canonical_json(const RunConfig& c) {
  SynthesisConfig synthesis = c.synthesis;
  synthesis.seed = c.seed;
  json j{{"manifest", c.manifest.lexically_normal().string()},
         {"provenance", c.provenance},
         {"extra_provenances", c.extra_provenances},
         {"standardize", c.standardize},
         {"method", std::string(to_string(c.method))},
         {"label_model", std::string(to_string(c.label_model))},
         {"synthesis", to_json(synthesis)},
         {"dawid_skene",
          {{"max_iter", c.dawid_skene.max_iter}, {"tol", c.dawid_skene.tol}, {"smoothing", c.dawid_skene.smoothing}}},
         {"fill", std::string(to_string(c.fill))},
         {"min_pool", c.min_pool},
         {"cluster_method", std::string(to_string(c.cluster_method))},
         {"propagation",
          {{"k", c.propagation.k},
           {"sigma", c.propagation.sigma},
           {"max_iter", c.propagation.max_iter},
           {"tol", c.propagation.tol}}},
         {"few_shot", {{"l2", c.few_shot.l2}, {"max_iter", c.few_shot.max_iter}, {"tol", c.few_shot.tol}}},
         {"label_budget", c.label_budget},
         {"use_external_votes", c.use_external_votes},
         {"seed", c.seed}};
  j["accuracy_threshold"] = c.accuracy_threshold ? json(*c.accuracy_threshold) : json(nullptr);
  return j;
}

json to_json(const RunConfig& c) {
  json j = canonical_json(c);
  j["output_dir"] = c.output_dir.string();
  return j;
}

RunConfig run_config_from_json(const json& j, const fs::path& base_dir) {
  RunConfig c;
  try {
    if (j.contains("manifest")) {
      fs::path m = j.at("manifest").get<std::string>();
      c.manifest = m.is_relative() && !base_dir.empty() ? base_dir / m : m;
    }
    c.provenance = j.value("provenance", c.provenance);
    c.extra_provenances = j.value("extra_provenances", c.extra_provenances);
    c.standardize = j.value("standardize", c.standardize);
    if (j.contains("method")) c.method = parse_method(j.at("method").get<std::string>());
    if (j.contains("label_model")) c.label_model = parse_label_model(j.at("label_model").get<std::string>());
    if (j.contains("synthesis")) c.synthesis = synthesis_config_from_json(j.at("synthesis"));
    if (j.contains("dawid_skene")) {
      const auto& d = j.at("dawid_skene");
      c.dawid_skene.max_iter = d.value("max_iter", c.dawid_skene.max_iter);
      c.dawid_skene.tol = d.value("tol", c.dawid_skene.tol);
      c.dawid_skene.smoothing = d.value("smoothing", c.dawid_skene.smoothing);
    }
    if (j.contains("fill")) c.fill = parse_fill_policy(j.at("fill").get<std::string>());
    if (j.contains("accuracy_threshold") && !j.at("accuracy_threshold").is_null()) {
      c.accuracy_threshold = j.at("accuracy_threshold").get<double>();
    }
    c.min_pool = j.value("min_pool", c.min_pool);
    if (j.contains("cluster_method")) c.cluster_method = parse_cluster_method(j.at("cluster_method").get<std::string>());
    if (j.contains("propagation")) {
      const auto& p = j.at("propagation");
      c.propagation.k = p.value("k", c.propagation.k);
      c.propagation.sigma = p.value("sigma", c.propagation.sigma);
      c.propagation.max_iter = p.value("max_iter", c.propagation.max_iter);
      c.propagation.tol = p.value("tol", c.propagation.tol);
    }
    if (j.contains("few_shot")) {
      const auto& f = j.at("few_shot");
      c.few_shot.l2 = f.value("l2", c.few_shot.l2);
      c.few_shot.max_iter = f.value("max_iter", c.few_shot.max_iter);
      c.few_shot.tol = f.value("tol", c.few_shot.tol);
    }
    c.label_budget = j.value("label_budget", c.label_budget);
    c.use_external_votes = j.value("use_external_votes", c.use_external_votes);
    c.seed = j.value("seed", c.seed);
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  } catch (const json::exception& e) {
    throw Error(std::string("malformed run config: ") + e.what());
  }
  c.synthesis.seed = c.seed;
  return c;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xF]);
  }
  return out;
}

namespace {

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error("missing file: " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void collect_paths(const json& node, std::vector<std::string>& out) {
  if (node.is_string()) {
    out.push_back(node.get<std::string>());
  } else if (node.is_object() || node.is_array()) {
    for (const auto& child : node) collect_paths(child, out);
  }
}

}  // namespace

std::string cache_key(const RunConfig& config) {
  std::string material = canonical_json(config).dump();
  const std::string manifest = file_bytes(config.manifest);
  material += "\nmanifest:" + sha256_hex(manifest);
  json parsed;
  try {
    parsed = json::parse(manifest);
  } catch (const json::exception& e) {
    throw Error(config.manifest.string() + ": " + e.what());
  }
  std::vector<std::string> files;
  if (parsed.contains("splits")) collect_paths(parsed.at("splits"), files);
  if (parsed.contains("external_votes")) collect_paths(parsed.at("external_votes"), files);
  for (const auto& f : files) {
    const fs::path p = config.manifest.parent_path() / f;
    material += "\n" + f + ":" + sha256_hex(file_bytes(p));
  }
  return sha256_hex(material);
}

json to_json(const RunReport& r) {
  json j{{"status", r.status},
         {"message", r.message},
         {"method", r.method},
         {"dataset", r.dataset},
         {"provenance", r.provenance},
         {"evaluation_split", r.evaluation_split},
         {"coverage", r.coverage},
         {"num_lfs", r.num_lfs},
         {"label_budget", r.label_budget},
         {"artifacts", r.artifacts},
         {"cache_key", r.cache_key}};
  j["accuracy_covered"] = r.accuracy_covered ? json(*r.accuracy_covered) : json(nullptr);
  j["accuracy_all_with_fill"] = r.accuracy_all_with_fill ? json(*r.accuracy_all_with_fill) : json(nullptr);
  return j;
}

RunReport run_report_from_json(const json& j) {
  RunReport r;
  r.status = j.at("status").get<std::string>();
  r.message = j.value("message", "");
  r.method = j.value("method", "");
  r.dataset = j.value("dataset", "");
  r.provenance = j.value("provenance", "");
  r.evaluation_split = j.value("evaluation_split", "none");
  r.coverage = j.value("coverage", 0.0);
  r.num_lfs = j.value("num_lfs", std::size_t{0});
  r.label_budget = j.value("label_budget", std::size_t{0});
  r.artifacts = j.value("artifacts", std::map<std::string, std::string>{});
  r.cache_key = j.value("cache_key", "");
  if (j.contains("accuracy_covered") && !j.at("accuracy_covered").is_null()) {
    r.accuracy_covered = j.at("accuracy_covered").get<double>();
  }
  if (j.contains("accuracy_all_with_fill") && !j.at("accuracy_all_with_fill").is_null()) {
    r.accuracy_all_with_fill = j.at("accuracy_all_with_fill").get<double>();
  }
  return r;
}

}  // namespace autows::bench
