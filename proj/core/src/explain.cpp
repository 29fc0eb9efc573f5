#include "dmmmen/explain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "dmmmen/io.hpp"
#include "dmmmen/mathutil.hpp"

namespace dmmmen {

namespace {

/// Indices of the k largest values, descending, ties to the lower index.
std::vector<int> top_indices(const Vector& values, int k) {
  std::vector<int> order(static_cast<std::size_t>(values.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return values[a] > values[b]; });
  order.resize(static_cast<std::size_t>(k));
  return order;
}

nlohmann::json vector_to_json(const Vector& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
  return arr;
}

}  // namespace

PosteriorSummary posterior_summary(const RelabeledChain& chain) {
  const auto& draws = chain.chain.draws;
  if (draws.empty()) throw ValueError("empty chain");
  const Eigen::Index J = draws.front().J();
  const Eigen::Index p = draws.front().p();
  PosteriorSummary s{Vector::Zero(J), Matrix::Zero(J, p), Vector::Zero(J)};
  for (const auto& d : draws) {
    s.pi += d.pi;
    s.beta += d.beta;
    s.sigma2 += d.sigma2;
  }
  const auto T = static_cast<double>(draws.size());
  s.pi /= T;
  s.beta /= T;
  s.sigma2 /= T;
  return s;
}

InsightMap global_insights(const RelabeledChain& chain, int k, double dominance) {
  const PosteriorSummary s = posterior_summary(chain);
  const Eigen::Index p = s.beta.cols();
  if (k < 0 || k > p) throw ValueError("k must lie in [0, p]");
  Vector importance = Vector::Zero(p);
  for (Eigen::Index j = 0; j < s.pi.size(); ++j) {
    if (s.pi[j] < dominance) continue;
    importance += s.pi[j] * s.beta.row(j).cwiseAbs().transpose();
  }
  InsightMap map;  // class_tag/source filled by callers that know the dataset
  map.importance = importance;
  map.top_k = top_indices(importance, k);
  map.component_weights = s.pi;
  return map;
}

Vector instance_responsibilities(const PosteriorSummary& summary,
                                 const Eigen::Ref<const Vector>& x, double y) {
  const Eigen::Index J = summary.pi.size();
  std::vector<double> lp(static_cast<std::size_t>(J));
  for (Eigen::Index j = 0; j < J; ++j) {
    const double pj = summary.pi[j];
    lp[static_cast<std::size_t>(j)] =
        (pj > 0.0 ? std::log(pj) : -std::numeric_limits<double>::infinity()) +
        log_normal_pdf(y, x.dot(summary.beta.row(j)), summary.sigma2[j]);
  }
  const std::vector<double> r = responsibilities_from_logs(lp);
  return Eigen::Map<const Vector>(r.data(), J);
}

Explanation explain_instance(const RelabeledChain& chain,
                             const Eigen::Ref<const Vector>& x, double y, int k,
                             ContributionRanking ranking) {
  const PosteriorSummary s = posterior_summary(chain);
  if (x.size() != s.beta.cols()) throw DimensionError("instance arity mismatch");
  if (!x.allFinite()) throw ValueError("instance contains non-finite values");
  if (k < 0 || k > x.size()) throw ValueError("k must lie in [0, p]");
  const Vector r = instance_responsibilities(s, x, y);
  Eigen::Index best = 0;
  r.maxCoeff(&best);  // ties resolve to the lowest index
  Explanation e;
  e.assigned_component = static_cast<int>(best);
  e.coefficients = s.beta.row(best);
  e.responsibility = r[best];
  const Vector scores = ranking == ContributionRanking::beta_times_x
                            ? e.coefficients.cwiseProduct(x).cwiseAbs()
                            : e.coefficients.cwiseAbs();
  e.top_segments = top_indices(scores, k);
  return e;
}

Explanation explain_instance_mode_level(const RelabeledChain&,
                                        const Eigen::Ref<const Vector>&, double,
                                        int) {
  throw NotImplementedError(
      "mode-level instance assignment is not implemented; use explain_instance");
}

void emit_heatmap(const Vector& importance, int width, int height,
                  const std::string& path) {
  if (width < 1 || height < 1 ||
      static_cast<Eigen::Index>(width) * height != importance.size())
    throw DimensionError("width*height must equal the importance length");
  const double lo = importance.minCoeff();
  const double hi = importance.maxCoeff();
  std::string bytes;
  bytes.reserve(static_cast<std::size_t>(importance.size()));
  for (Eigen::Index i = 0; i < importance.size(); ++i) {
    int v = 0;
    if (hi > lo)
      v = static_cast<int>(std::llround(255.0 * (importance[i] - lo) / (hi - lo)));
    bytes.push_back(static_cast<char>(static_cast<unsigned char>(v)));
  }
  std::ostringstream out;
  out << "P5\n" << width << ' ' << height << "\n255\n" << bytes;
  write_file_atomic(path, out.str());
}

std::string InsightMap::to_json() const {
  nlohmann::json j;
  j["class_tag"] = class_tag;
  j["importance"] = vector_to_json(importance);
  j["top_k"] = top_k;
  j["component_weights"] = vector_to_json(component_weights);
  j["source"] = source;
  return j.dump(2);
}

InsightMap insight_map_from_json(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("insight file is not valid JSON: ") + e.what());
  }
  InsightMap map;
  try {
    map.class_tag = j.value("class_tag", std::string{});
    map.source = j.value("source", std::string{});
    const auto imp = j.at("importance").get<std::vector<double>>();
    map.importance = Eigen::Map<const Vector>(imp.data(),
                                              static_cast<Eigen::Index>(imp.size()));
    map.top_k = j.at("top_k").get<std::vector<int>>();
    if (j.contains("component_weights")) {
      const auto cw = j["component_weights"].get<std::vector<double>>();
      map.component_weights =
          Eigen::Map<const Vector>(cw.data(), static_cast<Eigen::Index>(cw.size()));
    }
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("insight file schema: ") + e.what());
  }
  return map;
}

std::string Explanation::to_json() const {
  nlohmann::json j;
  j["instance_index"] = instance_index;
  j["assigned_component"] = assigned_component + 1;  // 1-based in serialized form
  j["coefficients"] = vector_to_json(coefficients);
  j["top_segments"] = top_segments;
  j["responsibility"] = responsibility;
  return j.dump(2);
}

}  // namespace dmmmen
