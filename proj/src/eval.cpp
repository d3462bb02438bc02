#include "itvreg/eval.hpp"

#include <iomanip>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace itvreg {

double precision_at_k(const RankingResult& ranking, const std::set<std::string>& relevant, std::size_t k) {
  if (k < 1) throw Error("precision_at_k needs k >= 1");
  if (k > ranking.top.size())
    throw Error("k = " + std::to_string(k) + " exceeds ranking length " + std::to_string(ranking.top.size()));
  std::size_t hits = 0;
  for (std::size_t i = 0; i < k; ++i) hits += relevant.count(ranking.top[i].id);
  return static_cast<double>(hits) / static_cast<double>(k);
}

double auc_partial(std::vector<std::pair<double, int>> scored, double fpr_max) {
  if (!(fpr_max > 0.0 && fpr_max <= 1.0)) throw Error("fpr_max must lie in (0,1]");
  std::size_t P = 0, N = 0;
  for (const auto& [s, y] : scored) {
    if (y != 0 && y != 1) throw Error("labels must be 0 or 1");
    (y ? P : N) += 1;
  }
  if (P == 0 || N == 0) throw Error("partial AUC needs at least one positive and one negative");
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });

  double area = 0.0, fpr = 0.0, tpr = 0.0;
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < scored.size() && fpr < fpr_max) {
    const double s = scored[i].first;
    while (i < scored.size() && scored[i].first == s) {
      (scored[i].second ? tp : fp) += 1;
      ++i;
    }
    const double nfpr = static_cast<double>(fp) / static_cast<double>(N);
    const double ntpr = static_cast<double>(tp) / static_cast<double>(P);
    if (nfpr > fpr_max) {
      // Clip the segment where it crosses fpr_max.
      const double t = (fpr_max - fpr) / (nfpr - fpr);
      area += (fpr_max - fpr) * (tpr + (tpr + t * (ntpr - tpr))) / 2.0;
      fpr = fpr_max;
      break;
    }
    area += (nfpr - fpr) * (tpr + ntpr) / 2.0;
    fpr = nfpr;
    tpr = ntpr;
  }
  return area / fpr_max;
}

std::map<int, std::optional<double>> quantile_gain_report(const EvalReport& method, const EvalReport& baseline) {
  std::set<int> mb, bb;
  for (const auto& [b, v] : method.quantile_p1) mb.insert(b);
  for (const auto& [b, v] : baseline.quantile_p1) bb.insert(b);
  if (mb != bb) throw Error("quantile reports cover different bins");
  std::map<int, std::optional<double>> out;
  for (const auto& [b, base] : baseline.quantile_p1) {
    if (base == 0.0)
      out[b] = std::nullopt;
    else
      out[b] = 100.0 * (method.quantile_p1.at(b) - base) / base;
  }
  return out;
}

std::string eval_report_json(const EvalReport& r) {
  nlohmann::ordered_json j;
  j["split"] = r.split;
  nlohmann::ordered_json p;
  for (const auto& [k, v] : r.precision_at) p[std::to_string(k)] = v;
  j["precision_at"] = p;
  j["auc_005"] = r.auc_005 ? nlohmann::ordered_json(*r.auc_005) : nlohmann::ordered_json(nullptr);
  nlohmann::ordered_json q;
  for (const auto& [b, v] : r.quantile_p1)
    q[std::to_string(b)] = {{"p_at_1", v}, {"queries", r.quantile_queries.at(b)}};
  j["quantile_p_at_1"] = q;
  j["n_queries"] = r.n_queries;
  j["n_empty_ground_truth"] = r.n_empty_ground_truth;
  j["n_candidates"] = r.n_candidates;
  j["excluded_items"] = r.excluded_items;
  j["config_digest"] = r.config_digest;
  return j.dump(2) + "\n";
}

namespace {

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(10) << v;
  return os.str();
}

}  // namespace

std::string eval_csv_header(const std::vector<int>& ks) {
  std::string h = "label,split,n_queries,n_candidates";
  for (int k : ks) h += ",p_at_" + std::to_string(k);
  h += ",auc_005\n";
  return h;
}

std::string eval_csv_row(const EvalReport& r, const std::vector<int>& ks, std::string_view label) {
  std::string row = std::string(label) + "," + r.split + "," + std::to_string(r.n_queries) + "," +
                    std::to_string(r.n_candidates);
  for (int k : ks) {
    auto it = r.precision_at.find(k);
    row += "," + (it == r.precision_at.end() ? std::string() : fmt(it->second));
  }
  row += "," + (r.auc_005 ? fmt(*r.auc_005) : std::string());
  return row + "\n";
}

void write_quantile_csv(std::ostream& os, const EvalReport& baseline, const EvalReport& method) {
  const auto gains = quantile_gain_report(method, baseline);
  os << "bin,baseline,method,gain\n";
  for (const auto& [b, g] : gains)
    os << b << ',' << fmt(baseline.quantile_p1.at(b)) << ',' << fmt(method.quantile_p1.at(b)) << ','
       << (g ? fmt(*g) : std::string("undefined")) << '\n';
}

}  // namespace itvreg
