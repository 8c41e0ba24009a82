#include "conquer/cli/json_io.hpp"

#include <fstream>

#include "conquer/error.hpp"

namespace conquer::cli {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& what) { fail(Errc::MalformedInput, what); }

std::size_t index_value(const json& j, const char* what) {
  const bool ok = j.is_number_unsigned() ||
                  (j.is_number_integer() && j.get<std::int64_t>() >= 0);
  if (!ok) malformed(std::string(what) + " must be a nonnegative integer");
  return j.get<std::size_t>();
}

json index_list(const std::vector<std::size_t>& v) { return json(v); }

}  // namespace

json matrix_to_json(const Eigen::MatrixXd& m) {
  json values = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) values.push_back(m(r, c));
  }
  return {{"shape", {m.rows(), m.cols()}}, {"values", std::move(values)}};
}

Eigen::MatrixXd matrix_from_json(const json& j) {
  if (!j.is_object() || !j.contains("shape") || !j.contains("values")) {
    malformed("matrix JSON needs 'shape' and 'values'");
  }
  const json& shape = j["shape"];
  if (!shape.is_array() || shape.size() != 2) malformed("matrix 'shape' must be [rows, cols]");
  const auto rows = index_value(shape[0], "matrix rows");
  const auto cols = index_value(shape[1], "matrix cols");
  const json& values = j["values"];
  if (!values.is_array() || values.size() != rows * cols) {
    malformed("matrix 'values' must hold rows*cols numbers");
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (!values[k].is_number()) malformed("matrix values must be numbers");
      m(r, c) = values[k++].get<double>();
    }
  }
  return m;
}

json similarity_to_json(const SimilarityMatrix& s) {
  json j = matrix_to_json(s.values);
  j["kind"] = s.kind == SimilarityKind::Global ? "global" : "local";
  j["row_source"] = s.row_source;
  j["col_source"] = s.col_source;
  return j;
}

SimilarityMatrix similarity_from_json(const json& j) {
  SimilarityMatrix s;
  s.values = matrix_from_json(j);
  if (j.contains("kind")) s.kind = j["kind"] == "local" ? SimilarityKind::Local : SimilarityKind::Global;
  if (j.contains("row_source") && j["row_source"].is_string()) s.row_source = j["row_source"];
  if (j.contains("col_source") && j["col_source"].is_string()) s.col_source = j["col_source"];
  return s;
}

json plan_to_json(const TransportPlan& plan, const Eigen::MatrixXd& cost) {
  json j = matrix_to_json(plan.plan);
  j["iterations"] = plan.iterations_used;
  j["marginal_error"] = plan.marginal_error;
  j["converged"] = plan.converged;
  j["transport_cost"] = transport_cost(plan.plan, cost);
  return j;
}

json partition_to_json(const PairPartition& p) {
  return {{"batch_size", p.batch_size},
          {"clean", index_list(p.clean)},
          {"uncertain", index_list(p.uncertain)},
          {"refinable", index_list(p.refinable)},
          {"delta_hi", p.thresholds.delta_hi},
          {"delta_lo", p.thresholds.delta_lo}};
}

json negatives_to_json(const NegativeSet& n) {
  json out = json::array();
  for (const Negative& e : n.entries) {
    out.push_back({{"row", e.row}, {"col", e.col}, {"similarity", e.similarity}});
  }
  return out;
}

json ranking_to_json(const RankedList& r) {
  json entries = json::array();
  for (const RankEntry& e : r.entries) {
    entries.push_back({{"index", e.gallery_index}, {"score", e.score}});
  }
  return {{"query_id", r.query_id}, {"entries", std::move(entries)}};
}

RankedList ranking_from_json(const json& j) {
  if (!j.is_object() || !j.contains("query_id") || !j["query_id"].is_string() ||
      !j.contains("entries") || !j["entries"].is_array()) {
    malformed("ranking needs string 'query_id' and list 'entries'");
  }
  RankedList r;
  r.query_id = j["query_id"].get<std::string>();
  for (const json& e : j["entries"]) {
    if (!e.is_object() || !e.contains("index") || !e.contains("score") ||
        !e["score"].is_number()) {
      malformed("ranking entries need 'index' and numeric 'score'");
    }
    r.entries.push_back({index_value(e["index"], "ranking index"), e["score"].get<double>()});
  }
  return r;
}

std::vector<RankedList> rankings_from_json(const json& j) {
  std::vector<RankedList> out;
  if (j.is_array()) {
    for (const json& r : j) out.push_back(ranking_from_json(r));
  } else if (j.is_object() && j.contains("rankings")) {
    return rankings_from_json(j["rankings"]);
  } else {
    out.push_back(ranking_from_json(j));
  }
  return out;
}

json relevance_to_json(const RelevanceMap& r) {
  json j = json::object();
  for (const auto& [query, rel] : r) j[query] = std::vector<std::size_t>(rel.begin(), rel.end());
  return j;
}

RelevanceMap relevance_from_json(const json& j) {
  if (!j.is_object()) malformed("relevance must map query ids to index lists");
  RelevanceMap r;
  for (const auto& [query, list] : j.items()) {
    if (!list.is_array()) malformed("relevance for '" + query + "' must be a list");
    auto& rel = r[query];
    for (const json& v : list) rel.insert(index_value(v, "relevant index"));
  }
  return r;
}

json trace_to_json(const IqeTrace& t) {
  json verifications = json::array();
  for (const Verification& v : t.verifications) {
    verifications.push_back({{"index", v.gallery_index},
                             {"id", v.id},
                             {"confidence", v.confidence},
                             {"accepted", v.accepted}});
  }
  auto evidence_list = [](const std::vector<Evidence>& items) {
    json out = json::array();
    for (const Evidence& e : items) out.push_back({{"attribute", e.attribute}, {"score", e.score}});
    return out;
  };
  json j = {{"query_id", t.query_id},
            {"outcome", std::string(outcome_name(t.outcome))},
            {"query_words", t.query_words},
            {"top1_score", t.top1_score},
            {"early_stop", t.early_stop},
            {"triggered", t.triggered},
            {"trigger_reason", t.trigger_reason},
            {"verifications", std::move(verifications)},
            {"anchors", t.anchors},
            {"votes", evidence_list(t.votes)},
            {"evidence", evidence_list(t.evidence)},
            {"enhancement_skipped", t.enhancement_skipped},
            {"enhanced_text", t.enhanced_text},
            {"safeguard_reverted", t.safeguard_reverted},
            {"oracle_calls",
             {{"verify", t.oracle_calls.verify},
              {"questions", t.oracle_calls.questions},
              {"answer", t.oracle_calls.answer},
              {"reconstruct", t.oracle_calls.reconstruct},
              {"total", t.oracle_calls.total()}}}};
  j["fused_top1_orig_sim"] = t.fused_top1_orig_sim ? json(*t.fused_top1_orig_sim) : json(nullptr);
  j["safeguard_threshold"] = t.safeguard_threshold ? json(*t.safeguard_threshold) : json(nullptr);
  j["error"] = t.error ? json(*t.error) : json(nullptr);
  return j;
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoFailure, "cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    malformed("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) fail(Errc::IoFailure, "cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  out.flush();
  if (!out) fail(Errc::IoFailure, "write error on '" + path.string() + "'");
}

}  // namespace conquer::cli
