#include "conquer/oracle.hpp"

#include <algorithm>
#include <fstream>
#include <regex>

#include "conquer/error.hpp"
#include "httplib.h"

namespace conquer {

using nlohmann::json;

namespace {

[[noreturn]] void oracle_fail(const std::string& what) { fail(Errc::OracleFailure, what); }

double checked_confidence(const json& j, const std::string& context) {
  if (!j.is_number()) oracle_fail(context + ": confidence is not a number");
  const double c = j.get<double>();
  if (!(c >= 0.0 && c <= 1.0)) {
    oracle_fail(context + ": confidence " + std::to_string(c) + " outside [0, 1]");
  }
  return c;
}

std::vector<std::string> string_list(const json& j, const std::string& context) {
  if (!j.is_array()) oracle_fail(context + ": expected a list of strings");
  std::vector<std::string> out;
  for (const json& v : j) {
    if (!v.is_string()) oracle_fail(context + ": expected a list of strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

template <typename Map>
const typename Map::mapped_type& lookup(const Map& map, const std::string& key,
                                        const std::string& context) {
  const auto it = map.find(key);
  if (it == map.end()) oracle_fail(context + ": no fixture entry for '" + key + "'");
  return it->second;
}

}  // namespace

OracleResponse parse_oracle_response(const json& j) {
  if (!j.is_object() || !j.contains("question") || !j.contains("answer") ||
      !j.contains("confidence") || !j["question"].is_string() || !j["answer"].is_string()) {
    oracle_fail("response needs string 'question', string 'answer' and 'confidence'");
  }
  return {j["question"].get<std::string>(), j["answer"].get<std::string>(),
          checked_confidence(j["confidence"], "response")};
}

std::vector<std::string> EvidenceSet::attributes() const {
  std::vector<std::string> out;
  out.reserve(items.size());
  for (const Evidence& e : items) out.push_back(e.attribute);
  return out;
}

std::string EvidenceSet::key() const {
  auto attrs = attributes();
  std::sort(attrs.begin(), attrs.end());
  std::string key;
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    if (i > 0) key += '|';
    key += attrs[i];
  }
  return key;
}

// CountingOracle

double CountingOracle::verify(const Query& query, const Candidate& candidate) {
  ++verify_;
  return inner_.verify(query, candidate);
}

std::vector<std::string> CountingOracle::generate_questions(const Query& query,
                                                            const Candidate& candidate) {
  ++questions_;
  return inner_.generate_questions(query, candidate);
}

std::vector<OracleResponse> CountingOracle::answer(const Query& query,
                                                   const Candidate& candidate,
                                                   const std::vector<std::string>& questions) {
  ++answer_;
  return inner_.answer(query, candidate, questions);
}

std::string CountingOracle::reconstruct(const Query& query, const EvidenceSet& evidence) {
  ++reconstruct_;
  return inner_.reconstruct(query, evidence);
}

OracleCallCounts CountingOracle::counts() const {
  return {verify_.load(), questions_.load(), answer_.load(), reconstruct_.load()};
}

// MockOracle

MockOracle::MockOracle(const json& fixture) {
  if (!fixture.is_object()) oracle_fail("fixture must be a JSON object keyed by query id");
  for (const auto& [query_id, body] : fixture.items()) {
    const std::string ctx = "fixture '" + query_id + "'";
    if (!body.is_object()) oracle_fail(ctx + " must be an object");
    Entry e;
    if (body.contains("verify")) {
      for (const auto& [id, c] : body["verify"].items()) {
        e.verify[id] = checked_confidence(c, ctx + " verify");
      }
    }
    if (body.contains("questions")) {
      for (const auto& [id, qs] : body["questions"].items()) {
        e.questions[id] = string_list(qs, ctx + " questions");
      }
    }
    if (body.contains("answers")) {
      for (const auto& [id, list] : body["answers"].items()) {
        if (!list.is_array()) oracle_fail(ctx + " answers must be lists");
        auto& out = e.answers[id];
        for (const json& r : list) out.push_back(parse_oracle_response(r));
      }
    }
    if (body.contains("reconstruct")) {
      for (const auto& [key, text] : body["reconstruct"].items()) {
        if (!text.is_string()) oracle_fail(ctx + " reconstruct values must be strings");
        e.reconstruct[key] = text.get<std::string>();
      }
    }
    entries_.emplace(query_id, std::move(e));
  }
}

MockOracle MockOracle::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::IoFailure, "cannot open fixture '" + path.string() + "'");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    fail(Errc::OracleFailure, "fixture '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return MockOracle(j);
}

const MockOracle::Entry& MockOracle::entry(const Query& query) const {
  return lookup(entries_, query.id, "mock oracle");
}

double MockOracle::verify(const Query& query, const Candidate& candidate) {
  return lookup(entry(query).verify, candidate.id, "mock verify for '" + query.id + "'");
}

std::vector<std::string> MockOracle::generate_questions(const Query& query,
                                                        const Candidate& candidate) {
  return lookup(entry(query).questions, candidate.id, "mock questions for '" + query.id + "'");
}

std::vector<OracleResponse> MockOracle::answer(const Query& query, const Candidate& candidate,
                                               const std::vector<std::string>&) {
  return lookup(entry(query).answers, candidate.id, "mock answers for '" + query.id + "'");
}

std::string MockOracle::reconstruct(const Query& query, const EvidenceSet& evidence) {
  return lookup(entry(query).reconstruct, evidence.key(),
                "mock reconstruct for '" + query.id + "'");
}

// HttpOracle

HttpOracle::HttpOracle(std::string base_url, std::chrono::milliseconds timeout)
    : timeout_(timeout) {
  static const std::regex kUrl(R"(^(http://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(base_url, m, kUrl)) {
    fail(Errc::InvalidArgument, "oracle URL must look like http://host[:port][/prefix], got '" +
                                    base_url + "'");
  }
  host_ = m[1].str();
  path_prefix_ = m[2].matched ? m[2].str() : "";
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

json HttpOracle::post(const std::string& endpoint, const json& body) const {
  httplib::Client client(host_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  client.set_write_timeout(timeout_);
  const std::string path = path_prefix_ + endpoint;
  auto res = client.Post(path, body.dump(), "application/json");
  if (!res) {
    oracle_fail("POST " + path + " failed: " + httplib::to_string(res.error()));
  }
  if (res->status != 200) {
    oracle_fail("POST " + path + " returned HTTP " + std::to_string(res->status));
  }
  try {
    return json::parse(res->body);
  } catch (const json::exception& e) {
    oracle_fail("POST " + path + " returned invalid JSON: " + e.what());
  }
}

double HttpOracle::verify(const Query& query, const Candidate& candidate) {
  const json r = post("/verify", {{"query", query.text}, {"anchor_id", candidate.id}});
  if (!r.is_object() || !r.contains("confidence")) oracle_fail("/verify: missing 'confidence'");
  return checked_confidence(r["confidence"], "/verify");
}

std::vector<std::string> HttpOracle::generate_questions(const Query& query,
                                                        const Candidate& candidate) {
  const json r = post("/questions", {{"query", query.text}, {"anchor_id", candidate.id}});
  if (!r.is_object() || !r.contains("questions")) oracle_fail("/questions: missing 'questions'");
  return string_list(r["questions"], "/questions");
}

std::vector<OracleResponse> HttpOracle::answer(const Query& query, const Candidate& candidate,
                                               const std::vector<std::string>& questions) {
  const json r = post("/answer", {{"query", query.text},
                                  {"anchor_id", candidate.id},
                                  {"questions", questions}});
  if (!r.is_object() || !r.contains("responses") || !r["responses"].is_array()) {
    oracle_fail("/answer: missing 'responses' list");
  }
  std::vector<OracleResponse> out;
  for (const json& item : r["responses"]) out.push_back(parse_oracle_response(item));
  return out;
}

std::string HttpOracle::reconstruct(const Query& query, const EvidenceSet& evidence) {
  const json r = post("/reconstruct",
                      {{"query", query.text}, {"evidence", evidence.attributes()}});
  if (!r.is_object() || !r.contains("enhanced_query") || !r["enhanced_query"].is_string()) {
    oracle_fail("/reconstruct: missing 'enhanced_query'");
  }
  return r["enhanced_query"].get<std::string>();
}

}  // namespace conquer
