#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

namespace conquer {

struct Query {
  std::string id;
  std::string text;
  std::optional<Eigen::VectorXd> embedding;
};

/// A gallery candidate as the oracle sees it.
struct Candidate {
  std::size_t gallery_index = 0;
  std::string id;
};

struct OracleResponse {
  std::string question;
  std::string answer;
  double confidence = 0.0;
};

struct Evidence {
  std::string attribute;
  double score = 0.0;

  bool operator==(const Evidence&) const = default;
};

struct EvidenceSet {
  /// Attributes with score >= eta, by descending score then attribute.
  std::vector<Evidence> items;
  /// Every attribute that received a vote, same order, before the eta cut.
  std::vector<Evidence> votes;
  double tau = 0.85;
  double eta = 0.5;

  bool empty() const { return items.empty(); }
  /// Attributes sorted lexicographically and joined with '|'.
  std::string key() const;
  std::vector<std::string> attributes() const;
};

/// The multimodal reasoning model consulted during query enhancement.
/// Implementations report failures by throwing Error(Errc::OracleFailure).
class Oracle {
 public:
  virtual ~Oracle() = default;

  virtual double verify(const Query& query, const Candidate& candidate) = 0;
  virtual std::vector<std::string> generate_questions(const Query& query,
                                                      const Candidate& candidate) = 0;
  virtual std::vector<OracleResponse> answer(const Query& query, const Candidate& candidate,
                                             const std::vector<std::string>& questions) = 0;
  virtual std::string reconstruct(const Query& query, const EvidenceSet& evidence) = 0;
};

struct OracleCallCounts {
  std::size_t verify = 0;
  std::size_t questions = 0;
  std::size_t answer = 0;
  std::size_t reconstruct = 0;

  std::size_t total() const { return verify + questions + answer + reconstruct; }
};

/// Forwards to another oracle and counts calls. Safe for concurrent use when
/// the wrapped oracle is.
class CountingOracle final : public Oracle {
 public:
  explicit CountingOracle(Oracle& inner) : inner_(inner) {}

  double verify(const Query& query, const Candidate& candidate) override;
  std::vector<std::string> generate_questions(const Query& query,
                                              const Candidate& candidate) override;
  std::vector<OracleResponse> answer(const Query& query, const Candidate& candidate,
                                     const std::vector<std::string>& questions) override;
  std::string reconstruct(const Query& query, const EvidenceSet& evidence) override;

  OracleCallCounts counts() const;

 private:
  Oracle& inner_;
  std::atomic<std::size_t> verify_{0};
  std::atomic<std::size_t> questions_{0};
  std::atomic<std::size_t> answer_{0};
  std::atomic<std::size_t> reconstruct_{0};
};

/// Always confident, never produces evidence, and echoes the query on
/// reconstruction. Enhancement through it leaves rankings untouched.
class IdentityOracle final : public Oracle {
 public:
  double verify(const Query&, const Candidate&) override { return 1.0; }
  std::vector<std::string> generate_questions(const Query&, const Candidate&) override {
    return {};
  }
  std::vector<OracleResponse> answer(const Query&, const Candidate&,
                                     const std::vector<std::string>&) override {
    return {};
  }
  std::string reconstruct(const Query& query, const EvidenceSet&) override {
    return query.text;
  }
};

// Fixture-backed oracle. The fixture maps a query id to
//   { "verify":      { anchor_id: confidence },
//     "questions":   { anchor_id: [question, ...] },
//     "answers":     { anchor_id: [ {question, answer, confidence}, ... ] },
//     "reconstruct": { evidence_key: enhanced_text } }
// where evidence_key is the sorted '|'-joined attribute list. Any lookup the
// fixture does not cover is an OracleFailure. Read-only after construction.
class MockOracle final : public Oracle {
 public:
  explicit MockOracle(const nlohmann::json& fixture);
  static MockOracle from_file(const std::filesystem::path& path);

  double verify(const Query& query, const Candidate& candidate) override;
  std::vector<std::string> generate_questions(const Query& query,
                                              const Candidate& candidate) override;
  std::vector<OracleResponse> answer(const Query& query, const Candidate& candidate,
                                     const std::vector<std::string>& questions) override;
  std::string reconstruct(const Query& query, const EvidenceSet& evidence) override;

 private:
  struct Entry {
    std::map<std::string, double> verify;
    std::map<std::string, std::vector<std::string>> questions;
    std::map<std::string, std::vector<OracleResponse>> answers;
    std::map<std::string, std::string> reconstruct;
  };

  const Entry& entry(const Query& query) const;

  std::map<std::string, Entry> entries_;
};

// JSON-over-HTTP client for a remote oracle service:
//   POST /verify       {"query", "anchor_id"}              -> {"confidence"}
//   POST /questions    {"query", "anchor_id"}              -> {"questions": [..]}
//   POST /answer       {"query", "anchor_id", "questions"} -> {"responses": [..]}
//   POST /reconstruct  {"query", "evidence": [..]}         -> {"enhanced_query"}
// Each call opens its own connection, so concurrent use is safe.
class HttpOracle final : public Oracle {
 public:
  explicit HttpOracle(std::string base_url,
                      std::chrono::milliseconds timeout = std::chrono::seconds(30));

  double verify(const Query& query, const Candidate& candidate) override;
  std::vector<std::string> generate_questions(const Query& query,
                                              const Candidate& candidate) override;
  std::vector<OracleResponse> answer(const Query& query, const Candidate& candidate,
                                     const std::vector<std::string>& questions) override;
  std::string reconstruct(const Query& query, const EvidenceSet& evidence) override;

 private:
  nlohmann::json post(const std::string& endpoint, const nlohmann::json& body) const;

  std::string host_;
  std::string path_prefix_;
  std::chrono::milliseconds timeout_;
};

/// Parses one oracle response object; throws OracleFailure on schema errors.
OracleResponse parse_oracle_response(const nlohmann::json& j);

}  // namespace conquer
