#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "conquer/oracle.hpp"
#include "conquer/ranking.hpp"

namespace conquer {

// Interactive query enhancement. At inference the backbone ranking of a query
// is either accepted as is (confident top-1, or a long query that already
// retrieves well) or refined: verified anchors among the top-K candidates are
// interrogated by an oracle, their answers are pooled into attribute evidence
// by confidence-weighted voting, the oracle rewrites the query with that
// evidence, and the gallery is re-ranked on a mix of original and enhanced
// similarities. A safeguard keeps the original ranking when the new top-1
// scores much worse under the original query.

struct AnchorConfig {
  std::size_t k = 5;
  double psi = 0.90;  // verification threshold
  double xi = 0.85;   // early-stop threshold on the top-1 score

  void validate() const;
};

struct FusionConfig {
  double gamma = 0.6;
  double beta_bonus = 0.1;
  double safeguard_drop = 0.05;

  void validate() const;
};

struct EarlyStop {
  double top_score = 0.0;
};

struct Verification {
  std::size_t gallery_index = 0;
  std::string id;
  double confidence = 0.0;
  bool accepted = false;
};

struct AnchorSet {
  /// Every top-K candidate that was verified, in ranking order.
  std::vector<Verification> verified;

  /// The accepted subset (confidence >= psi), in ranking order.
  std::vector<Candidate> anchors() const;
  std::vector<std::size_t> gallery_indices() const;
  bool empty() const;
};

using AnchorDecision = std::variant<EarlyStop, AnchorSet>;

/// Early stop when the top-1 score exceeds xi; otherwise verifies the top-K
/// candidates with the oracle and keeps those with confidence >= psi.
/// gallery_ids maps gallery indices to the ids the oracle understands.
AnchorDecision select_anchors(const RankedList& ranking, Oracle& oracle,
                              const AnchorConfig& cfg, const Query& query,
                              const std::vector<std::string>& gallery_ids);

/// Case-folds and collapses whitespace so that equivalent answers compare equal.
std::string normalize_attribute(std::string_view answer);

inline constexpr std::size_t kDefaultMaxInFlight = 4;

/// Confidence-weighted voting over anchor answers:
///   score(u) = (1/|A|) * sum_a sum_{responses of a with p >= tau} [answer == u] * p
/// keeping attributes with score >= eta. Anchors are queried with at most
/// max_in_flight concurrent oracle calls; the reduction runs in anchor order.
EvidenceSet collect_evidence(const Query& query, const std::vector<Candidate>& anchors,
                             Oracle& oracle, double tau, double eta,
                             std::size_t max_in_flight = kDefaultMaxInFlight);

/// Rewrites the query with the evidence; empty evidence returns the query as is.
Query enhance_query(const Query& query, const EvidenceSet& evidence, Oracle& oracle);

/// Score(I) = gamma * sim(T, I) + (1 - gamma) * sim(T', I) + beta_bonus * [I in A].
/// Evaluated as sim(T, I) + (1 - gamma) * (sim(T', I) - sim(T, I)) so that
/// gamma = 1 or identical similarity vectors reproduce sim(T, I) bit for bit.
RankedList fuse_scores(const Eigen::VectorXd& sim_orig, const Eigen::VectorXd& sim_enh,
                       const std::vector<std::size_t>& anchors, const FusionConfig& cfg,
                       std::string query_id = {});

/// Returns a reference to `original` when the fused top-1 lost more than
/// safeguard_drop of the original top-1 similarity, otherwise to `fused`.
const RankedList& safeguard(const RankedList& original, const RankedList& fused,
                            double sim_orig_of_fused_top1, double sim_orig_of_orig_top1,
                            const FusionConfig& cfg);

struct IqeConfig {
  AnchorConfig anchor;
  double tau = 0.85;
  double eta = 0.5;
  FusionConfig fusion;
  std::size_t query_len_min = 8;
  /// Top-1 score below which a long query is still enhanced; defaults to xi.
  std::optional<double> activation_threshold;
  std::size_t max_in_flight = kDefaultMaxInFlight;

  double activation() const { return activation_threshold.value_or(anchor.xi); }
  void validate() const;
};

enum class IqeOutcome {
  EarlyStop,
  NotTriggered,
  NoAnchors,
  Fused,
  Reverted,
  OracleFailure,
};

std::string_view outcome_name(IqeOutcome outcome);

struct IqeTrace {
  std::string query_id;
  std::size_t query_words = 0;
  double top1_score = 0.0;
  bool early_stop = false;
  bool triggered = false;
  std::string trigger_reason;
  std::vector<Verification> verifications;
  std::vector<std::size_t> anchors;
  std::vector<Evidence> votes;
  std::vector<Evidence> evidence;
  bool enhancement_skipped = false;
  std::string enhanced_text;
  std::optional<double> fused_top1_orig_sim;
  std::optional<double> safeguard_threshold;
  bool safeguard_reverted = false;
  OracleCallCounts oracle_calls;
  std::optional<std::string> error;
  IqeOutcome outcome = IqeOutcome::EarlyStop;
};

/// Similarity of an (enhanced) query against every gallery item.
using QuerySimilarity = std::function<Eigen::VectorXd(const Query&)>;

struct IqeResult {
  RankedList final_ranking;
  RankedList original_ranking;
  IqeTrace trace;
};

/// The full enhancement pipeline for one query. Oracle failures at any stage
/// degrade to the original ranking with the error recorded in the trace.
IqeResult run_iqe(const Query& query, const Eigen::VectorXd& gallery_sims,
                  const std::vector<std::string>& gallery_ids,
                  const QuerySimilarity& enhanced_similarity, Oracle& oracle,
                  const IqeConfig& cfg);

std::size_t word_count(std::string_view text);

}  // namespace conquer
