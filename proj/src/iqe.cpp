#include "conquer/iqe.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <future>
#include <map>
#include <set>
#include <sstream>

#include "conquer/error.hpp"

namespace conquer {

namespace {

bool in_unit_interval(double x) { return x >= 0.0 && x <= 1.0; }

// Anything an oracle throws surfaces as OracleFailure with context attached.
template <typename Fn>
auto call_oracle(const std::string& context, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const Error& e) {
    if (e.code() == Errc::OracleFailure) {
      fail(Errc::OracleFailure, context + ": " + e.what());
    }
    throw;
  } catch (const std::exception& e) {
    fail(Errc::OracleFailure, context + ": " + e.what());
  }
}

const std::string& id_for(const std::vector<std::string>& gallery_ids, std::size_t index) {
  if (index >= gallery_ids.size()) {
    fail(Errc::IndexOutOfRange, "gallery index " + std::to_string(index) +
                                    " has no id (gallery has " +
                                    std::to_string(gallery_ids.size()) + " ids)");
  }
  return gallery_ids[index];
}

struct AnchorAnswers {
  std::vector<OracleResponse> responses;
};

}  // namespace

void AnchorConfig::validate() const {
  if (k == 0) fail(Errc::ConfigError, "k must be positive");
  if (!in_unit_interval(psi)) fail(Errc::ConfigError, "psi must lie in [0, 1]");
  if (!std::isfinite(xi)) fail(Errc::ConfigError, "xi must be finite");
}

void FusionConfig::validate() const {
  if (!in_unit_interval(gamma)) fail(Errc::ConfigError, "gamma must lie in [0, 1]");
  if (!(beta_bonus >= 0.0) || !std::isfinite(beta_bonus)) {
    fail(Errc::ConfigError, "beta_bonus must be nonnegative");
  }
  if (!in_unit_interval(safeguard_drop)) {
    fail(Errc::ConfigError, "safeguard_drop must lie in [0, 1]");
  }
}

void IqeConfig::validate() const {
  anchor.validate();
  fusion.validate();
  if (!in_unit_interval(tau)) fail(Errc::ConfigError, "tau must lie in [0, 1]");
  if (!std::isfinite(eta) || eta < 0.0) fail(Errc::ConfigError, "eta must be nonnegative");
  if (activation_threshold && !std::isfinite(*activation_threshold)) {
    fail(Errc::ConfigError, "activation_threshold must be finite");
  }
  if (max_in_flight == 0) fail(Errc::ConfigError, "max_in_flight must be positive");
}

std::vector<Candidate> AnchorSet::anchors() const {
  std::vector<Candidate> out;
  for (const Verification& v : verified) {
    if (v.accepted) out.push_back({v.gallery_index, v.id});
  }
  return out;
}

std::vector<std::size_t> AnchorSet::gallery_indices() const {
  std::vector<std::size_t> out;
  for (const Verification& v : verified) {
    if (v.accepted) out.push_back(v.gallery_index);
  }
  return out;
}

bool AnchorSet::empty() const {
  return std::none_of(verified.begin(), verified.end(),
                      [](const Verification& v) { return v.accepted; });
}

AnchorDecision select_anchors(const RankedList& ranking, Oracle& oracle,
                              const AnchorConfig& cfg, const Query& query,
                              const std::vector<std::string>& gallery_ids) {
  if (ranking.entries.empty()) fail(Errc::EmptyRanking, "cannot select anchors from nothing");
  const double top = ranking.top().score;
  if (top > cfg.xi) return EarlyStop{top};

  AnchorSet set;
  const std::size_t k = std::min(cfg.k, ranking.entries.size());
  for (std::size_t j = 0; j < k; ++j) {
    const std::size_t index = ranking.entries[j].gallery_index;
    Candidate candidate{index, id_for(gallery_ids, index)};
    const double v = call_oracle("verify failed at gallery index " + std::to_string(index),
                                 [&] { return oracle.verify(query, candidate); });
    if (!in_unit_interval(v)) {
      fail(Errc::OracleFailure, "verify returned " + std::to_string(v) +
                                    " at gallery index " + std::to_string(index));
    }
    set.verified.push_back({index, candidate.id, v, v >= cfg.psi});
  }
  return set;
}

std::string normalize_attribute(std::string_view answer) {
  std::string out;
  bool pending_space = false;
  for (const char ch : answer) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

EvidenceSet collect_evidence(const Query& query, const std::vector<Candidate>& anchors,
                             Oracle& oracle, double tau, double eta,
                             std::size_t max_in_flight) {
  if (anchors.empty()) fail(Errc::EmptyAnchorSet, "evidence needs at least one anchor");
  if (max_in_flight == 0) max_in_flight = 1;

  auto interrogate = [&](const Candidate& anchor) {
    const std::string where = "anchor '" + anchor.id + "' (gallery index " +
                              std::to_string(anchor.gallery_index) + ")";
    auto questions = call_oracle("question generation failed for " + where,
                                 [&] { return oracle.generate_questions(query, anchor); });
    auto responses = call_oracle("answering failed for " + where,
                                 [&] { return oracle.answer(query, anchor, questions); });
    for (const OracleResponse& r : responses) {
      if (!in_unit_interval(r.confidence)) {
        fail(Errc::OracleFailure, "answer confidence outside [0, 1] for " + where);
      }
    }
    return AnchorAnswers{std::move(responses)};
  };

  std::vector<AnchorAnswers> answers(anchors.size());
  for (std::size_t start = 0; start < anchors.size(); start += max_in_flight) {
    const std::size_t stop = std::min(anchors.size(), start + max_in_flight);
    std::vector<std::future<AnchorAnswers>> batch;
    for (std::size_t i = start; i < stop; ++i) {
      batch.push_back(std::async(std::launch::async, interrogate, std::cref(anchors[i])));
    }
    // Drain every future before rethrowing so no task outlives this frame.
    std::exception_ptr first_error;
    for (std::size_t i = start; i < stop; ++i) {
      try {
        answers[i] = batch[i - start].get();
      } catch (...) {
        if (!first_error) first_error = std::current_exception();
      }
    }
    if (first_error) std::rethrow_exception(first_error);
  }

  // Votes accumulate in anchor order, then response order.
  std::map<std::string, double> sums;
  for (const AnchorAnswers& a : answers) {
    for (const OracleResponse& r : a.responses) {
      if (r.confidence < tau) continue;
      std::string u = normalize_attribute(r.answer);
      if (u.empty()) continue;
      sums[std::move(u)] += r.confidence;
    }
  }

  EvidenceSet set;
  set.tau = tau;
  set.eta = eta;
  const auto n_anchors = static_cast<double>(anchors.size());
  for (const auto& [attribute, sum] : sums) {
    set.votes.push_back({attribute, sum / n_anchors});
  }
  std::stable_sort(set.votes.begin(), set.votes.end(),
                   [](const Evidence& a, const Evidence& b) { return a.score > b.score; });
  for (const Evidence& e : set.votes) {
    if (e.score >= eta) set.items.push_back(e);
  }
  return set;
}

Query enhance_query(const Query& query, const EvidenceSet& evidence, Oracle& oracle) {
  if (evidence.empty()) return query;
  std::string text = call_oracle("reconstruction failed",
                                 [&] { return oracle.reconstruct(query, evidence); });
  if (text.empty()) fail(Errc::OracleFailure, "reconstruction returned an empty query");
  return Query{query.id, std::move(text), std::nullopt};
}

RankedList fuse_scores(const Eigen::VectorXd& sim_orig, const Eigen::VectorXd& sim_enh,
                       const std::vector<std::size_t>& anchors, const FusionConfig& cfg,
                       std::string query_id) {
  if (sim_orig.size() != sim_enh.size()) {
    fail(Errc::LengthMismatch, "similarity vectors have lengths " +
                                   std::to_string(sim_orig.size()) + " and " +
                                   std::to_string(sim_enh.size()));
  }
  if (sim_orig.size() == 0) fail(Errc::EmptyGallery, "cannot fuse over an empty gallery");
  const double mix = 1.0 - cfg.gamma;
  Eigen::VectorXd fused(sim_orig.size());
  for (Eigen::Index i = 0; i < sim_orig.size(); ++i) {
    fused(i) = sim_orig(i) + mix * (sim_enh(i) - sim_orig(i));
  }
  if (cfg.beta_bonus != 0.0) {
    for (const std::size_t a : std::set<std::size_t>(anchors.begin(), anchors.end())) {
      if (a >= static_cast<std::size_t>(fused.size())) {
        fail(Errc::IndexOutOfRange, "anchor index " + std::to_string(a) + " outside gallery");
      }
      fused(static_cast<Eigen::Index>(a)) += cfg.beta_bonus;
    }
  }
  return make_ranking(std::move(query_id), fused);
}

const RankedList& safeguard(const RankedList& original, const RankedList& fused,
                            double sim_orig_of_fused_top1, double sim_orig_of_orig_top1,
                            const FusionConfig& cfg) {
  if (original.entries.size() != fused.entries.size()) {
    fail(Errc::GalleryMismatch, "rankings cover galleries of different sizes");
  }
  std::vector<std::size_t> a;
  std::vector<std::size_t> b;
  for (const RankEntry& e : original.entries) a.push_back(e.gallery_index);
  for (const RankEntry& e : fused.entries) b.push_back(e.gallery_index);
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  if (a != b) fail(Errc::GalleryMismatch, "rankings cover different gallery indices");

  const double threshold = (1.0 - cfg.safeguard_drop) * sim_orig_of_orig_top1;
  return sim_orig_of_fused_top1 < threshold ? original : fused;
}

std::size_t word_count(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::size_t n = 0;
  std::string word;
  while (in >> word) ++n;
  return n;
}

std::string_view outcome_name(IqeOutcome outcome) {
  switch (outcome) {
    case IqeOutcome::EarlyStop: return "early_stop";
    case IqeOutcome::NotTriggered: return "not_triggered";
    case IqeOutcome::NoAnchors: return "no_anchors";
    case IqeOutcome::Fused: return "fused";
    case IqeOutcome::Reverted: return "reverted";
    case IqeOutcome::OracleFailure: return "oracle_failure";
  }
  return "unknown";
}

IqeResult run_iqe(const Query& query, const Eigen::VectorXd& gallery_sims,
                  const std::vector<std::string>& gallery_ids,
                  const QuerySimilarity& enhanced_similarity, Oracle& oracle,
                  const IqeConfig& cfg) {
  if (gallery_sims.size() == 0) fail(Errc::EmptyGallery, "gallery is empty");
  if (gallery_ids.size() != static_cast<std::size_t>(gallery_sims.size())) {
    fail(Errc::LengthMismatch, "gallery has " + std::to_string(gallery_sims.size()) +
                                   " similarities but " + std::to_string(gallery_ids.size()) +
                                   " ids");
  }
  cfg.validate();

  CountingOracle counted(oracle);
  IqeResult result;
  result.original_ranking = make_ranking(query.id, gallery_sims);
  result.final_ranking = result.original_ranking;
  IqeTrace& trace = result.trace;
  trace.query_id = query.id;
  trace.query_words = word_count(query.text);
  trace.top1_score = result.original_ranking.top().score;

  auto finish = [&](IqeOutcome outcome) {
    trace.outcome = outcome;
    trace.oracle_calls = counted.counts();
    return result;
  };

  if (trace.top1_score > cfg.anchor.xi) {
    trace.early_stop = true;
    return finish(IqeOutcome::EarlyStop);
  }
  const bool short_query = trace.query_words < cfg.query_len_min;
  const bool low_confidence = trace.top1_score < cfg.activation();
  trace.triggered = short_query || low_confidence;
  if (short_query && low_confidence) {
    trace.trigger_reason = "short_query+low_confidence";
  } else if (short_query) {
    trace.trigger_reason = "short_query";
  } else if (low_confidence) {
    trace.trigger_reason = "low_confidence";
  }
  if (!trace.triggered) return finish(IqeOutcome::NotTriggered);

  try {
    const AnchorDecision decision =
        select_anchors(result.original_ranking, counted, cfg.anchor, query, gallery_ids);
    // The early-stop branch was handled above.
    const auto& anchor_set = std::get<AnchorSet>(decision);
    trace.verifications = anchor_set.verified;
    trace.anchors = anchor_set.gallery_indices();
    if (anchor_set.empty()) return finish(IqeOutcome::NoAnchors);

    const EvidenceSet evidence = collect_evidence(query, anchor_set.anchors(), counted,
                                                  cfg.tau, cfg.eta, cfg.max_in_flight);
    trace.votes = evidence.votes;
    trace.evidence = evidence.items;
    const Query enhanced = enhance_query(query, evidence, counted);
    trace.enhancement_skipped = evidence.empty();
    trace.enhanced_text = enhanced.text;

    Eigen::VectorXd sim_enh = gallery_sims;
    if (enhanced.text != query.text) {
      if (!enhanced_similarity) {
        fail(Errc::InvalidArgument, "no similarity function for the enhanced query");
      }
      sim_enh = enhanced_similarity(enhanced);
    }
    const RankedList fused =
        fuse_scores(gallery_sims, sim_enh, trace.anchors, cfg.fusion, query.id);
    const double fused_top1 =
        gallery_sims(static_cast<Eigen::Index>(fused.top().gallery_index));
    const double orig_top1 = trace.top1_score;
    trace.fused_top1_orig_sim = fused_top1;
    trace.safeguard_threshold = (1.0 - cfg.fusion.safeguard_drop) * orig_top1;
    const RankedList& chosen =
        safeguard(result.original_ranking, fused, fused_top1, orig_top1, cfg.fusion);
    trace.safeguard_reverted = &chosen == &result.original_ranking;
    if (trace.safeguard_reverted) return finish(IqeOutcome::Reverted);
    result.final_ranking = fused;
    return finish(IqeOutcome::Fused);
  } catch (const Error& e) {
    if (e.code() != Errc::OracleFailure) throw;
    trace.error = e.what();
    result.final_ranking = result.original_ranking;
    return finish(IqeOutcome::OracleFailure);
  }
}

}  // namespace conquer
