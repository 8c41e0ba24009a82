#include "conquer/cli/commands.hpp"

#include <cstdlib>
#include <random>

#include "conquer/cli/json_io.hpp"
#include "conquer/error.hpp"
#include "conquer/eval.hpp"
#include "conquer/iqe.hpp"
#include "conquer/losses.hpp"
#include "conquer/mining.hpp"
#include "conquer/oracle.hpp"
#include "conquer/ot.hpp"

namespace conquer::cli {

using nlohmann::json;

namespace {

const Item& item_at(const FeatureBundle& b, std::size_t i, const char* which) {
  if (i >= b.items.size()) {
    fail(Errc::IndexOutOfRange, std::string(which) + " item " + std::to_string(i) +
                                    " out of range (bundle has " +
                                    std::to_string(b.items.size()) + ")");
  }
  return b.items[i];
}

CostFunction cost_function(const PipelineConfig& cfg,
                           const std::optional<std::filesystem::path>& weight) {
  CostFunction f;
  f.kind = cfg.cost_kind;
  if (weight) f.weight = matrix_from_json(read_json(*weight));
  return f;
}

Eigen::VectorXd vector_from_json(const json& j, const std::string& what) {
  if (!j.is_array()) fail(Errc::MalformedInput, what + " must be a list of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) fail(Errc::MalformedInput, what + " must be a list of numbers");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

std::unique_ptr<Oracle> make_oracle(const OracleChoice& choice) {
  if (choice.kind == "mock") {
    if (!choice.fixture) fail(Errc::ConfigError, "--oracle=mock needs --fixture");
    return std::make_unique<MockOracle>(MockOracle::from_file(*choice.fixture));
  }
  if (choice.kind == "http") {
    std::optional<std::string> url = choice.url;
    if (!url) {
      if (const char* env = std::getenv("CONQUER_ORACLE_URL"); env != nullptr && *env != '\0') {
        url = env;
      }
    }
    if (!url) fail(Errc::ConfigError, "--oracle=http needs --oracle-url or CONQUER_ORACLE_URL");
    return std::make_unique<HttpOracle>(*url);
  }
  fail(Errc::ConfigError, "unknown oracle kind '" + choice.kind + "'");
}

}  // namespace

SynthBundles synthesize(std::uint64_t seed, const SynthOptions& opts) {
  if (opts.identities == 0 || opts.dim == 0) {
    fail(Errc::InvalidArgument, "identities and dim must be positive");
  }
  if (!(opts.noise >= 0.0)) fail(Errc::InvalidArgument, "noise must be nonnegative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const auto d = static_cast<Eigen::Index>(opts.dim);
  const auto t = static_cast<Eigen::Index>(opts.tokens_per_item);
  auto draw = [&](Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
    return m;
  };
  // Values pass through binary32 so that in-memory and on-disk bundles agree.
  auto to_float = [](Eigen::MatrixXd m) {
    for (Eigen::Index i = 0; i < m.size(); ++i) {
      m.data()[i] = static_cast<double>(static_cast<float>(m.data()[i]));
    }
    return m;
  };

  SynthBundles out;
  out.images.modality = Modality::Image;
  out.texts.modality = Modality::Text;
  out.images.dim = out.texts.dim = opts.dim;
  for (std::size_t i = 0; i < opts.identities; ++i) {
    const Eigen::VectorXd latent = draw(d, 1);
    const Eigen::MatrixXd latent_tokens = draw(d, t);
    char suffix[16];
    std::snprintf(suffix, sizeof(suffix), "%05zu", i);
    for (FeatureBundle* b : {&out.images, &out.texts}) {
      Item item;
      item.id = (b == &out.images ? "img_" : "txt_") + std::string(suffix);
      item.identity_label = i;
      item.global_vec = to_float(latent + opts.noise * draw(d, 1));
      item.local_tokens = to_float(latent_tokens + opts.noise * draw(d, t));
      b->items.push_back(std::move(item));
    }
  }
  return out;
}

json cmd_synth(const PipelineConfig& cfg, const SynthOptions& opts,
               const std::filesystem::path& images_out, const std::filesystem::path& texts_out) {
  const SynthBundles b = synthesize(cfg.seed, opts);
  save_bundle(b.images, images_out);
  save_bundle(b.texts, texts_out);
  return {{"identities", opts.identities},
          {"tokens_per_item", opts.tokens_per_item},
          {"dim", opts.dim},
          {"noise", opts.noise},
          {"seed", cfg.seed}};
}

FeatureBundle load_for_cli(const std::filesystem::path& path, bool raw) {
  FeatureBundle b = load_bundle(path);
  return raw ? b : l2_normalize(b);
}

json cmd_sim(const PipelineConfig&, const std::filesystem::path& images,
             const std::filesystem::path& texts, const SimOptions& opts,
             const std::filesystem::path& out) {
  const FeatureBundle img = load_for_cli(images, opts.raw);
  const FeatureBundle txt = load_for_cli(texts, opts.raw);
  SimilarityMatrix s;
  if (opts.local) {
    s = local_similarity(item_at(img, opts.image_item, "image").local_tokens,
                         item_at(txt, opts.text_item, "text").local_tokens);
    s.row_source = "local:" + img.items[opts.image_item].id;
    s.col_source = "local:" + txt.items[opts.text_item].id;
  } else {
    s = global_similarity(img, txt);
  }
  write_json(out, similarity_to_json(s));
  return {{"kind", opts.local ? "local" : "global"},
          {"shape", {s.values.rows(), s.values.cols()}},
          {"min", s.values.minCoeff()},
          {"max", s.values.maxCoeff()}};
}

json cmd_mine(const PipelineConfig& cfg, const std::filesystem::path& sim,
              const std::filesystem::path& out) {
  const SimilarityMatrix s = similarity_from_json(read_json(sim));
  const PairPartition p = partition_pairs(s, cfg.thresholds);
  const NegativeSet n = mine_complementary_negatives(s, p, cfg.negatives_per_row);
  write_json(out, {{"partition", partition_to_json(p)}, {"negatives", negatives_to_json(n)}});
  return {{"clean", p.clean.size()},
          {"uncertain", p.uncertain.size()},
          {"refinable", p.refinable.size()},
          {"negatives", n.entries.size()}};
}

json cmd_ot(const PipelineConfig& cfg, const OtInput& in, const std::filesystem::path& out) {
  Eigen::MatrixXd cost;
  if (in.cost) {
    if (in.images || in.texts) fail(Errc::ConfigError, "give either --cost or --images/--texts");
    cost = matrix_from_json(read_json(*in.cost));
  } else {
    if (!in.images || !in.texts) fail(Errc::ConfigError, "ot needs --cost or --images and --texts");
    const FeatureBundle img = load_for_cli(*in.images, false);
    const FeatureBundle txt = load_for_cli(*in.texts, false);
    cost = cost_matrix(item_at(img, in.image_item, "image").local_tokens,
                       item_at(txt, in.text_item, "text").local_tokens,
                       cost_function(cfg, in.weight));
  }
  const TransportPlan plan = sinkhorn(TransportProblem::uniform(cost, cfg.sinkhorn));
  write_json(out, plan_to_json(plan, cost));
  return {{"shape", {plan.plan.rows(), plan.plan.cols()}},
          {"iterations", plan.iterations_used},
          {"marginal_error", plan.marginal_error},
          {"converged", plan.converged},
          {"transport_cost", transport_cost(plan.plan, cost)}};
}

json cmd_loss(const PipelineConfig& cfg, const std::filesystem::path& images,
              const std::filesystem::path& texts,
              const std::optional<std::filesystem::path>& weight,
              const std::filesystem::path& out) {
  const FeatureBundle img = load_for_cli(images, false);
  const FeatureBundle txt = load_for_cli(texts, false);
  if (img.items.size() != txt.items.size()) {
    fail(Errc::DimensionMismatch, "matched batch needs equal item counts");
  }
  const SimilarityMatrix s = global_similarity(img, txt);
  const PairPartition p = partition_pairs(s, cfg.thresholds);
  const NegativeSet negatives = mine_complementary_negatives(s, p, cfg.negatives_per_row);

  const CostFunction f = cost_function(cfg, weight);
  double ot_sum = 0.0;
  std::size_t ot_pairs = 0;
  bool all_converged = true;
  for (std::size_t i = 0; i < img.items.size(); ++i) {
    const auto& v = img.items[i].local_tokens;
    const auto& w = txt.items[i].local_tokens;
    if (v.cols() == 0 || w.cols() == 0) continue;
    const SimilarityMatrix s_loc = local_similarity(v, w);
    const TransportPlan plan =
        sinkhorn(TransportProblem::uniform(cost_matrix(v, w, f), cfg.sinkhorn));
    all_converged = all_converged && plan.converged;
    ot_sum += ot_kl_loss(plan, s_loc);
    ++ot_pairs;
  }
  const double ot = ot_pairs == 0 ? 0.0 : ot_sum / static_cast<double>(ot_pairs);
  const LossReport r = care_loss(align_loss(s, cfg.loss.temperature),
                                 neg_loss(s, negatives, cfg.loss.margin), ot, cfg.loss);
  const json report = {{"align", r.align},
                       {"neg", r.neg},
                       {"ot", r.ot},
                       {"total", r.total},
                       {"alpha", cfg.loss.alpha},
                       {"beta", cfg.loss.beta},
                       {"negatives", negatives.entries.size()},
                       {"ot_pairs", ot_pairs},
                       {"sinkhorn_converged", all_converged}};
  write_json(out, report);
  return report;
}

json cmd_rank(const PipelineConfig&, const std::filesystem::path& images,
              const std::filesystem::path& texts, const std::filesystem::path& out,
              const std::optional<std::filesystem::path>& relevance_out) {
  const FeatureBundle gallery = load_for_cli(images, false);
  const FeatureBundle queries = load_for_cli(texts, false);
  json rankings = json::array();
  for (const Item& q : queries.items) {
    rankings.push_back(ranking_to_json(rank_gallery(q.global_vec, gallery, q.id)));
  }
  write_json(out, rankings);
  if (relevance_out) {
    write_json(*relevance_out, relevance_to_json(relevance_from_labels(queries, gallery)));
  }
  return {{"queries", queries.items.size()}, {"gallery", gallery.items.size()}};
}

json cmd_iqe(const PipelineConfig& cfg, const std::filesystem::path& scenario_path,
             const OracleChoice& choice, const std::filesystem::path& out) {
  const json scenario = read_json(scenario_path);
  if (!scenario.is_object() || !scenario.contains("gallery") || !scenario.contains("queries")) {
    fail(Errc::MalformedInput, "scenario needs 'gallery' and 'queries'");
  }
  std::vector<std::string> gallery_ids;
  for (const json& id : scenario["gallery"]) {
    if (!id.is_string()) fail(Errc::MalformedInput, "gallery ids must be strings");
    gallery_ids.push_back(id.get<std::string>());
  }
  std::map<std::string, Eigen::VectorXd> encoded;
  if (scenario.contains("enhanced_similarities")) {
    for (const auto& [text, sims] : scenario["enhanced_similarities"].items()) {
      encoded[text] = vector_from_json(sims, "enhanced similarities");
    }
  }
  const QuerySimilarity enhanced_similarity = [&](const Query& q) {
    const auto it = encoded.find(q.text);
    if (it == encoded.end()) {
      fail(Errc::OracleFailure, "scenario has no similarities for enhanced query '" + q.text + "'");
    }
    if (static_cast<std::size_t>(it->second.size()) != gallery_ids.size()) {
      fail(Errc::LengthMismatch, "enhanced similarities for '" + q.text + "' have wrong length");
    }
    return it->second;
  };

  const std::unique_ptr<Oracle> oracle = make_oracle(choice);
  json rankings = json::array();
  json traces = json::array();
  std::map<std::string, std::size_t> outcomes;
  for (const json& q : scenario["queries"]) {
    if (!q.is_object() || !q.contains("id") || !q.contains("text") || !q.contains("similarities")) {
      fail(Errc::MalformedInput, "queries need 'id', 'text' and 'similarities'");
    }
    const Query query{q["id"].get<std::string>(), q["text"].get<std::string>(), std::nullopt};
    const Eigen::VectorXd sims = vector_from_json(q["similarities"], "similarities");
    const IqeResult r = run_iqe(query, sims, gallery_ids, enhanced_similarity, *oracle, cfg.iqe);
    rankings.push_back(ranking_to_json(r.final_ranking));
    traces.push_back(trace_to_json(r.trace));
    ++outcomes[std::string(outcome_name(r.trace.outcome))];
  }
  write_json(out, {{"rankings", rankings}, {"traces", traces}});
  return {{"queries", rankings.size()}, {"outcomes", outcomes}, {"oracle", choice.kind}};
}

json cmd_eval(const PipelineConfig&, const std::filesystem::path& rankings_path,
              const std::filesystem::path& relevance_path,
              const std::optional<std::filesystem::path>& out) {
  const auto rankings = rankings_from_json(read_json(rankings_path));
  const RelevanceMap relevance = relevance_from_json(read_json(relevance_path));
  const json metrics = {{"R@1", rank_at_k(rankings, relevance, 1)},
                        {"R@5", rank_at_k(rankings, relevance, 5)},
                        {"mAP", mean_average_precision(rankings, relevance)},
                        {"queries", rankings.size()}};
  if (out) write_json(*out, metrics);
  return metrics;
}

}  // namespace conquer::cli
