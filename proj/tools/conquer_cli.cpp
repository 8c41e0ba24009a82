#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "conquer/cli/commands.hpp"
#include "conquer/cli/config.hpp"
#include "conquer/cli/json_io.hpp"
#include "conquer/error.hpp"

using conquer::Errc;
using conquer::Error;
using conquer::cli::PipelineConfig;
using nlohmann::json;

namespace {

struct Common {
  std::optional<std::string> config;
  std::optional<std::uint64_t> seed;
  bool paper_defaults = false;
  std::optional<std::string> save_config;
};

PipelineConfig resolve(const Common& c) {
  PipelineConfig cfg;
  if (c.config) cfg = PipelineConfig::from_file(*c.config);
  if (c.paper_defaults) cfg.apply_paper_defaults();
  if (c.seed) cfg.seed = *c.seed;
  cfg.validate();
  return cfg;
}

int report_error(Errc code, const std::string& message) {
  json err = {{"error", {{"code", std::string(conquer::errc_name(code))}, {"message", message}}}};
  std::cerr << err.dump() << '\n';
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"conquer: cross-modal alignment math and interactive query enhancement"};
  app.require_subcommand(1);

  Common common;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "Flat JSON config file");
    sub->add_option("--seed", common.seed, "Random seed override");
    sub->add_flag("--paper-defaults", common.paper_defaults,
                  "Use the published retrieval hyperparameters");
    sub->add_option("--save-config", common.save_config, "Write the resolved config here");
  };

  std::string out;
  std::string images, texts;
  std::optional<std::string> weight;

  conquer::cli::SynthOptions synth;
  std::string images_out, texts_out;
  auto* s_synth = app.add_subcommand("synth", "Generate paired synthetic bundles");
  s_synth->add_option("--identities", synth.identities)->check(CLI::PositiveNumber);
  s_synth->add_option("--tokens", synth.tokens_per_item);
  s_synth->add_option("--dim", synth.dim)->check(CLI::PositiveNumber);
  s_synth->add_option("--noise", synth.noise)->check(CLI::NonNegativeNumber);
  s_synth->add_option("--images-out", images_out)->required();
  s_synth->add_option("--texts-out", texts_out)->required();

  conquer::cli::SimOptions sim;
  auto* s_sim = app.add_subcommand("sim", "Global or token-level similarity matrix");
  s_sim->add_option("--images", images)->required();
  s_sim->add_option("--texts", texts)->required();
  s_sim->add_flag("--local", sim.local, "Token-level similarity of one pair");
  s_sim->add_option("--image-item", sim.image_item);
  s_sim->add_option("--text-item", sim.text_item);
  s_sim->add_flag("--raw,--no-normalize", sim.raw, "Skip unit normalization on load");
  s_sim->add_option("--out", out)->required();

  std::string sim_path;
  auto* s_mine = app.add_subcommand("mine", "Partition pairs and mine negatives");
  s_mine->add_option("--sim", sim_path)->required();
  s_mine->add_option("--out", out)->required();

  conquer::cli::OtInput ot;
  std::optional<std::string> cost_path, ot_images, ot_texts;
  auto* s_ot = app.add_subcommand("ot", "Entropic transport plan");
  s_ot->add_option("--cost", cost_path, "Cost matrix JSON");
  s_ot->add_option("--images", ot_images);
  s_ot->add_option("--texts", ot_texts);
  s_ot->add_option("--image-item", ot.image_item);
  s_ot->add_option("--text-item", ot.text_item);
  s_ot->add_option("--weight", weight, "Bilinear weight matrix JSON");
  s_ot->add_option("--out", out)->required();

  auto* s_loss = app.add_subcommand("loss", "Composite objective on a matched batch");
  s_loss->add_option("--images", images)->required();
  s_loss->add_option("--texts", texts)->required();
  s_loss->add_option("--weight", weight, "Bilinear weight matrix JSON");
  s_loss->add_option("--out", out)->required();

  std::optional<std::string> relevance_out;
  auto* s_rank = app.add_subcommand("rank", "Rank the image gallery for every text query");
  s_rank->add_option("--images", images)->required();
  s_rank->add_option("--texts", texts)->required();
  s_rank->add_option("--relevance-out", relevance_out);
  s_rank->add_option("--out", out)->required();

  conquer::cli::OracleChoice oracle;
  std::optional<std::string> fixture, oracle_url;
  std::string scenario;
  auto* s_iqe = app.add_subcommand("iqe", "Interactive query enhancement over a scenario");
  s_iqe->add_option("--scenario", scenario)->required();
  s_iqe->add_option("--oracle", oracle.kind)->check(CLI::IsMember({"mock", "http"}));
  s_iqe->add_option("--fixture", fixture, "Mock oracle fixture");
  s_iqe->add_option("--oracle-url", oracle_url, "Falls back to CONQUER_ORACLE_URL");
  s_iqe->add_option("--out", out)->required();

  std::string rankings_path, relevance_path;
  std::optional<std::string> eval_out;
  auto* s_eval = app.add_subcommand("eval", "R@1, R@5 and mAP");
  s_eval->add_option("--rankings", rankings_path)->required();
  s_eval->add_option("--relevance", relevance_path)->required();
  s_eval->add_option("--out", eval_out);

  for (CLI::App* sub : {s_synth, s_sim, s_mine, s_ot, s_loss, s_rank, s_iqe, s_eval}) {
    add_common(sub);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report_error(Errc::ConfigError, e.what());
  }

  try {
    const PipelineConfig cfg = resolve(common);
    if (common.save_config) conquer::cli::write_json(*common.save_config, cfg.to_json());

    namespace c = conquer::cli;
    CLI::App* sub = app.get_subcommands().front();
    json summary;
    if (sub == s_synth) {
      summary = c::cmd_synth(cfg, synth, images_out, texts_out);
    } else if (sub == s_sim) {
      summary = c::cmd_sim(cfg, images, texts, sim, out);
    } else if (sub == s_mine) {
      summary = c::cmd_mine(cfg, sim_path, out);
    } else if (sub == s_ot) {
      if (cost_path) ot.cost = *cost_path;
      if (ot_images) ot.images = *ot_images;
      if (ot_texts) ot.texts = *ot_texts;
      if (weight) ot.weight = *weight;
      summary = c::cmd_ot(cfg, ot, out);
    } else if (sub == s_loss) {
      std::optional<std::filesystem::path> w;
      if (weight) w = *weight;
      summary = c::cmd_loss(cfg, images, texts, w, out);
    } else if (sub == s_rank) {
      std::optional<std::filesystem::path> rel;
      if (relevance_out) rel = *relevance_out;
      summary = c::cmd_rank(cfg, images, texts, out, rel);
    } else if (sub == s_iqe) {
      if (fixture) oracle.fixture = *fixture;
      oracle.url = oracle_url;
      summary = c::cmd_iqe(cfg, scenario, oracle, out);
    } else {
      std::optional<std::filesystem::path> o;
      if (eval_out) o = *eval_out;
      summary = c::cmd_eval(cfg, rankings_path, relevance_path, o);
    }
    const json result = {{"command", sub->get_name()}, {"config", cfg.to_json()}, {"summary", summary}};
    std::cout << result.dump(2) << '\n';
    return 0;
  } catch (const Error& e) {
    return report_error(e.code(), e.what());
  } catch (const std::exception& e) {
    return report_error(Errc::InvalidArgument, e.what());
  }
}
