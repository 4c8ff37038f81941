// Copyright 2026 The uflow Authors.
// SPDX-License-Identifier: Apache-2.0

// uflow command line: synth, train, index, search, eval, serve, embed.
//
// Exit codes: 0 ok, 2 usage, 3 data/format, 4 numeric failure, 5 I/O.
// Failures print one JSON line to stderr: {"error":{"code":...,"message":...}}.

#include <CLI11.hpp>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <json.hpp>
#include <pthread.h>
#include <sstream>
#include <thread>

#include "uflow/error.hpp"
#include "uflow/evalkit.hpp"
#include "uflow/retrieval.hpp"
#include "uflow/service.hpp"
#include "uflow/simd.hpp"
#include "uflow/training.hpp"

namespace {

using nlohmann::json;
using namespace uflow;

void print_error(std::string_view code, const std::string& message) {
  std::cerr << json{{"error", {{"code", code}, {"message", message}}}}.dump() << std::endl;
}

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long v = std::stol(item, &used);
      if (used != item.size() || v < 1) throw std::invalid_argument(item);
      ks.push_back(static_cast<std::size_t>(v));
    } catch (const std::logic_error&) {
      fail(Errc::usage, "-k expects a comma-separated list of positive integers, got '" + text + "'");
    }
  }
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  if (ks.empty()) fail(Errc::usage, "-k is empty");
  return ks;
}

void print_results(const EmbeddingIndex& index, const RetrievalResult& result, bool as_json) {
  if (as_json) {
    json rows = json::array();
    for (const auto& hit : result.entries)
      rows.push_back({{"rank", hit.rank},
                      {"episode_id", hit.episode_id},
                      {"score", hit.score},
                      {"description", index.entries()[*index.find(hit.episode_id)].description}});
    std::cout << json{{"results", rows}}.dump() << "\n";
    return;
  }
  std::printf("rank\tepisode_id\tscore\tdescription\n");
  for (const auto& hit : result.entries)
    std::printf("%zu\t%s\t%.6f\t%s\n", hit.rank, hit.episode_id.c_str(), static_cast<double>(hit.score),
                index.entries()[*index.find(hit.episode_id)].description.c_str());
}

/// Serves until SIGINT or SIGTERM. The signals are blocked and collected by
/// a sigwait thread, so stop() never runs in signal context.
void serve_until_signalled(RetrievalService& service) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&set, &sig);
    service.stop();
  });
  service.serve();
  // serve() can also return on its own; wake the waiter so it exits.
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"uflow: screen-sequence embedding and user-flow retrieval"};
  app.require_subcommand(1);

  // synth
  SynthConfig synth_cfg;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic dataset directory");
  synth->add_option("--archetypes", synth_cfg.n_archetypes, "Number of archetypes")->default_val(16);
  synth->add_option("--episodes", synth_cfg.n_episodes, "Number of episodes")->default_val(2000);
  synth->add_option("--noise", synth_cfg.noise_sigma, "Per-coordinate noise sigma")->default_val(0.1);
  synth->add_option("--seed", synth_cfg.seed, "Seed")->default_val(42);
  synth->add_option("--min-len", synth_cfg.min_len, "Minimum screens per episode")->default_val(3);
  synth->add_option("--max-len", synth_cfg.max_len, "Maximum screens per episode")->default_val(6);
  synth->add_option("--out", synth_out, "Output directory")->required();

  // train
  TrainConfig train_cfg;
  PoolerConfig pooler_cfg;
  std::string train_data, train_out, train_report;
  auto* train_cmd = app.add_subcommand("train", "Train the pooler head");
  train_cmd->add_option("--data", train_data, "Dataset directory")->required();
  train_cmd->add_option("--epochs", train_cfg.epochs, "Epochs")->default_val(100);
  train_cmd->add_option("--batch", train_cfg.batch_size, "Batch size (episodes)")->default_val(1024);
  train_cmd->add_option("--lr", train_cfg.lr, "Adam learning rate")->default_val(1e-4);
  train_cmd->add_option("--temp", train_cfg.temperature, "Contrastive temperature")->default_val(0.07);
  train_cmd->add_option("--seed", train_cfg.seed, "Seed for init and shuffling")->default_val(123);
  train_cmd->add_option("--train-fraction", train_cfg.train_fraction, "Train split fraction")->default_val(0.9);
  train_cmd->add_option("--heads", pooler_cfg.n_heads, "Attention heads")->default_val(4);
  train_cmd->add_option("--out", train_out, "Checkpoint path")->required();
  train_cmd->add_option("--report", train_report, "Also write per-epoch JSON lines here");

  // index
  std::string index_model, index_data, index_out;
  auto* index_cmd = app.add_subcommand("index", "Build a retrieval index");
  index_cmd->add_option("--model", index_model, "Checkpoint")->required();
  index_cmd->add_option("--data", index_data, "Dataset directory")->required();
  index_cmd->add_option("--out", index_out, "Index file")->required();

  // search
  std::string search_index, search_text, search_episode, search_data, search_model;
  std::string embedder_name = "toy", embedder_source;
  std::size_t search_k = 10;
  bool search_json = false;
  auto* search_cmd = app.add_subcommand("search", "Query an index by text or by episode");
  search_cmd->add_option("--index", search_index, "Index file")->required();
  auto* text_opt = search_cmd->add_option("--text", search_text, "Task description query");
  auto* ep_opt = search_cmd->add_option("--episode", search_episode, "Episode id to use as the query");
  text_opt->excludes(ep_opt);
  search_cmd->add_option("--data", search_data, "Dataset holding --episode");
  search_cmd->add_option("--model", search_model, "Checkpoint used to pool --episode");
  search_cmd->add_option("--embedder", embedder_name, "toy | precomputed | http")->default_val("toy");
  search_cmd->add_option("--embedder-source", embedder_source, "JSON file or URL for the embedder");
  search_cmd->add_option("-k", search_k, "Results to return")->default_val(10);
  search_cmd->add_flag("--json", search_json, "Emit JSON instead of a table");

  // eval
  std::string eval_model, eval_data, eval_protocol = "flow->flow", eval_relevance = "same-archetype", eval_ks = "1,5,10";
  auto* eval_cmd = app.add_subcommand("eval", "Recall@k / median rank report");
  eval_cmd->add_option("--model", eval_model, "Checkpoint")->required();
  eval_cmd->add_option("--data", eval_data, "Dataset directory")->required();
  eval_cmd->add_option("--protocol", eval_protocol, "text->flow | flow->flow")->default_val("flow->flow");
  eval_cmd->add_option("--relevance", eval_relevance, "exact-episode | same-archetype")->default_val("same-archetype");
  eval_cmd->add_option("-k", eval_ks, "Comma-separated cutoffs")->default_val("1,5,10");

  // serve
  std::string serve_config;
  int serve_port = 0;
  std::string serve_host;
  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP retrieval service");
  serve_cmd->add_option("--config", serve_config, "Service config JSON (default: $UFLOW_CONFIG)");
  serve_cmd->add_option("--port", serve_port, "Override the configured port");
  serve_cmd->add_option("--host", serve_host, "Override the configured host");

  // embed
  std::string embed_text;
  auto* embed_cmd = app.add_subcommand("embed", "Print the toy text embedding of a string as JSON");
  embed_cmd->add_option("--text", embed_text, "Text")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    print_error("usage", e.what());
    return 2;
  }

  try {
    if (*synth) {
      write_dataset(synth_dataset(synth_cfg), synth_out);
      std::cout << json{{"out", synth_out}, {"episodes", synth_cfg.n_episodes}}.dump() << "\n";
    } else if (*train_cmd) {
      const Dataset ds = read_dataset(train_data);
      std::FILE* report = nullptr;
      if (!train_report.empty() && !(report = std::fopen(train_report.c_str(), "w")))
        fail(Errc::io, "cannot open report file '" + train_report + "'");
      TrainOptions opts;
      opts.checkpoint_path = train_out;
      opts.on_epoch = [&](const EpochRecord& rec) {
        const std::string line = to_json_line(rec);
        std::printf("%s\n", line.c_str());
        std::fflush(stdout);
        if (report) std::fprintf(report, "%s\n", line.c_str());
      };
      train(ds, pooler_cfg, train_cfg, opts);
      if (report) std::fclose(report);
    } else if (*index_cmd) {
      const Checkpoint ckpt = read_checkpoint(index_model);
      const Dataset ds = read_dataset(index_data);
      const auto episodes = filter_episodes(ds.episodes, ckpt.train.min_len, ckpt.train.max_len);
      const EmbeddingIndex index = build_index(ckpt, episodes);
      write_index(index, index_out);
      std::cout << json{{"out", index_out}, {"size", index.size()}, {"model_id", index.model_id()}}.dump() << "\n";
    } else if (*search_cmd) {
      const EmbeddingIndex index = read_index(search_index);
      if (*text_opt) {
        const auto embedder = make_embedder(embedder_name, embedder_source);
        print_results(index, search_by_text(index, search_text, *embedder, search_k), search_json);
      } else if (*ep_opt) {
        if (!search_model.empty()) {
          if (search_data.empty()) fail(Errc::usage, "--episode with --model needs --data");
          const Dataset ds = read_dataset(search_data);
          const auto it = std::find_if(ds.episodes.begin(), ds.episodes.end(),
                                       [&](const Episode& e) { return e.id == search_episode; });
          if (it == ds.episodes.end()) fail(Errc::not_found, "episode '" + search_episode + "' not in dataset");
          print_results(index, search_by_sequence(index, read_checkpoint(search_model), *it, search_k), search_json);
        } else {
          const auto row = index.find(search_episode);
          if (!row) fail(Errc::not_found, "episode '" + search_episode + "' not in index; pass --model and --data to pool it");
          print_results(index, search(index, index.row(*row), search_k), search_json);
        }
      } else {
        fail(Errc::usage, "search needs --text or --episode");
      }
    } else if (*eval_cmd) {
      EvalSpec spec;
      spec.ks = parse_ks(eval_ks);
      spec.protocol = parse_protocol(eval_protocol);
      spec.relevance = parse_relevance(eval_relevance);
      std::cout << to_json(evaluate(read_checkpoint(eval_model), read_dataset(eval_data), spec)) << "\n";
    } else if (*serve_cmd) {
      if (serve_config.empty()) {
        if (const char* env = std::getenv("UFLOW_CONFIG")) serve_config = env;
      }
      if (serve_config.empty()) fail(Errc::usage, "serve needs --config or UFLOW_CONFIG");
      ServiceConfig cfg = load_service_config(serve_config);
      if (serve_port) cfg.port = serve_port;
      if (!serve_host.empty()) cfg.host = serve_host;
      RetrievalService service(cfg);
      const int port = service.bind();
      std::cout << json{{"listening", cfg.host + ":" + std::to_string(port)},
                        {"simd", std::string(simd::isa_name(simd::active().isa))}}.dump()
                << std::endl;
      serve_until_signalled(service);
    } else if (*embed_cmd) {
      std::cout << json(toy_text_embed(embed_text)).dump() << "\n";
    }
  } catch (const Error& e) {
    print_error(errc_name(e.code()), e.what());
    return exit_code(e.code());
  } catch (const std::filesystem::filesystem_error& e) {
    print_error("io", e.what());
    return 5;
  } catch (const std::exception& e) {
    print_error("internal", e.what());
    return 1;
  }
  return 0;
}
