#include "gwm_cli.hpp"

#include <memory>
#include <sstream>

#include "gwm/config.hpp"
#include "gwm/decoder_client.hpp"
#include "gwm/edge_builder.hpp"
#include "gwm/embed.hpp"
#include "gwm/projector.hpp"
#include "gwm/stable_hash.hpp"
#include "gwm/store.hpp"
#include "gwm/tasks.hpp"
#include "gwm/transition.hpp"

#include "CLI11.hpp"
#include "json.hpp"

namespace gwm::cli {

namespace {

constexpr const char* kToolVersion = "0.1.0";

struct CliContext {
    Config config;
    bool lenient = false;
    std::string templates_path;

    std::unique_ptr<DecoderClient> client;

    DecoderClient& decoder() {
        if (!client) {
            if (config.decoder_url.empty()) {
                client = std::make_unique<MockDecoderClient>(config.mock_seed, config.dims);
            } else {
                HttpDecoderConfig http;
                http.url = config.decoder_url;
                http.timeout_ms = config.decoder_timeout_ms;
                http.retries = config.decoder_retries;
                http.backoff_ms = config.decoder_backoff_ms;
                http.accepts_graph_tokens = config.decoder_accepts_graph_tokens;
                client = std::make_unique<HttpDecoderClient>(std::move(http));
            }
        }
        return *client;
    }

    TemplateRegistry registry() const {
        if (!templates_path.empty()) return TemplateRegistry::load_file(templates_path);
        return TemplateRegistry::builtin();
    }

    StepClients step_clients() {
        StepClients clients;
        clients.llm = &decoder();
        clients.image = &decoder();
        clients.embedder = &decoder();
        return clients;
    }

    StepConfig step_config(Pipeline pipeline, const TemplateRegistry& registry) const {
        StepConfig sc;
        sc.pipeline = pipeline;
        sc.hops = config.hops;
        sc.budget = config.budget();
        sc.dims = config.dims;
        sc.resolve.text_only = config.retrieve_text_only;
        sc.resolve.expand_hops = config.retrieve_expand_hops;
        sc.registry = &registry;
        sc.projector_seed = config.projector_seed;
        return sc;
    }
};

Pipeline pipeline_from_name(const std::string& name) {
    if (name == "token") return Pipeline::TokenMP;
    if (name == "embed") return Pipeline::EmbedMP;
    raise(Errc::InvalidConfigValue, "pipeline must be token|embed");
}

std::vector<std::size_t> parse_hop_list(const std::string& csv) {
    std::vector<std::size_t> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(static_cast<std::size_t>(std::stoull(item)));
    }
    if (out.empty()) {
        raise(Errc::InvalidConfigValue, "expected a comma-separated hop list");
    }
    return out;
}

nlohmann::ordered_json tokens_json(const GraphTokens& tokens) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& t : tokens.tokens) arr.push_back(t);
    return arr;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"graph world model runtime: build graph states, message-pass, "
                 "retrieve, and step transitions through decoder services"};
    app.require_subcommand(0, 1);

    auto ctx = std::make_shared<CliContext>();
    std::string config_path;
    std::vector<std::string> overrides;
    bool show_version = false;
    app.add_option("--config", config_path, "JSON config file of documented keys");
    app.add_option("--set", overrides, "config override key=value (wins over the file)");
    app.add_flag("--lenient", ctx->lenient, "ignore unknown fields in graph files");
    app.add_option("--templates", ctx->templates_path,
                   "template registry file (templates.gwm.json)");
    app.add_flag("--version", show_version, "print tool and on-disk format versions");

    // build-graph
    auto* build = app.add_subcommand("build-graph", "build a graph from a task fixture or document");
    std::string build_task, build_doc, build_out;
    std::size_t build_chunk_tokens = 64;
    std::size_t build_k = 5;
    double build_threshold = 0.0;
    build->add_option("--task", build_task, "task fixture file (*.task.json)");
    build->add_option("--doc", build_doc, "plain-text document for a chunk graph");
    build->add_option("--chunk-tokens", build_chunk_tokens, "tokens per chunk (default 64)");
    build->add_option("--k", build_k, "kNN neighbors for implicit edges (default 5)");
    build->add_option("--threshold", build_threshold, "similarity threshold (default 0)");
    build->add_option("--out", build_out, "output graph file (*.gwm.json)")->required();

    // embed
    auto* embed_cmd = app.add_subcommand("embed", "assemble node embeddings into a store");
    std::string embed_graph, embed_out;
    embed_cmd->add_option("--graph", embed_graph, "graph file")->required();
    embed_cmd->add_option("--out", embed_out, "output embedding store (*.gwme)")->required();

    // propagate
    auto* prop = app.add_subcommand("propagate", "multi-hop aggregation over the graph");
    std::string prop_graph, prop_embeddings, prop_out, prop_all;
    std::size_t prop_hops = 4;
    prop->add_option("--graph", prop_graph, "graph file")->required();
    prop->add_option("--embeddings", prop_embeddings, "input embedding store")->required();
    prop->add_option("--hops", prop_hops, "hop count L (0 writes the input back)")
        ->required();
    prop->add_option("--out", prop_out, "output store holding hop L")->required();
    prop->add_option("--all-hops", prop_all, "also write every hop to <prefix>.hop<l>.gwme");

    // retrieve
    auto* retrieve = app.add_subcommand("retrieve", "top-k nodes by query similarity");
    std::string retrieve_graph, retrieve_query;
    std::size_t retrieve_k = 0;
    bool retrieve_text_only = false;
    retrieve->add_option("--graph", retrieve_graph, "graph file")->required();
    retrieve->add_option("--query", retrieve_query, "query text")->required();
    retrieve->add_option("--k", retrieve_k, "result count (default 5)");
    retrieve->add_flag("--text-only", retrieve_text_only,
                       "match against the text slot instead of the concat embedding");

    // prompt
    auto* prompt_cmd = app.add_subcommand("prompt", "assemble the decoder input without decoding");
    std::string prompt_graph, prompt_task, prompt_pipeline = "token", prompt_action;
    prompt_cmd->add_option("--graph", prompt_graph, "graph file (defaults to the fixture's)");
    prompt_cmd->add_option("--task", prompt_task, "task fixture file")->required();
    prompt_cmd->add_option("--pipeline", prompt_pipeline, "token|embed (default token)");
    prompt_cmd->add_option("--action", prompt_action, "override the action template id");

    // step
    auto* step_cmd = app.add_subcommand("step", "run one state transition");
    std::string step_graph, step_task, step_pipeline = "token", step_out, step_log;
    step_cmd->add_option("--graph", step_graph, "graph file (defaults to the fixture's)");
    step_cmd->add_option("--task", step_task, "task fixture file")->required();
    step_cmd->add_option("--pipeline", step_pipeline, "token|embed (default token)");
    step_cmd->add_option("--out", step_out, "write the successor graph here");
    step_cmd->add_option("--log", step_log, "append the applied transition to this JSONL log");

    // ablate-hops
    auto* ablate = app.add_subcommand("ablate-hops", "hop ablation report over a planted fixture");
    std::string ablate_fixture, ablate_hops = "0,1,2,4", ablate_out, ablate_seeds = "1";
    ablate->add_option("--fixture", ablate_fixture, "synthetic fixture spec (JSON)");
    ablate->add_option("--hops", ablate_hops, "comma-separated hop counts (default 0,1,2,4)");
    ablate->add_option("--seeds", ablate_seeds, "comma-separated seeds (default 1)");
    ablate->add_option("--out", ablate_out, "CSV output path (default stdout)");

    // mock-serve
    auto* serve = app.add_subcommand("mock-serve", "serve the deterministic mock decoder over HTTP");
    std::string serve_host = "127.0.0.1";
    int serve_port = 8787;
    serve->add_option("--host", serve_host, "bind host (default 127.0.0.1)");
    serve->add_option("--port", serve_port, "bind port (default 8787)");

    // templates
    auto* templates_cmd = app.add_subcommand("templates", "export the built-in template registry");
    std::string templates_out;
    templates_cmd->add_option("--out", templates_out, "output file (templates.gwm.json)")
        ->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream msg;
        const int code = app.exit(e, msg, msg);
        const std::string text = msg.str();
        if (code == 0) {
            out << text;
            return 0;
        }
        err << text;
        return 1;
    }

    try {
        if (!config_path.empty()) {
            ctx->config = Config::load_file(config_path);
        }
        for (const auto& kv : overrides) {
            const auto eq = kv.find('=');
            if (eq == std::string::npos) {
                raise(Errc::InvalidConfigValue, "--set expects key=value, got '" + kv + "'");
            }
            ctx->config.apply_override(kv.substr(0, eq), kv.substr(eq + 1));
        }

        if (show_version) {
            out << "gwm " << kToolVersion << "\n";
            out << "graph format " << kGraphFormatVersion << " (*.gwm.json)\n";
            out << "embedding store " << kEmbeddingStoreVersion << " (*.gwme)\n";
            out << "projector checkpoint " << kProjectorFormatVersion << " (GWMP)\n";
            out << "template registry " << kTemplateFileVersion << " (templates.gwm.json)\n";
            return 0;
        }

        if (build->parsed()) {
            GraphState state;
            if (!build_task.empty()) {
                const TaskSpec spec = load_task_spec(build_task);
                state = build_task_fixture(spec, ctx->decoder()).state;
            } else if (!build_doc.empty()) {
                std::ifstream is(build_doc);
                if (!is) raise(Errc::IoError, "cannot open '" + build_doc + "'");
                std::ostringstream buffer;
                buffer << is.rdbuf();
                state = build_rag_graph(buffer.str(), build_chunk_tokens, ctx->decoder(), build_k,
                                        build_threshold);
            } else {
                err << "build-graph needs --task or --doc\n";
                return 1;
            }
            save_graph(state, build_out);
            out << "wrote " << build_out << " (" << state.node_count() << " nodes, "
                << state.edge_count() << " edges, version " << state.version() << ")\n";
            return 0;
        }

        if (embed_cmd->parsed()) {
            const GraphState state = load_graph(embed_graph, ctx->lenient);
            const EmbeddingMatrix x = assemble_embeddings(state, ctx->decoder(), ctx->config.dims);
            save_embedding_store(x, embed_out);
            out << "wrote " << embed_out << " (" << x.x.rows << "x" << x.x.cols << ")\n";
            return 0;
        }

        if (prop->parsed()) {
            const GraphState state = load_graph(prop_graph, ctx->lenient);
            const EmbeddingMatrix x =
                bind_embedding_store(load_embedding_store(prop_embeddings), state);
            if (prop_hops == 0) {
                save_embedding_store(x, prop_out);
                out << "wrote " << prop_out << " (hop 0 = input embeddings)\n";
                return 0;
            }
            AdjacencyOptions opts;
            opts.weighted = ctx->config.adjacency_weighted;
            const NormalizedAdjacency norm = normalize_adjacency(adjacency(state, opts));
            const HopStack stack = propagate(x, norm, prop_hops);
            EmbeddingMatrix hop;
            hop.node_order = stack.node_order;
            hop.source_version = stack.source_version;
            if (!prop_all.empty()) {
                for (std::size_t l = 0; l <= stack.hop_count; ++l) {
                    hop.x = stack.hops[l];
                    save_embedding_store(hop, prop_all + ".hop" + std::to_string(l) + ".gwme");
                }
            }
            hop.x = stack.hops[prop_hops];
            save_embedding_store(hop, prop_out);
            out << "wrote " << prop_out << " (hop " << prop_hops << ")\n";
            return 0;
        }

        if (retrieve->parsed()) {
            GraphState state = load_graph(retrieve_graph, ctx->lenient);
            state = populate_embeddings(state, ctx->decoder(), ctx->config.dims);
            ActionNode action;
            action.id = "cli-retrieve";
            action.kind = UnintendedAction{retrieve_query,
                                           retrieve_k ? retrieve_k : ctx->config.retrieve_k};
            action.template_id = "rag";
            const auto raw =
                ctx->decoder().embed(EmbedRequest{"text", retrieve_query}).vector;
            ResolveOptions ropts;
            ropts.text_only = retrieve_text_only || ctx->config.retrieve_text_only;
            ropts.expand_hops = ctx->config.retrieve_expand_hops;
            std::optional<std::vector<double>> query;
            if (ropts.text_only) {
                query = raw;
            } else {
                const ConcatLayout layout = concat_layout(state);
                if (layout.text != raw.size()) {
                    raise(Errc::DimensionMismatch, "query embedding does not fit the text slot");
                }
                std::vector<double> padded(layout.total(), 0.0);
                std::copy(raw.begin(), raw.end(),
                          padded.begin() + static_cast<std::ptrdiff_t>(layout.image));
                query = std::move(padded);
            }
            for (const auto& ref : resolve_targets(state, action, query, ropts)) {
                out << ref.node_id << "\n";
            }
            return 0;
        }

        if (prompt_cmd->parsed() || step_cmd->parsed()) {
            const bool stepping = step_cmd->parsed();
            const std::string task_path = stepping ? step_task : prompt_task;
            const std::string graph_path = stepping ? step_graph : prompt_graph;
            const std::string pipeline_name = stepping ? step_pipeline : prompt_pipeline;

            TaskSpec spec = load_task_spec(task_path);
            if (!stepping && !prompt_action.empty()) spec.template_id = prompt_action;
            TaskFixture fixture = build_task_fixture(spec, ctx->decoder());
            GraphState state =
                graph_path.empty() ? fixture.state : load_graph(graph_path, ctx->lenient);

            const TemplateRegistry registry = ctx->registry();
            const StepConfig sc =
                ctx->step_config(pipeline_from_name(pipeline_name), registry);
            const auto adapter = make_adapter(spec);
            const StepClients clients = ctx->step_clients();

            if (!stepping) {
                const AssembledStep assembled =
                    assemble_step(state, fixture.action, *adapter, clients, sc);
                nlohmann::ordered_json req;
                req["prompt"] = assembled.prompt;
                if (assembled.tokens) req["graph_tokens"] = tokens_json(*assembled.tokens);
                out << req.dump(2) << "\n";
                return 0;
            }

            const StepResult result = step(state, fixture.action, *adapter, clients, sc);
            if (result.transition) {
                out << "applied " << transition_kind_name(result.transition->kind)
                    << " (version " << state.version() << " -> " << result.state.version()
                    << ")\n";
                if (!step_log.empty()) append_transition_log(step_log, *result.transition);
            } else if (result.record) {
                out << "recorded prediction";
                if (!result.record->label.empty()) out << " label=" << result.record->label;
                out << "\n";
            }
            if (!result.response.text.empty()) {
                std::string shown = result.response.text;
                if (shown.size() > 240) shown = shown.substr(0, 240) + "...";
                out << "response: " << shown << "\n";
            }
            if (!result.response.image_ref.empty()) {
                out << "image_ref: " << result.response.image_ref << "\n";
            }
            if (!step_out.empty()) {
                save_graph(result.state, step_out);
                out << "wrote " << step_out << "\n";
            }
            return 0;
        }

        if (ablate->parsed()) {
            SyntheticGraphSpec spec;
            if (!ablate_fixture.empty()) spec = load_synthetic_spec(ablate_fixture);
            const std::vector<std::size_t> hops = parse_hop_list(ablate_hops);
            AblationReport all;
            for (std::size_t seed : parse_hop_list(ablate_seeds)) {
                const AblationReport report = hop_ablation(spec, hops, ProbeConfig{}, seed);
                all.rows.insert(all.rows.end(), report.rows.begin(), report.rows.end());
            }
            const std::string csv = ablation_csv(all);
            if (ablate_out.empty()) {
                out << csv;
            } else {
                std::ofstream os(ablate_out, std::ios::trunc);
                if (!os) raise(Errc::IoError, "cannot open '" + ablate_out + "'");
                os << csv;
                out << "wrote " << ablate_out << "\n";
            }
            return 0;
        }

        if (serve->parsed()) {
            MockDecoderServer server(ctx->config.mock_seed, ctx->config.dims);
            out << "serving mock decoder on " << serve_host << ":" << serve_port << "\n";
            out.flush();
            if (!server.serve_forever(serve_host, serve_port)) {
                raise(Errc::IoError, "cannot bind " + serve_host + ":" + std::to_string(serve_port));
            }
            return 0;
        }

        if (templates_cmd->parsed()) {
            TemplateRegistry::builtin().save_file(templates_out);
            out << "wrote " << templates_out << "\n";
            return 0;
        }

        err << app.help();
        return 1;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 2;
    }
}

} // namespace gwm::cli
