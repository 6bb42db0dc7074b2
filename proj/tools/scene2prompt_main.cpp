// Command-line front end: every subcommand is a thin wrapper over the
// library stages, so composing subcommands reproduces the one-shot
// pipeline byte for byte.

#include <cstdio>
#include <iostream>
#include <random>

#include <CLI11.hpp>
#include <json.hpp>

#include "scene2prompt/client.hpp"
#include "scene2prompt/hiervis.hpp"
#include "scene2prompt/pipeline.hpp"
#include "scene2prompt/util.hpp"

namespace {

using namespace s2p;

struct StageFlags {
    std::string scenes_dir;
    std::string output_dir;
    std::string questions_file;
    std::string mode = "CT";
    double iou_threshold = 0.5;
    std::string vote_weighting = "confidence";
    double min_confidence = 0.0;
    int precision = 2;
    bool append_ct = false;
    int width = 448;
    int height = 448;
    int splat_radius = 2;
    int grid = 4;
    int dim = 64;
    bool four_view_placeholders = false;
    std::string endpoint;
    std::string model = "qwen-vl";
    int max_answer_tokens = 16;
    double timeout_s = 60.0;
    int max_retries = 3;
    int parallelism = 4;
    double backoff_base_s = 1.0;
    std::string cache_dir = "cache";
    bool no_cache = false;
    bool inline_images = false;
    bool write_features = false;
    int jobs = 1;
    std::uint64_t seed = 42;
};

PruneConfig prune_config(const StageFlags& f) {
    PruneConfig cfg;
    cfg.iou_threshold = f.iou_threshold;
    if (f.vote_weighting == "count") {
        cfg.vote_weighting = VoteWeighting::Count;
    } else if (f.vote_weighting == "confidence") {
        cfg.vote_weighting = VoteWeighting::Confidence;
    } else {
        throw ConfigError("--vote-weighting must be count or confidence");
    }
    return cfg;
}

DescriptionConfig description_config(const StageFlags& f) {
    DescriptionConfig cfg;
    cfg.precision = f.precision;
    cfg.append_coordinate_list = f.append_ct;
    return cfg;
}

RenderConfig render_config(const StageFlags& f) {
    RenderConfig cfg;
    cfg.width = f.width;
    cfg.height = f.height;
    cfg.splat_radius = f.splat_radius;
    return cfg;
}

EndpointConfig endpoint_config(const StageFlags& f) {
    EndpointConfig cfg;
    cfg.base_url = f.endpoint;
    cfg.timeout_s = f.timeout_s;
    cfg.max_retries = f.max_retries;
    cfg.parallelism = f.parallelism;
    cfg.backoff_base_s = f.backoff_base_s;
    cfg.cache_dir = f.cache_dir;
    cfg.cache_bypass = f.no_cache;
    cfg.wire.model = f.model;
    cfg.wire.max_answer_tokens = f.max_answer_tokens;
    cfg.wire.inline_images = f.inline_images;
    return cfg;
}

std::map<std::string, std::vector<QaRecord>> questions_by_scene(
    const std::string& questions_file) {
    std::map<std::string, std::vector<QaRecord>> by_scene;
    for (auto& q : load_qa_jsonl(read_file(questions_file))) {
        by_scene[q.scene_id].push_back(std::move(q));
    }
    return by_scene;
}

int for_each_scene(const StageFlags& f,
                   const std::function<void(const ScenePaths&)>& stage) {
    const auto scenes = discover_scenes(f.scenes_dir, f.output_dir);
    int failures = 0;
    for (const auto& paths : scenes) {
        try {
            stage(paths);
        } catch (const std::exception& e) {
            std::fprintf(stderr, "[%s] error: %s\n", paths.scene_id.c_str(), e.what());
            ++failures;
        }
    }
    return failures == 0 ? 0 : 1;
}

int cmd_ingest(const StageFlags& f) {
    const auto scenes = discover_scenes(f.scenes_dir, f.output_dir.empty()
                                                          ? f.scenes_dir
                                                          : f.output_dir);
    int failures = 0;
    for (const auto& paths : scenes) {
        try {
            const auto points = load_point_cloud(paths.scene_dir / "points.ply");
            const auto proposals = load_proposals(paths.scene_dir / "proposals.json");
            std::string situation = "none";
            if (std::filesystem::exists(paths.scene_dir / "situation.json")) {
                const auto s = load_situation(paths.scene_dir / "situation.json");
                situation = "yaw " + format_fixed(s.yaw, 4);
            }
            std::printf("%s: %zu points, %zu proposals, situation: %s\n",
                        paths.scene_id.c_str(), points.size(),
                        proposals.proposals.size(), situation.c_str());
        } catch (const std::exception& e) {
            std::fprintf(stderr, "[%s] error: %s\n", paths.scene_id.c_str(), e.what());
            ++failures;
        }
    }
    return failures == 0 ? 0 : 1;
}

int cmd_prune(const StageFlags& f) {
    const PruneConfig cfg = prune_config(f);
    return for_each_scene(f, [&](const ScenePaths& paths) {
        const auto pruned = prune_stage(paths, cfg, f.min_confidence);
        std::printf("%s: %zu proposals kept\n", paths.scene_id.c_str(),
                    pruned.proposals.size());
    });
}

int cmd_describe(const StageFlags& f) {
    const AblationMode mode = ablation_mode_from_name(f.mode);
    if (!mode_has_scene_text(mode)) {
        throw ConfigError("mode " + f.mode + " emits no scene text");
    }
    const DescriptionConfig cfg = description_config(f);
    return for_each_scene(f, [&](const ScenePaths& paths) {
        const auto desc = describe_stage(paths, mode, cfg);
        std::printf("%s: %zu objects described\n", paths.scene_id.c_str(),
                    desc.object_order.size());
    });
}

int cmd_render(const StageFlags& f) {
    const RenderConfig cfg = render_config(f);
    return for_each_scene(f, [&](const ScenePaths& paths) {
        const auto images = render_stage(paths, cfg);
        std::printf("%s: %zu views rendered\n", paths.scene_id.c_str(), images.size());
    });
}

int cmd_features(const StageFlags& f, const std::string& import_path) {
    if (!import_path.empty()) {
        const auto features = load_patch_features(import_path);
        std::printf("%s: %u views x %u patches x %u dims\n", import_path.c_str(),
                    features.view_count, features.patches_per_view, features.dim);
        return 0;
    }
    const RenderConfig cfg = render_config(f);
    return for_each_scene(f, [&](const ScenePaths& paths) {
        features_stage(paths, cfg, f.grid, f.dim);
        std::printf("%s: features.hvf written (%dx%d cells, dim %d)\n",
                    paths.scene_id.c_str(), f.grid, f.grid, f.dim);
    });
}

int cmd_assemble(const StageFlags& f) {
    const AblationMode mode = ablation_mode_from_name(f.mode);
    PromptOptions options;
    options.four_view_placeholders = f.four_view_placeholders;
    options.inline_bundle_images = f.inline_images;
    auto by_scene = questions_by_scene(f.questions_file);
    return for_each_scene(f, [&](const ScenePaths& paths) {
        const auto it = by_scene.find(paths.scene_id);
        if (it == by_scene.end()) {
            std::printf("%s: no questions\n", paths.scene_id.c_str());
            return;
        }
        const auto bundles = assemble_stage(paths, mode, it->second, options);
        std::printf("%s: %zu bundles (~%d tokens each)\n", paths.scene_id.c_str(),
                    bundles.size(),
                    bundles.empty() ? 0 : estimate_tokens(bundles.front()));
    });
}

int cmd_ask(const StageFlags& f) {
    if (f.endpoint.empty()) {
        throw ConfigError("--endpoint is required for ask");
    }
    const EndpointConfig cfg = endpoint_config(f);
    auto by_scene = questions_by_scene(f.questions_file);
    const auto scenes = discover_scenes(f.scenes_dir, f.output_dir);

    std::vector<PromptBundle> bundles;
    std::vector<QaRecord> records;
    for (const auto& paths : scenes) {
        const auto it = by_scene.find(paths.scene_id);
        if (it == by_scene.end()) {
            continue;
        }
        for (std::size_t i = 0; i < it->second.size(); ++i) {
            const auto bundle_path =
                paths.out_dir / "bundles" / ("q" + std::to_string(i) + ".json");
            bundles.push_back(
                bundle_from_json(nlohmann::json::parse(read_file(bundle_path))));
            records.push_back(it->second[i]);
        }
    }
    if (bundles.empty()) {
        throw ConfigError("no assembled bundles found under " + f.output_dir);
    }

    const auto answers = ask_batch(bundles, cfg);
    std::string jsonl;
    int failures = 0;
    for (std::size_t i = 0; i < answers.size(); ++i) {
        nlohmann::json line;
        line["scene_id"] = records[i].scene_id;
        line["question"] = records[i].question;
        line["references"] = records[i].references;
        line["prediction"] = answers[i].ok ? answers[i].answer : "";
        if (!answers[i].ok) {
            line["error"] = answers[i].error_message;
            ++failures;
        }
        jsonl += line.dump() + "\n";
    }
    write_if_changed(std::filesystem::path(f.output_dir) / "answers.jsonl", jsonl);
    std::printf("%zu answers written, %d failed\n", answers.size(), failures);
    return failures == 0 ? 0 : 1;
}

int cmd_eval(const StageFlags& f, const std::string& answers_file) {
    const auto records = load_qa_jsonl(read_file(answers_file));
    const MetricReport report = evaluate_run(records);
    const std::filesystem::path out_dir =
        f.output_dir.empty() ? std::filesystem::path(answers_file).parent_path()
                             : std::filesystem::path(f.output_dir);
    write_if_changed(out_dir / "report.json", report_to_json(report).dump(2) + "\n");
    write_if_changed(out_dir / "report.txt", report_to_table(report));
    std::fputs(report_to_table(report).c_str(), stdout);
    return 0;
}

int cmd_pipeline(const StageFlags& f) {
    PipelineConfig cfg;
    cfg.scenes_dir = f.scenes_dir;
    cfg.questions_file = f.questions_file;
    cfg.output_dir = f.output_dir;
    cfg.mode = ablation_mode_from_name(f.mode);
    cfg.prune = prune_config(f);
    cfg.min_confidence = f.min_confidence;
    cfg.description = description_config(f);
    cfg.render = render_config(f);
    cfg.prompt.four_view_placeholders = f.four_view_placeholders;
    cfg.write_features = f.write_features;
    cfg.feature_grid = f.grid;
    cfg.feature_dim = f.dim;
    cfg.jobs = f.jobs;
    cfg.seed = f.seed;
    if (!f.endpoint.empty()) {
        cfg.endpoint = endpoint_config(f);
    }
    const PipelineResult result = run_pipeline(cfg);
    for (const auto& outcome : result.outcomes) {
        if (outcome.ok) {
            std::printf("[%s] ok\n", outcome.scene_id.c_str());
        } else {
            std::fprintf(stderr, "[%s] error: %s\n", outcome.scene_id.c_str(),
                         outcome.error.c_str());
        }
    }
    if (result.report.has_value()) {
        std::fputs(report_to_table(*result.report).c_str(), stdout);
    }
    return result.exit_code;
}

std::vector<int> toy_ids(const std::string& text, std::map<std::string, int>& vocab_map) {
    std::vector<int> ids;
    for (const auto& word : split_ws(to_lower(text))) {
        auto [it, inserted] = vocab_map.emplace(word, int(vocab_map.size()) + 1);
        ids.push_back(it->second);
    }
    return ids;
}

int cmd_hier_forward(const std::string& features_path, const std::string& checkpoint,
                     const std::string& save_path, std::uint64_t seed) {
    const PatchFeatures features = load_patch_features(features_path);
    if (features.view_count != 5) {
        throw ConfigError("hierarchy needs 5 views, file has " +
                          std::to_string(features.view_count));
    }
    SceneQaModel model;
    if (!checkpoint.empty()) {
        model = load_checkpoint(checkpoint);
    } else {
        ModelConfig cfg;
        cfg.dim = int(features.dim);
        model = make_model(cfg, seed);
    }
    if (model.hierarchy.dim != int(features.dim)) {
        throw ConfigError("model dim " + std::to_string(model.hierarchy.dim) +
                          " does not match feature dim " + std::to_string(features.dim));
    }
    const HierarchyForward fwd = hierarchy_forward(model.hierarchy, features.views);
    std::printf("f_v: %ld tokens x %ld dims (%u patches/view + 5 view + 1 scene)\n",
                long(fwd.hierarchy.f_v.rows()), long(fwd.hierarchy.f_v.cols()),
                features.patches_per_view);
    for (int m = 0; m < 5; ++m) {
        std::printf("view token %d |V| = %.6f\n", m + 1,
                    fwd.hierarchy.view_tokens.row(m).norm());
    }
    std::printf("scene token |S| = %.6f\n", fwd.hierarchy.scene_token.norm());
    if (!save_path.empty()) {
        save_checkpoint(save_path, model);
        std::printf("checkpoint written to %s\n", save_path.c_str());
    }
    return 0;
}

int cmd_hier_gradcheck(int dim, int patches, int instances, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    double worst = 0.0;
    for (int inst = 0; inst < instances; ++inst) {
        ModelConfig cfg;
        cfg.dim = dim;
        cfg.vocab = 6;
        cfg.max_len = 8;
        SceneQaModel model = make_model(cfg, seed + inst);
        TrainExample ex;
        for (int v = 0; v < 5; ++v) {
            Eigen::MatrixXd p(patches, dim);
            for (Eigen::Index r = 0; r < p.rows(); ++r) {
                for (Eigen::Index c = 0; c < p.cols(); ++c) {
                    p(r, c) = dist(rng);
                }
            }
            ex.patches.push_back(std::move(p));
        }
        ex.context_ids = {1, 2};
        ex.target_ids = {3, 4};

        SceneQaModel grads = zeros_like(model);
        const LossForward fwd = model_loss(model, ex);
        model_backward(model, fwd, ex, grads);

        auto params = named_tensors(model);
        auto grad_tensors = named_tensors(grads);
        const double h = 1e-5;
        for (std::size_t t = 0; t < params.size(); ++t) {
            Eigen::MatrixXd& tensor = *params[t].tensor;
            for (Eigen::Index r = 0; r < tensor.rows(); ++r) {
                for (Eigen::Index c = 0; c < tensor.cols(); ++c) {
                    const double saved = tensor(r, c);
                    tensor(r, c) = saved + h;
                    const double up = model_loss(model, ex).loss;
                    tensor(r, c) = saved - h;
                    const double down = model_loss(model, ex).loss;
                    tensor(r, c) = saved;
                    const double fd = (up - down) / (2.0 * h);
                    const double an = (*grad_tensors[t].tensor)(r, c);
                    // differences at the central-difference noise floor are
                    // roundoff, not gradient error
                    if (std::abs(an - fd) <= 1e-9) {
                        continue;
                    }
                    const double denom = std::max(std::abs(an), std::abs(fd));
                    worst = std::max(worst, std::abs(an - fd) / denom);
                }
            }
        }
    }
    std::printf("max relative gradient error: %.3e\n", worst);
    return worst < 1e-4 ? 0 : 1;
}

int cmd_hier_train(int steps, double lr, int dim, std::uint64_t seed,
                   const std::string& features_path, const std::string& context,
                   const std::string& answer, const std::string& save_path) {
    std::map<std::string, int> vocab_map;
    TrainExample ex;
    ex.context_ids = toy_ids(context, vocab_map);
    ex.target_ids = toy_ids(answer, vocab_map);
    if (ex.target_ids.empty()) {
        throw ConfigError("--answer must contain at least one word");
    }

    if (!features_path.empty()) {
        const PatchFeatures features = load_patch_features(features_path);
        if (features.view_count != 5 || int(features.dim) != dim) {
            throw ConfigError("features must be 5 views at dim " + std::to_string(dim));
        }
        ex.patches = features.views;
    } else {
        std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
        std::uniform_real_distribution<double> dist(-1.0, 1.0);
        for (int v = 0; v < 5; ++v) {
            Eigen::MatrixXd p(4, dim);
            for (Eigen::Index r = 0; r < p.rows(); ++r) {
                for (Eigen::Index c = 0; c < p.cols(); ++c) {
                    p(r, c) = dist(rng);
                }
            }
            ex.patches.push_back(std::move(p));
        }
    }

    ModelConfig cfg;
    cfg.dim = dim;
    cfg.vocab = int(vocab_map.size()) + 2;
    cfg.max_len = std::max<int>(16, int(ex.target_ids.size()));
    SceneQaModel model = make_model(cfg, seed);
    const auto trace = train_toy(model, {ex}, steps, lr);
    std::printf("loss: initial %.6f, final %.6f (%.1fx reduction over %d steps)\n",
                trace.front(), trace.back(),
                trace.back() > 0 ? trace.front() / trace.back() : 0.0, steps);
    if (!save_path.empty()) {
        save_checkpoint(save_path, model);
        std::printf("checkpoint written to %s\n", save_path.c_str());
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Compiles 3D indoor scenes into VLM-ready prompts: pruned object "
                 "text, five rendered views, hierarchical visual tokens, and a Q&A "
                 "evaluation harness"};
    app.require_subcommand(1);
    app.set_config("--config", "", "declarative config file; command-line flags win");

    StageFlags f;
    std::string import_path, answers_file, features_path, checkpoint, save_path;
    std::string train_context = "what color is the desk";
    std::string train_answer = "brown";
    int gc_dim = 8, gc_patches = 2, gc_instances = 1;
    int train_steps = 500, train_dim = 32;
    double train_lr = 0.05;

    auto add_scene_flags = [&](CLI::App* cmd, bool need_out = true) {
        cmd->add_option("--scenes", f.scenes_dir, "directory of per-scene inputs")
            ->required();
        auto* out = cmd->add_option("--out", f.output_dir, "artifact output directory");
        if (need_out) {
            out->required();
        }
    };

    auto* ingest = app.add_subcommand("ingest", "validate scene inputs");
    add_scene_flags(ingest, false);

    auto* prune = app.add_subcommand("prune", "NMS + majority-vote relabeling");
    add_scene_flags(prune);
    prune->add_option("--iou-threshold", f.iou_threshold, "suppression IoU in (0,1]");
    prune->add_option("--vote-weighting", f.vote_weighting, "confidence|count");
    prune->add_option("--min-confidence", f.min_confidence,
                      "drop proposals below this confidence before pruning");

    auto* describe = app.add_subcommand("describe", "scene text description");
    add_scene_flags(describe);
    describe->add_option("--mode", f.mode, "CT or any CDT mode");
    describe->add_option("--precision", f.precision, "coordinate decimals (2 or 4)");
    describe->add_flag("--append-ct", f.append_ct,
                       "append the plain coordinate list after clock text");

    auto* render = app.add_subcommand("render", "five-view point cloud rendering");
    add_scene_flags(render);
    render->add_option("--width", f.width);
    render->add_option("--height", f.height);
    render->add_option("--splat-radius", f.splat_radius);

    auto* features = app.add_subcommand("features", "stand-in patch features (.hvf)");
    features->add_option("--scenes", f.scenes_dir, "directory of per-scene inputs");
    features->add_option("--out", f.output_dir, "artifact output directory");
    features->add_option("--import", import_path, "validate an existing .hvf instead");
    features->add_option("--grid", f.grid, "patch grid (g x g cells)");
    features->add_option("--dim", f.dim, "feature dimension (>= 6)");
    features->add_option("--width", f.width);
    features->add_option("--height", f.height);

    auto* hier = app.add_subcommand("hier", "hierarchical representation ops");
    hier->require_subcommand(1);
    auto* hforward = hier->add_subcommand("forward", "compute view/scene tokens + f_v");
    hforward->add_option("--features", features_path, ".hvf input")->required();
    hforward->add_option("--checkpoint", checkpoint, "load parameters");
    hforward->add_option("--save", save_path, "write parameters");
    hforward->add_option("--seed", f.seed);
    auto* hgrad = hier->add_subcommand("gradcheck", "finite-difference gradient check");
    hgrad->add_option("--dim", gc_dim);
    hgrad->add_option("--patches", gc_patches, "patches per view");
    hgrad->add_option("--instances", gc_instances);
    hgrad->add_option("--seed", f.seed);
    auto* htrain = hier->add_subcommand("train", "toy memorization run");
    htrain->add_option("--steps", train_steps);
    htrain->add_option("--lr", train_lr);
    htrain->add_option("--dim", train_dim);
    htrain->add_option("--seed", f.seed);
    htrain->add_option("--features", features_path, ".hvf input (else synthetic)");
    htrain->add_option("--context", train_context, "question/context words");
    htrain->add_option("--answer", train_answer, "target words");
    htrain->add_option("--save", save_path, "write parameters");

    auto* assemble = app.add_subcommand("assemble", "prompt bundles per question");
    add_scene_flags(assemble);
    assemble->add_option("--mode", f.mode, "ablation mode")->required();
    assemble->add_option("--questions", f.questions_file, "QaRecord JSONL")->required();
    assemble->add_flag("--four-view-placeholders", f.four_view_placeholders,
                       "emit four view markers instead of five");
    assemble->add_flag("--inline-images", f.inline_images,
                       "embed image bytes into bundle JSONs as base64");

    auto* ask = app.add_subcommand("ask", "send assembled bundles to the endpoint");
    add_scene_flags(ask);
    ask->add_option("--questions", f.questions_file)->required();
    ask->add_option("--endpoint", f.endpoint, "base URL")->required();
    ask->add_option("--model", f.model);
    ask->add_option("--max-answer-tokens", f.max_answer_tokens);
    ask->add_option("--timeout", f.timeout_s, "seconds");
    ask->add_option("--max-retries", f.max_retries);
    ask->add_option("--parallelism", f.parallelism);
    ask->add_option("--backoff-base", f.backoff_base_s, "seconds");
    ask->add_option("--cache-dir", f.cache_dir);
    ask->add_flag("--no-cache", f.no_cache);
    ask->add_flag("--inline-images", f.inline_images, "base64 instead of file refs");

    auto* eval = app.add_subcommand("eval", "score answers.jsonl");
    eval->add_option("--answers", answers_file, "QaRecord JSONL with predictions")
        ->required();
    eval->add_option("--out", f.output_dir, "report directory (default: alongside)");

    auto* pipeline = app.add_subcommand("pipeline", "all stages end to end");
    add_scene_flags(pipeline);
    pipeline->add_option("--questions", f.questions_file)->required();
    pipeline->add_option("--mode", f.mode)->required();
    pipeline->add_option("--iou-threshold", f.iou_threshold);
    pipeline->add_option("--vote-weighting", f.vote_weighting);
    pipeline->add_option("--min-confidence", f.min_confidence);
    pipeline->add_option("--precision", f.precision);
    pipeline->add_flag("--append-ct", f.append_ct);
    pipeline->add_option("--width", f.width);
    pipeline->add_option("--height", f.height);
    pipeline->add_option("--splat-radius", f.splat_radius);
    pipeline->add_flag("--four-view-placeholders", f.four_view_placeholders);
    pipeline->add_flag("--features", f.write_features, "also write stand-in .hvf");
    pipeline->add_option("--grid", f.grid);
    pipeline->add_option("--dim", f.dim);
    pipeline->add_option("--endpoint", f.endpoint, "ask + eval when set");
    pipeline->add_option("--model", f.model);
    pipeline->add_option("--max-answer-tokens", f.max_answer_tokens);
    pipeline->add_option("--timeout", f.timeout_s);
    pipeline->add_option("--max-retries", f.max_retries);
    pipeline->add_option("--parallelism", f.parallelism);
    pipeline->add_option("--backoff-base", f.backoff_base_s);
    pipeline->add_option("--cache-dir", f.cache_dir);
    pipeline->add_flag("--no-cache", f.no_cache);
    pipeline->add_flag("--inline-images", f.inline_images);
    pipeline->add_option("--jobs", f.jobs, "scene-level parallelism");
    pipeline->add_option("--seed", f.seed);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*ingest) return cmd_ingest(f);
        if (*prune) return cmd_prune(f);
        if (*describe) return cmd_describe(f);
        if (*render) return cmd_render(f);
        if (*features) return cmd_features(f, import_path);
        if (*hforward) return cmd_hier_forward(features_path, checkpoint, save_path, f.seed);
        if (*hgrad) return cmd_hier_gradcheck(gc_dim, gc_patches, gc_instances, f.seed);
        if (*htrain)
            return cmd_hier_train(train_steps, train_lr, train_dim, f.seed,
                                  features_path, train_context, train_answer, save_path);
        if (*assemble) return cmd_assemble(f);
        if (*ask) return cmd_ask(f);
        if (*eval) return cmd_eval(f, answers_file);
        if (*pipeline) return cmd_pipeline(f);
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 2;
}
