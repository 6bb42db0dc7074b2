#include "scene2prompt/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <map>
#include <thread>

#include <json.hpp>

#include "scene2prompt/hiervis.hpp"
#include "scene2prompt/util.hpp"

namespace s2p {

namespace {

using nlohmann::json;

DescriptionMode description_mode_for(AblationMode mode) {
    return mode == AblationMode::CT ? DescriptionMode::CT : DescriptionMode::CDT;
}

std::optional<AgentSituation> maybe_situation(const ScenePaths& paths) {
    const auto file = paths.scene_dir / "situation.json";
    if (!std::filesystem::exists(file)) {
        return std::nullopt;
    }
    return load_situation(file);
}

std::vector<std::string> view_image_paths(const ScenePaths& paths) {
    std::vector<std::string> out;
    for (const auto id :
         {ViewId::Bev, ViewId::Front, ViewId::Left, ViewId::Right, ViewId::Back}) {
        out.push_back(
            (paths.out_dir / (paths.scene_id + "_" + view_id_name(id) + ".png"))
                .string());
    }
    return out;
}

}  // namespace

std::vector<ScenePaths> discover_scenes(const std::filesystem::path& scenes_dir,
                                        const std::filesystem::path& output_dir) {
    if (!std::filesystem::is_directory(scenes_dir)) {
        throw ConfigError("scenes directory does not exist: " + scenes_dir.string());
    }
    std::vector<ScenePaths> scenes;
    for (const auto& entry : std::filesystem::directory_iterator(scenes_dir)) {
        if (!entry.is_directory()) {
            continue;
        }
        ScenePaths p;
        p.scene_id = entry.path().filename().string();
        p.scene_dir = entry.path();
        p.out_dir = output_dir / p.scene_id;
        scenes.push_back(std::move(p));
    }
    if (scenes.empty()) {
        throw ConfigError("no scene subdirectories under " + scenes_dir.string());
    }
    std::sort(scenes.begin(), scenes.end(),
              [](const ScenePaths& a, const ScenePaths& b) {
                  return a.scene_id < b.scene_id;
              });
    return scenes;
}

ProposalFile prune_stage(const ScenePaths& paths, const PruneConfig& config,
                         double min_confidence) {
    ProposalFileOptions opts;
    opts.min_confidence = min_confidence;
    const ProposalFile raw = load_proposals(paths.scene_dir / "proposals.json", opts);
    ProposalFile pruned;
    pruned.scene_id = raw.scene_id;
    pruned.proposals = prune_proposals(raw.proposals, config);
    save_proposals(paths.out_dir / "pruned.json", pruned);
    return pruned;
}

SceneDescription describe_stage(const ScenePaths& paths, AblationMode mode,
                                const DescriptionConfig& config) {
    if (!mode_has_scene_text(mode)) {
        throw std::invalid_argument("mode " + ablation_mode_name(mode) +
                                    " has no scene text stage");
    }
    const ProposalFile pruned = load_proposals(paths.out_dir / "pruned.json");
    Scene scene;
    scene.scene_id = paths.scene_id;
    scene.proposals = pruned.proposals;
    scene.situation = maybe_situation(paths);

    DescriptionConfig cfg = config;
    cfg.mode = description_mode_for(mode);
    const SceneDescription desc = cfg.mode == DescriptionMode::CT
                                      ? coordinate_description(scene, cfg)
                                      : directional_description(scene, cfg);
    write_if_changed(paths.out_dir / "description.txt", desc.text + "\n");
    return desc;
}

std::vector<std::string> render_stage(const ScenePaths& paths,
                                      const RenderConfig& config) {
    Scene scene;
    scene.scene_id = paths.scene_id;
    scene.points = load_point_cloud(paths.scene_dir / "points.ply");
    const auto views = render_scene(scene, config);
    auto image_paths = view_image_paths(paths);
    for (std::size_t i = 0; i < views.size(); ++i) {
        write_png(image_paths[i], views[i].image);
    }
    return image_paths;
}

void features_stage(const ScenePaths& paths, const RenderConfig& config, int grid,
                    int dim) {
    Scene scene;
    scene.scene_id = paths.scene_id;
    scene.points = load_point_cloud(paths.scene_dir / "points.ply");
    const auto views = render_scene(scene, config);
    PatchFeatures features;
    features.view_count = std::uint32_t(views.size());
    features.patches_per_view = std::uint32_t(grid) * std::uint32_t(grid);
    features.dim = std::uint32_t(dim);
    for (const auto& view : views) {
        features.views.push_back(patchify_stub(view, grid, dim));
    }
    save_patch_features(paths.out_dir / "features.hvf", features);
}

std::vector<PromptBundle> assemble_stage(const ScenePaths& paths, AblationMode mode,
                                         const std::vector<QaRecord>& scene_questions,
                                         const PromptOptions& options) {
    std::string description;
    if (mode_has_scene_text(mode)) {
        description = trim(read_file(paths.out_dir / "description.txt"));
    }
    std::optional<std::string> situation_text;
    if (const auto situation = maybe_situation(paths); situation.has_value()) {
        situation_text = situation->description;
    }
    const auto image_paths =
        mode_has_images(mode) ? view_image_paths(paths) : std::vector<std::string>{};

    std::vector<PromptBundle> bundles;
    bundles.reserve(scene_questions.size());
    for (std::size_t i = 0; i < scene_questions.size(); ++i) {
        PromptBundle bundle =
            assemble_prompt(paths.scene_id, scene_questions[i].question, mode,
                            situation_text, description, image_paths, options);
        write_if_changed(
            paths.out_dir / "bundles" / ("q" + std::to_string(i) + ".json"),
            bundle_to_json(bundle, options.inline_bundle_images).dump(2) + "\n");
        bundles.push_back(std::move(bundle));
    }
    return bundles;
}

PipelineResult run_pipeline(const PipelineConfig& config) {
    PipelineResult result;
    const auto scenes = discover_scenes(config.scenes_dir, config.output_dir);

    std::vector<QaRecord> questions;
    if (!config.questions_file.empty()) {
        if (!std::filesystem::exists(config.questions_file)) {
            throw ConfigError("questions file does not exist: " +
                              config.questions_file.string());
        }
        questions = load_qa_jsonl(read_file(config.questions_file));
    }
    std::map<std::string, std::vector<QaRecord>> questions_by_scene;
    for (const auto& q : questions) {
        questions_by_scene[q.scene_id].push_back(q);
    }

    struct SceneWork {
        SceneOutcome outcome;
        std::vector<PromptBundle> bundles;
        std::vector<QaRecord> records;
    };
    std::vector<SceneWork> work(scenes.size());

    auto process_scene = [&](std::size_t idx) {
        const auto& paths = scenes[idx];
        SceneWork& w = work[idx];
        w.outcome.scene_id = paths.scene_id;
        try {
            prune_stage(paths, config.prune, config.min_confidence);
            if (mode_has_scene_text(config.mode)) {
                describe_stage(paths, config.mode, config.description);
            }
            if (mode_has_images(config.mode)) {
                render_stage(paths, config.render);
            }
            if (config.write_features) {
                features_stage(paths, config.render, config.feature_grid,
                               config.feature_dim);
            }
            const auto it = questions_by_scene.find(paths.scene_id);
            if (it != questions_by_scene.end()) {
                w.bundles = assemble_stage(paths, config.mode, it->second, config.prompt);
                w.records = it->second;
            }
        } catch (const std::exception& e) {
            w.outcome.ok = false;
            w.outcome.error = e.what();
        }
    };

    const int jobs = std::max(1, config.jobs);
    if (jobs == 1 || scenes.size() == 1) {
        for (std::size_t i = 0; i < scenes.size(); ++i) {
            process_scene(i);
        }
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        const int n_workers = std::min<int>(jobs, int(scenes.size()));
        for (int t = 0; t < n_workers; ++t) {
            pool.emplace_back([&]() {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= scenes.size()) {
                        return;
                    }
                    process_scene(i);
                }
            });
        }
        for (auto& t : pool) {
            t.join();
        }
    }

    bool any_failed = false;
    for (auto& w : work) {
        result.outcomes.push_back(w.outcome);
        any_failed |= !w.outcome.ok;
    }

    if (config.endpoint.has_value()) {
        std::vector<PromptBundle> all_bundles;
        std::vector<QaRecord> all_records;
        for (const auto& w : work) {
            if (!w.outcome.ok) {
                continue;
            }
            all_bundles.insert(all_bundles.end(), w.bundles.begin(), w.bundles.end());
            all_records.insert(all_records.end(), w.records.begin(), w.records.end());
        }
        if (!all_bundles.empty()) {
            const auto answers = ask_batch(all_bundles, *config.endpoint);
            std::string answers_jsonl;
            for (std::size_t i = 0; i < answers.size(); ++i) {
                all_records[i].prediction = answers[i].ok ? answers[i].answer : "";
                json line;
                line["scene_id"] = all_records[i].scene_id;
                line["question"] = all_records[i].question;
                line["references"] = all_records[i].references;
                line["prediction"] = all_records[i].prediction;
                if (!answers[i].ok) {
                    line["error"] = answers[i].error_message;
                    any_failed = true;
                }
                answers_jsonl += line.dump() + "\n";
            }
            write_if_changed(config.output_dir / "answers.jsonl", answers_jsonl);

            const MetricReport report = evaluate_run(all_records);
            write_if_changed(config.output_dir / "report.json",
                             report_to_json(report).dump(2) + "\n");
            write_if_changed(config.output_dir / "report.txt", report_to_table(report));
            result.report = report;
        }
    }

    result.exit_code = any_failed ? 1 : 0;
    return result;
}

}  // namespace s2p
