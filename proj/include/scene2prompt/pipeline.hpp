#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "scene2prompt/client.hpp"
#include "scene2prompt/describe.hpp"
#include "scene2prompt/eval.hpp"
#include "scene2prompt/ingest.hpp"
#include "scene2prompt/prompt.hpp"
#include "scene2prompt/pruning.hpp"
#include "scene2prompt/render.hpp"

namespace s2p {

/// Bad invocation (missing paths, malformed config); maps to exit code 2.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

struct PipelineConfig {
    std::filesystem::path scenes_dir;      // one subdirectory per scene
    std::filesystem::path questions_file;  // QaRecord JSONL (predictions empty)
    std::filesystem::path output_dir;
    AblationMode mode = AblationMode::CT;
    PruneConfig prune;
    double min_confidence = 0.0;
    DescriptionConfig description;
    RenderConfig render;
    PromptOptions prompt;
    bool write_features = false;  // stand-in patch features per scene
    int feature_grid = 4;
    int feature_dim = 64;
    std::optional<EndpointConfig> endpoint;  // ask + eval stages run when set
    int jobs = 1;
    std::uint64_t seed = 42;
};

struct ScenePaths {
    std::string scene_id;
    std::filesystem::path scene_dir;  // input: points.ply, proposals.json, situation.json?
    std::filesystem::path out_dir;
};

/// Scene subdirectories in name order; throws ConfigError when the input
/// directory is missing or empty.
std::vector<ScenePaths> discover_scenes(const std::filesystem::path& scenes_dir,
                                        const std::filesystem::path& output_dir);

// Stage functions write their artifacts under paths.out_dir (skipping the
// write when the bytes are unchanged) and are exactly what both the one-shot
// pipeline and the individual subcommands run.

/// proposals.json -> NMS + majority vote -> pruned.json
ProposalFile prune_stage(const ScenePaths& paths, const PruneConfig& config,
                         double min_confidence);

/// pruned.json (+ situation.json for CDT) -> description.txt
SceneDescription describe_stage(const ScenePaths& paths, AblationMode mode,
                                const DescriptionConfig& config);

/// points.ply -> {scene_id}_{view}.png x5; returns the image paths in view
/// order
std::vector<std::string> render_stage(const ScenePaths& paths,
                                      const RenderConfig& config);

/// rendered views -> features.hvf (stand-in patch descriptors)
void features_stage(const ScenePaths& paths, const RenderConfig& config, int grid,
                    int dim);

/// description.txt + rendered views + questions -> bundles/q{idx}.json
std::vector<PromptBundle> assemble_stage(const ScenePaths& paths, AblationMode mode,
                                         const std::vector<QaRecord>& scene_questions,
                                         const PromptOptions& options);

struct SceneOutcome {
    std::string scene_id;
    bool ok = true;
    std::string error;
};

struct PipelineResult {
    int exit_code = 0;  // 0 ok, 1 partial failure, 2 config error
    std::vector<SceneOutcome> outcomes;
    std::optional<MetricReport> report;
};

/// Runs every stage over every scene; a failing scene is recorded and
/// skipped, not fatal. With an endpoint configured the assembled bundles
/// are sent out and scored into report.json / report.txt.
PipelineResult run_pipeline(const PipelineConfig& config);

}  // namespace s2p
