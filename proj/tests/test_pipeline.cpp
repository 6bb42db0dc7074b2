#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <map>

#include "scene2prompt/pipeline.hpp"
#include "scene2prompt/util.hpp"
#include "support/fixtures.hpp"

using namespace s2p;
using namespace s2p::testing;

namespace {

namespace fs = std::filesystem;

fs::path fresh_dir(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "s2p_pipeline_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

PipelineConfig base_config(const fs::path& root) {
    PipelineConfig config;
    config.scenes_dir = root / "scenes";
    config.questions_file = root / "questions.jsonl";
    config.output_dir = root / "out";
    return config;
}

std::map<fs::path, std::string> snapshot_tree(const fs::path& root) {
    std::map<fs::path, std::string> out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file()) {
            out[fs::relative(entry.path(), root)] = read_file(entry.path());
        }
    }
    return out;
}

}  // namespace

TEST_CASE("CT pipeline writes descriptions and bundles for both scenes") {
    const auto root = fresh_dir("ct");
    write_two_scene_fixture(root / "scenes");
    write_file(root / "questions.jsonl", two_scene_questions_jsonl());

    auto config = base_config(root);
    config.mode = AblationMode::CT;
    const auto result = run_pipeline(config);
    CHECK(result.exit_code == 0);
    REQUIRE(result.outcomes.size() == 2);
    CHECK(result.outcomes[0].ok);
    CHECK(result.outcomes[1].ok);

    for (const char* scene : {"scene_a", "scene_b"}) {
        CHECK(fs::exists(config.output_dir / scene / "pruned.json"));
        CHECK(fs::exists(config.output_dir / scene / "description.txt"));
        CHECK(fs::exists(config.output_dir / scene / "bundles" / "q0.json"));
        CHECK(fs::exists(config.output_dir / scene / "bundles" / "q1.json"));
        // CT mode renders no images
        CHECK_FALSE(fs::exists(config.output_dir / scene /
                               (std::string(scene) + "_bev.png")));
    }
    const auto desc = read_file(config.output_dir / "scene_a" / "description.txt");
    CHECK(desc.find("In the scene there are the following objects:") == 0);
    CHECK(desc.find("<monitor> at [-0.19, 1.37, 0.96]") != std::string::npos);
}

TEST_CASE("image modes render five views per scene") {
    const auto root = fresh_dir("mv");
    write_two_scene_fixture(root / "scenes");
    write_file(root / "questions.jsonl", two_scene_questions_jsonl());

    auto config = base_config(root);
    config.mode = AblationMode::CDT_MV;
    config.render.width = 64;
    config.render.height = 64;
    config.write_features = true;
    config.feature_grid = 4;
    config.feature_dim = 8;
    const auto result = run_pipeline(config);
    CHECK(result.exit_code == 0);
    for (const char* view : {"bev", "front", "left", "right", "back"}) {
        CHECK(fs::exists(config.output_dir / "scene_a" /
                         ("scene_a_" + std::string(view) + ".png")));
    }
    CHECK(fs::exists(config.output_dir / "scene_a" / "features.hvf"));
    const auto features =
        load_patch_features(config.output_dir / "scene_a" / "features.hvf");
    CHECK(features.view_count == 5);
    CHECK(features.patches_per_view == 16);
}

TEST_CASE("a scene missing its situation fails alone under CDT") {
    const auto root = fresh_dir("partial");
    write_two_scene_fixture(root / "scenes", /*situation_for_b=*/false);
    write_file(root / "questions.jsonl", two_scene_questions_jsonl());

    auto config = base_config(root);
    config.mode = AblationMode::CDT;
    const auto result = run_pipeline(config);
    CHECK(result.exit_code == 1);
    REQUIRE(result.outcomes.size() == 2);
    CHECK(result.outcomes[0].ok);        // scene_a
    CHECK_FALSE(result.outcomes[1].ok);  // scene_b has no situation.json
    CHECK(fs::exists(config.output_dir / "scene_a" / "description.txt"));
    CHECK_FALSE(fs::exists(config.output_dir / "scene_b" / "description.txt"));
}

TEST_CASE("rerun over unchanged inputs rewrites nothing") {
    const auto root = fresh_dir("idempotent");
    write_two_scene_fixture(root / "scenes");
    write_file(root / "questions.jsonl", two_scene_questions_jsonl());

    auto config = base_config(root);
    config.mode = AblationMode::CDT_MV;
    config.render.width = 64;
    config.render.height = 64;
    REQUIRE(run_pipeline(config).exit_code == 0);

    std::map<fs::path, fs::file_time_type> mtimes;
    for (const auto& entry : fs::recursive_directory_iterator(config.output_dir)) {
        if (entry.is_regular_file()) {
            mtimes[entry.path()] = fs::last_write_time(entry.path());
        }
    }
    REQUIRE(run_pipeline(config).exit_code == 0);
    for (const auto& [path, mtime] : mtimes) {
        CHECK(fs::last_write_time(path) == mtime);
    }
}

TEST_CASE("stage-by-stage run matches the one-shot pipeline byte for byte") {
    const auto root = fresh_dir("compose");
    write_two_scene_fixture(root / "scenes");
    write_file(root / "questions.jsonl", two_scene_questions_jsonl());

    auto one_shot = base_config(root);
    one_shot.mode = AblationMode::CDT_MV;
    one_shot.render.width = 64;
    one_shot.render.height = 64;
    REQUIRE(run_pipeline(one_shot).exit_code == 0);

    // staged run into a second directory through the same stage functions
    // the subcommands call
    const auto staged_out = root / "staged";
    const auto scenes = discover_scenes(root / "scenes", staged_out);
    auto questions = load_qa_jsonl(read_file(root / "questions.jsonl"));
    std::map<std::string, std::vector<QaRecord>> by_scene;
    for (const auto& q : questions) {
        by_scene[q.scene_id].push_back(q);
    }
    RenderConfig render_cfg;
    render_cfg.width = 64;
    render_cfg.height = 64;
    for (const auto& paths : scenes) {
        prune_stage(paths, {}, 0.0);
        describe_stage(paths, AblationMode::CDT_MV, {});
        render_stage(paths, render_cfg);
        assemble_stage(paths, AblationMode::CDT_MV, by_scene[paths.scene_id], {});
    }

    auto a = snapshot_tree(one_shot.output_dir);
    const auto b = snapshot_tree(staged_out);
    // bundle image paths embed the output directory; normalize it away
    REQUIRE(a.size() == b.size());
    for (auto& [rel, bytes] : a) {
        auto expected = b.at(rel);
        std::string normalized = bytes;
        const std::string from = one_shot.output_dir.string();
        const std::string to = staged_out.string();
        std::size_t pos = 0;
        while ((pos = normalized.find(from, pos)) != std::string::npos) {
            normalized.replace(pos, from.size(), to);
            pos += to.size();
        }
        CHECK(normalized == expected);
    }
}

TEST_CASE("missing scenes directory is a config error") {
    const auto root = fresh_dir("cfg");
    auto config = base_config(root);
    CHECK_THROWS_AS(run_pipeline(config), ConfigError);
}

TEST_CASE("scene-level parallelism produces identical artifacts") {
    const auto root = fresh_dir("jobs");
    write_two_scene_fixture(root / "scenes");
    write_file(root / "questions.jsonl", two_scene_questions_jsonl());

    auto serial = base_config(root);
    serial.mode = AblationMode::CT;
    serial.output_dir = root / "out_serial";
    REQUIRE(run_pipeline(serial).exit_code == 0);

    auto parallel = serial;
    parallel.output_dir = root / "out_parallel";
    parallel.jobs = 4;
    REQUIRE(run_pipeline(parallel).exit_code == 0);

    const auto a = snapshot_tree(serial.output_dir);
    const auto b = snapshot_tree(parallel.output_dir);
    REQUIRE(a.size() == b.size());
    for (const auto& [rel, bytes] : a) {
        CHECK(b.at(rel) == bytes);
    }
}
