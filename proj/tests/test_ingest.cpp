#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <random>

#include "scene2prompt/ingest.hpp"
#include "scene2prompt/util.hpp"

using namespace s2p;

namespace {

std::filesystem::path temp_dir() {
    const auto dir =
        std::filesystem::temp_directory_path() / "s2p_ingest_tests";
    std::filesystem::create_directories(dir);
    return dir;
}

const char* kAsciiPly =
    "ply\n"
    "format ascii 1.0\n"
    "comment synthetic\n"
    "element vertex 3\n"
    "property float x\nproperty float y\nproperty float z\n"
    "property uchar red\nproperty uchar green\nproperty uchar blue\n"
    "end_header\n"
    "0.5 1.5 -2.5 255 0 0\n"
    "-1 0 3.25 0 255 0\n"
    "2 2 2 0 0 255\n";

}  // namespace

TEST_CASE("ascii PLY loads vertices in file order") {
    const auto path = temp_dir() / "ascii.ply";
    write_file(path, kAsciiPly);
    const auto points = load_point_cloud(path);
    REQUIRE(points.size() == 3);
    CHECK(points[0].position.x == doctest::Approx(0.5));
    CHECK(points[0].position.z == doctest::Approx(-2.5));
    CHECK(points[0].rgb == std::array<std::uint8_t, 3>{255, 0, 0});
    CHECK(points[2].rgb == std::array<std::uint8_t, 3>{0, 0, 255});
}

TEST_CASE("binary and ascii encodings load identically") {
    const auto ascii_path = temp_dir() / "pair_ascii.ply";
    write_file(ascii_path, kAsciiPly);
    const auto ascii_points = load_point_cloud(ascii_path);

    const auto bin_path = temp_dir() / "pair_bin.ply";
    save_point_cloud_ply(bin_path, ascii_points, /*binary=*/true);
    const auto bin_points = load_point_cloud(bin_path);

    REQUIRE(bin_points.size() == ascii_points.size());
    for (std::size_t i = 0; i < ascii_points.size(); ++i) {
        CHECK(bin_points[i].position.x ==
              doctest::Approx(ascii_points[i].position.x));
        CHECK(bin_points[i].position.y ==
              doctest::Approx(ascii_points[i].position.y));
        CHECK(bin_points[i].position.z ==
              doctest::Approx(ascii_points[i].position.z));
        CHECK(bin_points[i].rgb == ascii_points[i].rgb);
    }
}

TEST_CASE("truncated PLY body reports the byte offset") {
    std::string truncated = kAsciiPly;
    truncated = truncated.substr(0, truncated.rfind("2 2 2"));
    truncated.replace(truncated.find("element vertex 3"), 16, "element vertex 5");
    const auto path = temp_dir() / "trunc.ply";
    write_file(path, truncated);
    CHECK_THROWS_WITH_AS(load_point_cloud(path),
                         doctest::Contains("byte offset"), ParseError);
}

TEST_CASE("colorless PLY defaults to mid-gray") {
    const auto path = temp_dir() / "gray.ply";
    write_file(path,
               "ply\nformat ascii 1.0\nelement vertex 1\n"
               "property float x\nproperty float y\nproperty float z\n"
               "end_header\n1 2 3\n");
    const auto points = load_point_cloud(path);
    REQUIRE(points.size() == 1);
    CHECK(points[0].rgb == std::array<std::uint8_t, 3>{128, 128, 128});
}

TEST_CASE("list properties on vertices are rejected") {
    const auto path = temp_dir() / "list.ply";
    write_file(path,
               "ply\nformat ascii 1.0\nelement vertex 1\n"
               "property float x\nproperty float y\nproperty float z\n"
               "property list uchar int vertex_indices\n"
               "end_header\n1 2 3\n");
    CHECK_THROWS_AS(load_point_cloud(path), ParseError);
}

TEST_CASE("extra scalar vertex properties are skipped") {
    const auto path = temp_dir() / "extra.ply";
    write_file(path,
               "ply\nformat ascii 1.0\nelement vertex 1\n"
               "property float x\nproperty float y\nproperty float z\n"
               "property float nx\n"
               "end_header\n1 2 3 0.7\n");
    const auto points = load_point_cloud(path);
    REQUIRE(points.size() == 1);
    CHECK(points[0].position.y == doctest::Approx(2.0));
}

TEST_CASE("proposal file parses, lowercases, and defaults confidence") {
    const auto path = temp_dir() / "props.json";
    write_file(path, R"({
        "scene_id": "s1",
        "proposals": [
            {"label": "Monitor", "box_min": [0,0,0], "box_max": [1,1,1], "confidence": 0.8},
            {"label": "desk", "box_min": [2,2,0], "box_max": [3,3,1]}
        ]})");
    const auto file = load_proposals(path);
    CHECK(file.scene_id == "s1");
    REQUIRE(file.proposals.size() == 2);
    CHECK(file.proposals[0].class_label == "monitor");
    CHECK(file.proposals[0].confidence == doctest::Approx(0.8));
    CHECK(file.proposals[1].confidence == doctest::Approx(1.0));
}

TEST_CASE("proposal validation names the failing axis") {
    const auto path = temp_dir() / "bad_box.json";
    write_file(path, R"({"scene_id": "s", "proposals":
        [{"label": "x", "box_min": [1,0,0], "box_max": [0,1,1]}]})");
    CHECK_THROWS_WITH_AS(load_proposals(path), doctest::Contains("box_min.x"),
                         ParseError);
}

TEST_CASE("proposal validation rejects bad confidence and empty labels") {
    const auto path = temp_dir() / "bad_conf.json";
    write_file(path, R"({"scene_id": "s", "proposals":
        [{"label": "x", "box_min": [0,0,0], "box_max": [1,1,1], "confidence": 1.5}]})");
    CHECK_THROWS_AS(load_proposals(path), ParseError);

    write_file(path, R"({"scene_id": "s", "proposals":
        [{"label": "  ", "box_min": [0,0,0], "box_max": [1,1,1]}]})");
    CHECK_THROWS_AS(load_proposals(path), ParseError);
}

TEST_CASE("min-confidence gate drops low proposals only") {
    const auto path = temp_dir() / "gate.json";
    write_file(path, R"({"scene_id": "s", "proposals": [
        {"label": "a", "box_min": [0,0,0], "box_max": [1,1,1], "confidence": 0.2},
        {"label": "b", "box_min": [2,0,0], "box_max": [3,1,1], "confidence": 0.9}
    ]})");
    ProposalFileOptions opts;
    opts.min_confidence = 0.5;
    const auto file = load_proposals(path, opts);
    REQUIRE(file.proposals.size() == 1);
    CHECK(file.proposals[0].class_label == "b");
}

TEST_CASE("save/load proposals round-trips") {
    ProposalFile file;
    file.scene_id = "round";
    file.proposals = {
        {"sofa", {{-1.5, 0.25, 0.0}, {0.5, 1.75, 0.875}}, 0.625},
        {"lamp", {{2.0, 2.0, 0.0}, {2.25, 2.25, 1.5}}, 1.0},
    };
    const auto path = temp_dir() / "round.json";
    save_proposals(path, file);
    const auto loaded = load_proposals(path);
    CHECK(loaded.scene_id == file.scene_id);
    REQUIRE(loaded.proposals.size() == file.proposals.size());
    for (std::size_t i = 0; i < loaded.proposals.size(); ++i) {
        CHECK(loaded.proposals[i].class_label == file.proposals[i].class_label);
        CHECK(loaded.proposals[i].box == file.proposals[i].box);
        CHECK(loaded.proposals[i].confidence == file.proposals[i].confidence);
    }
}

TEST_CASE("situation loads from yaw or quaternion but not both") {
    const auto path = temp_dir() / "situation.json";
    write_file(path, R"({"position": [1, 2, 0.5], "yaw": -1.57, "description": "d"})");
    const auto s = load_situation(path);
    CHECK(s.position.y == doctest::Approx(2.0));
    CHECK(s.yaw >= 0.0);
    CHECK(s.description == "d");

    write_file(path, R"({"position": [0,0,0], "rotation_wxyz": [0,0,0,1]})");
    CHECK(load_situation(path).yaw == doctest::Approx(3.14159265).epsilon(1e-6));

    write_file(path, R"({"position": [0,0,0], "yaw": 0, "rotation_wxyz": [1,0,0,0]})");
    CHECK_THROWS_AS(load_situation(path), ParseError);
}

TEST_CASE("patch feature header shape is honored") {
    PatchFeatures f;
    f.view_count = 5;
    f.patches_per_view = 4;
    f.dim = 8;
    for (int v = 0; v < 5; ++v) {
        f.views.push_back(Eigen::MatrixXd::Constant(4, 8, double(v)));
    }
    const auto path = temp_dir() / "shape.hvf";
    save_patch_features(path, f);
    const auto loaded = load_patch_features(path);
    CHECK(loaded.view_count == 5);
    CHECK(loaded.patches_per_view == 4);
    CHECK(loaded.dim == 8);
    REQUIRE(loaded.views.size() == 5);
    CHECK(loaded.views[3](2, 7) == doctest::Approx(3.0));
}

TEST_CASE("patch feature size mismatch reports expected and actual bytes") {
    const auto path = temp_dir() / "short.hvf";
    std::string data = "HVF1";
    auto u32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) data.push_back(char((v >> (8 * i)) & 0xff));
    };
    u32(1);
    u32(2);
    u32(2);
    data.append(4 * 3, '\0');  // one float short of 2x2
    write_file(path, data);
    CHECK_THROWS_WITH_AS(load_patch_features(path), doctest::Contains("expected"),
                         ParseError);
}

TEST_CASE("patch feature loader rejects bad magic and non-finite values") {
    const auto path = temp_dir() / "magic.hvf";
    write_file(path, "NOPE0000000000000000");
    CHECK_THROWS_WITH_AS(load_patch_features(path), doctest::Contains("magic"),
                         ParseError);

    PatchFeatures f;
    f.view_count = 1;
    f.patches_per_view = 1;
    f.dim = 1;
    f.views.push_back(Eigen::MatrixXd::Constant(
        1, 1, std::numeric_limits<double>::infinity()));
    const auto inf_path = temp_dir() / "inf.hvf";
    save_patch_features(inf_path, f);
    CHECK_THROWS_WITH_AS(load_patch_features(inf_path),
                         doctest::Contains("non-finite"), ParseError);
}

TEST_CASE("patch feature round-trip is bitwise for float32 data") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> dist(-10.0f, 10.0f);
    PatchFeatures f;
    f.view_count = 3;
    f.patches_per_view = 7;
    f.dim = 5;
    for (int v = 0; v < 3; ++v) {
        Eigen::MatrixXd m(7, 5);
        for (Eigen::Index r = 0; r < m.rows(); ++r) {
            for (Eigen::Index c = 0; c < m.cols(); ++c) {
                m(r, c) = double(dist(rng));
            }
        }
        f.views.push_back(std::move(m));
    }
    const auto path = temp_dir() / "bitwise.hvf";
    save_patch_features(path, f);
    const auto loaded = load_patch_features(path);
    for (int v = 0; v < 3; ++v) {
        CHECK((loaded.views[v].array() == f.views[v].array()).all());
    }
}
