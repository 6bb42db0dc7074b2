#pragma once

// Synthetic scene fixtures shared by the integration and acceptance tests.

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "scene2prompt/geometry.hpp"
#include "scene2prompt/ingest.hpp"
#include "scene2prompt/util.hpp"

namespace s2p::testing {

// A dense block of same-colored points filling a box.
inline void add_point_block(std::vector<ColoredPoint>& points, const Aabb3& box,
                            std::array<std::uint8_t, 3> rgb, int per_axis = 5) {
    const Point3 ext = box.extent();
    for (int ix = 0; ix < per_axis; ++ix) {
        for (int iy = 0; iy < per_axis; ++iy) {
            for (int iz = 0; iz < per_axis; ++iz) {
                ColoredPoint cp;
                cp.position = {box.min.x + ext.x * (ix + 0.5) / per_axis,
                               box.min.y + ext.y * (iy + 0.5) / per_axis,
                               box.min.z + ext.z * (iz + 0.5) / per_axis};
                cp.rgb = rgb;
                points.push_back(cp);
            }
        }
    }
}

inline Aabb3 box_around(const Point3& center, double half) {
    return {{center.x - half, center.y - half, center.z - half},
            {center.x + half, center.y + half, center.z + half}};
}

struct FixtureObject {
    std::string label;
    Point3 center;
    double half = 0.25;
    double confidence = 0.9;
    std::array<std::uint8_t, 3> rgb{128, 128, 128};
};

// Writes points.ply, proposals.json and (optionally) situation.json for one
// scene directory.
inline void write_scene_fixture(const std::filesystem::path& scene_dir,
                                const std::string& scene_id,
                                const std::vector<FixtureObject>& objects,
                                bool with_situation, double agent_yaw = 0.0,
                                Point3 agent_pos = {0.0, 0.0, 0.0},
                                const std::string& situation_text = "") {
    std::filesystem::create_directories(scene_dir);
    std::vector<ColoredPoint> points;
    // floor slab so every scene has a footprint
    add_point_block(points, {{-3.0, -3.0, -0.05}, {3.0, 3.0, 0.0}}, {200, 200, 200}, 12);
    nlohmann::json proposals = nlohmann::json::array();
    for (const auto& obj : objects) {
        const Aabb3 box = box_around(obj.center, obj.half);
        add_point_block(points, box, obj.rgb);
        proposals.push_back({
            {"label", obj.label},
            {"box_min", {box.min.x, box.min.y, box.min.z}},
            {"box_max", {box.max.x, box.max.y, box.max.z}},
            {"confidence", obj.confidence},
        });
    }
    save_point_cloud_ply(scene_dir / "points.ply", points);
    nlohmann::json doc;
    doc["scene_id"] = scene_id;
    doc["proposals"] = proposals;
    write_file(scene_dir / "proposals.json", doc.dump(2) + "\n");
    if (with_situation) {
        nlohmann::json situation;
        situation["position"] = {agent_pos.x, agent_pos.y, agent_pos.z};
        situation["yaw"] = agent_yaw;
        situation["description"] =
            situation_text.empty() ? "I am standing in the room." : situation_text;
        write_file(scene_dir / "situation.json", situation.dump(2) + "\n");
    }
}

// Two-scene fixture with planted Q&A; scene_b carries no situation so CDT
// modes fail on it by construction.
inline void write_two_scene_fixture(const std::filesystem::path& root,
                                    bool situation_for_b = true) {
    write_scene_fixture(root / "scene_a", "scene_a",
                        {
                            {"monitor", {-0.19, 1.37, 0.96}, 0.25, 0.95, {30, 30, 30}},
                            {"desk", {0.15, 1.17, 0.38}, 0.35, 0.9, {139, 69, 19}},
                            {"window", {0.55, -2.23, 1.00}, 0.4, 0.85, {100, 160, 220}},
                        },
                        true, 1.5707963267948966, {0.0, -0.5, 0.0},
                        "I am facing the monitor and the desk is near me.");
    write_scene_fixture(root / "scene_b", "scene_b",
                        {
                            {"chair", {1.0, 0.5, 0.45}, 0.3, 0.9, {200, 30, 30}},
                            {"table", {-0.8, -0.6, 0.4}, 0.45, 0.8, {120, 90, 40}},
                        },
                        situation_for_b, 0.0, {0.0, 0.0, 0.0},
                        "There is a chair to my side.");
}

inline std::string two_scene_questions_jsonl() {
    return R"({"scene_id": "scene_a", "question": "What color is the desk?", "references": ["brown"]}
{"scene_id": "scene_a", "question": "Is there a window in the room?", "references": ["yes"]}
{"scene_id": "scene_b", "question": "How many chairs are there?", "references": ["one", "1"]}
{"scene_id": "scene_b", "question": "Which object is red?", "references": ["chair"]}
)";
}

}  // namespace s2p::testing
