#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "scene2prompt/geometry.hpp"

namespace s2p {

enum class DescriptionMode { CT, CDT };

struct DescriptionConfig {
    int precision = 2;  // decimal places, 2 or 4
    DescriptionMode mode = DescriptionMode::CT;
    // CDT only: also append the plain coordinate list after the clock text.
    bool append_coordinate_list = false;
};

struct SceneDescription {
    std::string text;
    std::vector<std::size_t> object_order;  // proposal indices as emitted
};

/// "In the scene there are the following objects: <label> at [x, y, z], ..."
/// Objects are emitted in input order, coordinates are box centers at the
/// configured precision. Throws on an empty proposal list.
SceneDescription coordinate_description(const Scene& scene,
                                        const DescriptionConfig& config);

/// Clock bearing of target_xy as seen by the agent: 12 is straight ahead,
/// hours advance clockwise in 30-degree sectors, each half-open at its
/// leading boundary (a bearing of exactly 15 degrees is 1 o'clock).
/// Heights are ignored. Throws when the target sits on the agent's
/// xy-position (closer than 1e-9 m).
int clock_hour(const AgentSituation& agent, double target_x, double target_y);

/// "To my H o'clock there is a <label> [x, y, z]." grouped by hour in
/// clockwise order from straight ahead (12, then 1..11); objects sharing
/// an hour are joined with ", and". Requires scene.situation.
SceneDescription directional_description(const Scene& scene,
                                         const DescriptionConfig& config);

struct ParsedObject {
    std::string label;
    Point3 coordinate;
};

/// Extracts (label, coordinate) pairs back out of CT or CDT text.
std::vector<ParsedObject> parse_description(const std::string& text);

}  // namespace s2p
