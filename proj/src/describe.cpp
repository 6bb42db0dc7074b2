#include "scene2prompt/describe.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "scene2prompt/util.hpp"

namespace s2p {

namespace {

void check_config(const DescriptionConfig& config) {
    if (config.precision != 2 && config.precision != 4) {
        throw std::invalid_argument("precision must be 2 or 4");
    }
}

std::string coord_block(const Point3& p, int precision) {
    return "[" + format_fixed(p.x, precision) + ", " + format_fixed(p.y, precision) +
           ", " + format_fixed(p.z, precision) + "]";
}

}  // namespace

SceneDescription coordinate_description(const Scene& scene,
                                        const DescriptionConfig& config) {
    check_config(config);
    if (scene.proposals.empty()) {
        throw std::invalid_argument("scene '" + scene.scene_id + "' has no proposals");
    }
    SceneDescription desc;
    desc.text = "In the scene there are the following objects: ";
    for (std::size_t i = 0; i < scene.proposals.size(); ++i) {
        const auto& p = scene.proposals[i];
        if (i > 0) {
            desc.text += ", ";
        }
        desc.text += "<" + p.class_label + "> at " +
                     coord_block(bbox_center(p.box), config.precision);
        desc.object_order.push_back(i);
    }
    desc.text += ".";
    return desc;
}

int clock_hour(const AgentSituation& agent, double target_x, double target_y) {
    const double dx = target_x - agent.position.x;
    const double dy = target_y - agent.position.y;
    if (std::hypot(dx, dy) <= 1e-9) {
        throw std::invalid_argument("target coincides with agent position");
    }
    const double bearing = std::atan2(dy, dx);
    // Clockwise angle from the facing direction to the target.
    const double cw = normalize_angle(agent.yaw - bearing);
    const double cw_deg = cw * 180.0 / std::numbers::pi;
    const int hour = int(std::floor((cw_deg + 15.0) / 30.0)) % 12;
    return hour == 0 ? 12 : hour;
}

SceneDescription directional_description(const Scene& scene,
                                         const DescriptionConfig& config) {
    check_config(config);
    if (!scene.situation.has_value()) {
        throw std::invalid_argument("scene '" + scene.scene_id +
                                    "' has no agent situation; cannot emit clock text");
    }
    if (scene.proposals.empty()) {
        throw std::invalid_argument("scene '" + scene.scene_id + "' has no proposals");
    }
    const auto& agent = *scene.situation;

    std::vector<std::vector<std::size_t>> by_hour(13);
    for (std::size_t i = 0; i < scene.proposals.size(); ++i) {
        const Point3 c = bbox_center(scene.proposals[i].box);
        by_hour[clock_hour(agent, c.x, c.y)].push_back(i);
    }

    SceneDescription desc;
    // clockwise from straight ahead: 12 first, then 1..11
    for (int step = 0; step < 12; ++step) {
        const int hour = step == 0 ? 12 : step;
        if (by_hour[hour].empty()) {
            continue;
        }
        if (!desc.text.empty()) {
            desc.text += " ";
        }
        desc.text += "To my " + std::to_string(hour) + " o'clock there is a ";
        for (std::size_t j = 0; j < by_hour[hour].size(); ++j) {
            const std::size_t i = by_hour[hour][j];
            const auto& p = scene.proposals[i];
            if (j > 0) {
                desc.text += ", and ";
            }
            desc.text += "<" + p.class_label + "> " +
                         coord_block(bbox_center(p.box), config.precision);
            desc.object_order.push_back(i);
        }
        desc.text += ".";
    }
    if (config.append_coordinate_list) {
        DescriptionConfig ct = config;
        ct.mode = DescriptionMode::CT;
        desc.text += " " + coordinate_description(scene, ct).text;
    }
    return desc;
}

std::vector<ParsedObject> parse_description(const std::string& text) {
    std::vector<ParsedObject> out;
    std::size_t pos = 0;
    while (true) {
        const std::size_t lb = text.find('<', pos);
        if (lb == std::string::npos) {
            break;
        }
        const std::size_t rb = text.find('>', lb);
        if (rb == std::string::npos) {
            break;
        }
        std::size_t open = text.find('[', rb);
        if (open == std::string::npos) {
            break;
        }
        const std::size_t close = text.find(']', open);
        if (close == std::string::npos) {
            break;
        }
        ParsedObject obj;
        obj.label = text.substr(lb + 1, rb - lb - 1);
        const std::string coords = text.substr(open + 1, close - open - 1);
        double v[3];
        int n = 0;
        std::size_t start = 0;
        while (n < 3 && start < coords.size()) {
            std::size_t comma = coords.find(',', start);
            if (comma == std::string::npos) {
                comma = coords.size();
            }
            v[n++] = std::stod(trim(coords.substr(start, comma - start)));
            start = comma + 1;
        }
        if (n != 3) {
            throw std::invalid_argument("malformed coordinate block: [" + coords + "]");
        }
        obj.coordinate = {v[0], v[1], v[2]};
        out.push_back(std::move(obj));
        pos = close + 1;
    }
    return out;
}

}  // namespace s2p
