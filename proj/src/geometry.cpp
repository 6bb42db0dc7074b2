#include "scene2prompt/geometry.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace s2p {

Point3 Point3::normalized() const {
    const double n = norm();
    if (n == 0.0) {
        throw std::invalid_argument("cannot normalize zero vector");
    }
    return {x / n, y / n, z / n};
}

void Aabb3::expand(const Point3& p) {
    min.x = std::min(min.x, p.x);
    min.y = std::min(min.y, p.y);
    min.z = std::min(min.z, p.z);
    max.x = std::max(max.x, p.x);
    max.y = std::max(max.y, p.y);
    max.z = std::max(max.z, p.z);
}

Aabb3 Scene::points_aabb() const {
    if (points.empty()) {
        throw std::invalid_argument("scene '" + scene_id + "' has no points");
    }
    Aabb3 box{points.front().position, points.front().position};
    for (const auto& cp : points) {
        box.expand(cp.position);
    }
    return box;
}

double aabb_iou(const Aabb3& a, const Aabb3& b) {
    const double ix = std::min(a.max.x, b.max.x) - std::max(a.min.x, b.min.x);
    const double iy = std::min(a.max.y, b.max.y) - std::max(a.min.y, b.min.y);
    const double iz = std::min(a.max.z, b.max.z) - std::max(a.min.z, b.min.z);
    if (ix <= 0.0 || iy <= 0.0 || iz <= 0.0) {
        return 0.0;
    }
    const double inter = ix * iy * iz;
    const double uni = a.volume() + b.volume() - inter;
    if (uni <= 0.0) {
        return 0.0;  // both degenerate
    }
    return inter / uni;
}

Point3 bbox_center(const Aabb3& box) {
    return {(box.min.x + box.max.x) * 0.5, (box.min.y + box.max.y) * 0.5,
            (box.min.z + box.max.z) * 0.5};
}

double normalize_angle(double radians) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    double a = std::fmod(radians, two_pi);
    if (a < 0.0) {
        a += two_pi;
    }
    // fmod can land exactly on two_pi after the correction
    if (a >= two_pi) {
        a -= two_pi;
    }
    return a;
}

double yaw_from_quaternion(const Quaternion& q) {
    if (std::abs(q.norm() - 1.0) > 1e-6) {
        throw std::invalid_argument("quaternion is not unit length");
    }
    // Rotated +x axis: first column of the rotation matrix.
    const double fx = 1.0 - 2.0 * (q.y * q.y + q.z * q.z);
    const double fy = 2.0 * (q.x * q.y + q.w * q.z);
    if (std::hypot(fx, fy) < 1e-9) {
        throw std::invalid_argument(
            "rotated +x axis has no xy-projection; yaw is undefined");
    }
    return normalize_angle(std::atan2(fy, fx));
}

Quaternion quaternion_from_yaw(double yaw) {
    return {std::cos(yaw * 0.5), 0.0, 0.0, std::sin(yaw * 0.5)};
}

}  // namespace s2p
