#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace s2p {

// World frame is z-up, units are meters.
struct Point3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    Point3 operator+(const Point3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Point3 operator-(const Point3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Point3 operator*(double s) const { return {x * s, y * s, z * s}; }
    bool operator==(const Point3& o) const = default;

    double dot(const Point3& o) const { return x * o.x + y * o.y + z * o.z; }
    Point3 cross(const Point3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Point3 normalized() const;
    bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

struct Aabb3 {
    Point3 min;
    Point3 max;

    bool valid() const {
        return min.finite() && max.finite() && min.x <= max.x && min.y <= max.y &&
               min.z <= max.z;
    }
    double volume() const {
        return (max.x - min.x) * (max.y - min.y) * (max.z - min.z);
    }
    Point3 extent() const { return max - min; }
    double diagonal() const { return extent().norm(); }
    bool contains(const Point3& p) const {
        return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y &&
               p.z >= min.z && p.z <= max.z;
    }
    // Grows the box to cover p; an all-zero default box should be seeded first.
    void expand(const Point3& p);
    bool operator==(const Aabb3& o) const = default;
};

// One detected 3D instance: the atom of the scene text description.
struct ObjectProposal {
    std::string class_label;  // lowercase token, nonempty
    Aabb3 box;
    double confidence = 1.0;  // in [0,1]
};

// Agent pose for situated Q&A. Yaw is counterclockwise from +x, in the
// xy-plane, normalized to [0, 2*pi).
struct AgentSituation {
    Point3 position;
    double yaw = 0.0;
    std::string description;
};

struct ColoredPoint {
    Point3 position;
    std::array<std::uint8_t, 3> rgb{128, 128, 128};
};

struct Scene {
    std::string scene_id;
    std::vector<ColoredPoint> points;
    std::vector<ObjectProposal> proposals;
    std::optional<AgentSituation> situation;

    Aabb3 points_aabb() const;
};

// Unit quaternion, scalar-first.
struct Quaternion {
    double w = 1.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    double norm() const { return std::sqrt(w * w + x * x + y * y + z * z); }
};

/// Volume IoU of two axis-aligned boxes. Disjoint pairs and pairs where
/// both boxes are degenerate (zero volume) return 0.
double aabb_iou(const Aabb3& a, const Aabb3& b);

Point3 bbox_center(const Aabb3& box);

/// Maps any angle to [0, 2*pi).
double normalize_angle(double radians);

/// Yaw of the quaternion-rotated +x axis projected into the xy-plane.
/// Throws std::invalid_argument for non-unit quaternions (|q| off by more
/// than 1e-6) and for the degenerate case where the rotated +x axis has no
/// xy-component to take a heading from.
double yaw_from_quaternion(const Quaternion& q);

/// Inverse of yaw_from_quaternion for pure z-rotations.
Quaternion quaternion_from_yaw(double yaw);

}  // namespace s2p
