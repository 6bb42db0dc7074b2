#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "scene2prompt/geometry.hpp"
#include "scene2prompt/image.hpp"

namespace s2p {

enum class CameraKind { OrthographicTopdown, PerspectiveOblique };

struct CameraSpec {
    CameraKind kind = CameraKind::PerspectiveOblique;
    Point3 position;
    Point3 look_at;
    Point3 up{0.0, 0.0, 1.0};
    double vfov_deg = 60.0;     // perspective only
    double ortho_extent = 1.0;  // orthographic only: full image width in meters
};

enum class ViewId { Bev, Front, Left, Right, Back };

std::string view_id_name(ViewId id);

struct RenderedView {
    ViewId view_id = ViewId::Bev;
    CameraSpec camera;
    ImageRgb image;
    std::vector<double> depth;  // per pixel, +inf where background
};

struct RenderConfig {
    int width = 448;
    int height = 448;
    int splat_radius = 2;
    // Oblique camera placement: offset distance as a multiple of the scene
    // AABB diagonal, elevation, and field of view.
    double oblique_distance_factor = 1.2;
    double oblique_elevation_deg = 45.0;
    double oblique_vfov_deg = 60.0;
    double bev_extent_factor = 1.05;
};

/// Camera plan for one scene: a top-down orthographic view over the
/// centroid plus four oblique perspective views offset along the cardinal
/// directions (front = -y side), in the order [bev, front, left, right,
/// back]. Throws on a degenerate (zero-footprint) AABB.
std::vector<std::pair<ViewId, CameraSpec>> plan_cameras(const Aabb3& scene_aabb,
                                                        const RenderConfig& config = {});

struct ProjectedPoint {
    double px = 0.0;  // continuous pixel coordinates, origin top-left
    double py = 0.0;
    double depth = 0.0;  // distance along the view axis
};

/// Projects a world point into pixel coordinates, or nothing when the
/// point is behind the camera or outside the image.
std::optional<ProjectedPoint> project_point(const CameraSpec& camera, const Point3& p,
                                            int width, int height);

/// Splats every point as a filled disc; nearest depth wins per pixel, ties
/// keep the earlier point. White background.
RenderedView render_view(const Scene& scene, ViewId view_id, const CameraSpec& camera,
                         const RenderConfig& config = {});

std::vector<RenderedView> render_scene(const Scene& scene,
                                       const RenderConfig& config = {});

}  // namespace s2p
