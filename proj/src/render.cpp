#include "scene2prompt/render.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace s2p {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

struct CameraBasis {
    Point3 forward;
    Point3 right;
    Point3 up;
};

CameraBasis camera_basis(const CameraSpec& camera) {
    const Point3 delta = camera.look_at - camera.position;
    if (delta.norm() == 0.0) {
        throw std::invalid_argument("camera position equals look_at");
    }
    const Point3 forward = delta.normalized();
    const Point3 cross = forward.cross(camera.up);
    if (cross.norm() < 1e-12) {
        throw std::invalid_argument("camera up is parallel to the view direction");
    }
    const Point3 right = cross.normalized();
    return {forward, right, right.cross(forward)};
}

}  // namespace

std::string view_id_name(ViewId id) {
    switch (id) {
        case ViewId::Bev: return "bev";
        case ViewId::Front: return "front";
        case ViewId::Left: return "left";
        case ViewId::Right: return "right";
        case ViewId::Back: return "back";
    }
    return "unknown";
}

std::vector<std::pair<ViewId, CameraSpec>> plan_cameras(const Aabb3& scene_aabb,
                                                        const RenderConfig& config) {
    if (!scene_aabb.valid()) {
        throw std::invalid_argument("invalid scene AABB");
    }
    const Point3 ext = scene_aabb.extent();
    if (ext.x <= 0.0 && ext.y <= 0.0) {
        throw std::invalid_argument("degenerate scene AABB: zero footprint");
    }
    const Point3 centroid = bbox_center(scene_aabb);
    const double diag = scene_aabb.diagonal();

    std::vector<std::pair<ViewId, CameraSpec>> cameras;

    CameraSpec bev;
    bev.kind = CameraKind::OrthographicTopdown;
    bev.position = centroid + Point3{0.0, 0.0, std::max(diag, 1e-3)};
    bev.look_at = centroid;
    bev.up = {0.0, 1.0, 0.0};  // +y is up in the plan view
    bev.ortho_extent = std::max(ext.x, ext.y) * config.bev_extent_factor;
    cameras.emplace_back(ViewId::Bev, bev);

    // front camera sits on the -y side of the scene looking back at it
    const std::array<std::pair<ViewId, Point3>, 4> cardinals{{
        {ViewId::Front, {0.0, -1.0, 0.0}},
        {ViewId::Left, {-1.0, 0.0, 0.0}},
        {ViewId::Right, {1.0, 0.0, 0.0}},
        {ViewId::Back, {0.0, 1.0, 0.0}},
    }};
    const double dist = config.oblique_distance_factor * diag;
    const double elev = config.oblique_elevation_deg * kDegToRad;
    for (const auto& [id, dir] : cardinals) {
        CameraSpec cam;
        cam.kind = CameraKind::PerspectiveOblique;
        cam.position = centroid + dir * (dist * std::cos(elev)) +
                       Point3{0.0, 0.0, dist * std::sin(elev)};
        cam.look_at = centroid;
        cam.up = {0.0, 0.0, 1.0};
        cam.vfov_deg = config.oblique_vfov_deg;
        cameras.emplace_back(id, cam);
    }
    return cameras;
}

std::optional<ProjectedPoint> project_point(const CameraSpec& camera, const Point3& p,
                                            int width, int height) {
    const CameraBasis basis = camera_basis(camera);
    const Point3 d = p - camera.position;
    const double xc = d.dot(basis.right);
    const double yc = d.dot(basis.up);
    const double zc = d.dot(basis.forward);

    double px = 0.0;
    double py = 0.0;
    if (camera.kind == CameraKind::OrthographicTopdown) {
        if (zc < 0.0) {
            return std::nullopt;
        }
        const double extent_x = camera.ortho_extent;
        const double extent_y = camera.ortho_extent * double(height) / double(width);
        px = (xc / extent_x + 0.5) * width;
        py = (0.5 - yc / extent_y) * height;
    } else {
        if (zc <= 1e-9) {
            return std::nullopt;  // behind the camera
        }
        const double tan_v = std::tan(camera.vfov_deg * 0.5 * kDegToRad);
        const double tan_h = tan_v * double(width) / double(height);
        px = (0.5 + 0.5 * xc / (zc * tan_h)) * width;
        py = (0.5 - 0.5 * yc / (zc * tan_v)) * height;
    }
    if (px < 0.0 || px >= double(width) || py < 0.0 || py >= double(height)) {
        return std::nullopt;
    }
    return ProjectedPoint{px, py, zc};
}

RenderedView render_view(const Scene& scene, ViewId view_id, const CameraSpec& camera,
                         const RenderConfig& config) {
    if (config.width <= 0 || config.height <= 0) {
        throw std::invalid_argument("zero-size image");
    }
    if (scene.points.empty()) {
        throw std::invalid_argument("scene '" + scene.scene_id +
                                    "' has no points to render");
    }
    RenderedView view;
    view.view_id = view_id;
    view.camera = camera;
    view.image = ImageRgb(config.width, config.height);
    view.depth.assign(std::size_t(config.width) * config.height,
                      std::numeric_limits<double>::infinity());

    const int r = config.splat_radius;
    for (const auto& cp : scene.points) {
        const auto proj = project_point(camera, cp.position, config.width, config.height);
        if (!proj) {
            continue;
        }
        const int cx = int(std::lround(proj->px));
        const int cy = int(std::lround(proj->py));
        for (int dy = -r; dy <= r; ++dy) {
            for (int dx = -r; dx <= r; ++dx) {
                if (dx * dx + dy * dy > r * r) {
                    continue;
                }
                const int x = cx + dx;
                const int y = cy + dy;
                if (!view.image.in_bounds(x, y)) {
                    continue;
                }
                const std::size_t idx = std::size_t(y) * config.width + x;
                if (proj->depth < view.depth[idx]) {
                    view.depth[idx] = proj->depth;
                    view.image.set(x, y, cp.rgb);
                }
            }
        }
    }
    return view;
}

std::vector<RenderedView> render_scene(const Scene& scene, const RenderConfig& config) {
    const auto cameras = plan_cameras(scene.points_aabb(), config);
    std::vector<RenderedView> views;
    views.reserve(cameras.size());
    for (const auto& [id, cam] : cameras) {
        views.push_back(render_view(scene, id, cam, config));
    }
    return views;
}

}  // namespace s2p
