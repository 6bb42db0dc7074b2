#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "scene2prompt/geometry.hpp"

namespace s2p {

/// Raised by loaders on malformed input; the message carries the byte
/// offset or field that failed.
class ParseError : public std::runtime_error {
public:
    explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

// --- point clouds ------------------------------------------------------

/// PLY subset: element "vertex" with float x/y/z, optional uchar
/// red/green/blue (mid-gray when absent). ASCII and binary_little_endian.
/// Extra scalar vertex properties are skipped; list properties are
/// rejected. One entry per vertex, in file order.
std::vector<ColoredPoint> load_point_cloud(const std::filesystem::path& path);

void save_point_cloud_ply(const std::filesystem::path& path,
                          const std::vector<ColoredPoint>& points,
                          bool binary = true);

// --- object proposals ---------------------------------------------------

struct ProposalFileOptions {
    double min_confidence = 0.0;  // gate applied before anything else; 0 keeps all
};

struct ProposalFile {
    std::string scene_id;
    std::vector<ObjectProposal> proposals;
};

/// proposals.json: {"scene_id": ..., "proposals": [{"label", "box_min",
/// "box_max", "confidence"?}]}. Labels are normalized to lowercase;
/// confidence defaults to 1.0. See docs/proposals_schema.md.
ProposalFile load_proposals(const std::filesystem::path& path,
                            const ProposalFileOptions& opts = {});

void save_proposals(const std::filesystem::path& path, const ProposalFile& file);

// --- agent situation ----------------------------------------------------

/// situation.json: {"position": [x,y,z], "yaw": rad | "rotation_wxyz":
/// [w,x,y,z], "description": ...}. Quaternions are converted to yaw.
AgentSituation load_situation(const std::filesystem::path& path);

// --- precomputed patch features ------------------------------------------

/// .hvf binary: 16-byte header (magic "HVF1", u32 view_count, u32
/// patches_per_view, u32 dim, little-endian) followed by view_count *
/// patches_per_view * dim little-endian float32 values.
struct PatchFeatures {
    std::uint32_t view_count = 0;
    std::uint32_t patches_per_view = 0;
    std::uint32_t dim = 0;
    std::vector<Eigen::MatrixXd> views;  // each patches_per_view x dim
};

PatchFeatures load_patch_features(const std::filesystem::path& path);

void save_patch_features(const std::filesystem::path& path, const PatchFeatures& features);

}  // namespace s2p
