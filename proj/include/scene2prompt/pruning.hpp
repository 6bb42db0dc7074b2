#pragma once

#include <cstddef>
#include <map>
#include <vector>

#include "scene2prompt/geometry.hpp"

namespace s2p {

enum class VoteWeighting { Count, Confidence };

struct PruneConfig {
    double iou_threshold = 0.5;  // in (0,1]
    VoteWeighting vote_weighting = VoteWeighting::Confidence;
};

struct NmsResult {
    std::vector<ObjectProposal> kept;
    // kept index -> proposals suppressed by that kept box, in suppression order
    std::map<std::size_t, std::vector<ObjectProposal>> clusters;
};

/// Greedy NMS by descending confidence (ties by ascending input index).
/// A candidate is suppressed by the first kept box whose IoU with it
/// exceeds the threshold; no two kept boxes overlap above the threshold.
NmsResult nms_prune(const std::vector<ObjectProposal>& proposals,
                    const PruneConfig& config);

/// Relabels each kept proposal with the weighted modal class over itself
/// plus its cluster. Weights are confidences, or 1 each under count mode.
/// Ties go to the kept proposal's own class when it is among the leaders,
/// otherwise to the leader seen earliest in {kept, cluster...} order.
std::vector<ObjectProposal> majority_relabel(const NmsResult& nms,
                                             const PruneConfig& config);

/// nms_prune followed by majority_relabel.
std::vector<ObjectProposal> prune_proposals(const std::vector<ObjectProposal>& proposals,
                                            const PruneConfig& config);

}  // namespace s2p
