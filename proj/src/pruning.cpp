#include "scene2prompt/pruning.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace s2p {

NmsResult nms_prune(const std::vector<ObjectProposal>& proposals,
                    const PruneConfig& config) {
    if (!(config.iou_threshold > 0.0 && config.iou_threshold <= 1.0)) {
        throw std::invalid_argument("iou_threshold must be in (0,1]");
    }
    std::vector<std::size_t> order(proposals.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return proposals[a].confidence > proposals[b].confidence;
    });

    NmsResult result;
    for (std::size_t idx : order) {
        const auto& cand = proposals[idx];
        bool suppressed = false;
        for (std::size_t k = 0; k < result.kept.size(); ++k) {
            if (aabb_iou(cand.box, result.kept[k].box) > config.iou_threshold) {
                result.clusters[k].push_back(cand);
                suppressed = true;
                break;
            }
        }
        if (!suppressed) {
            result.kept.push_back(cand);
        }
    }
    return result;
}

std::vector<ObjectProposal> majority_relabel(const NmsResult& nms,
                                             const PruneConfig& config) {
    std::vector<ObjectProposal> out;
    out.reserve(nms.kept.size());
    for (std::size_t k = 0; k < nms.kept.size(); ++k) {
        ObjectProposal relabeled = nms.kept[k];

        // Tally in first-seen order so the earliest leader wins on a
        // non-kept tie.
        std::vector<std::pair<std::string, double>> votes;
        auto add_vote = [&](const ObjectProposal& p) {
            const double w =
                config.vote_weighting == VoteWeighting::Count ? 1.0 : p.confidence;
            for (auto& [label, weight] : votes) {
                if (label == p.class_label) {
                    weight += w;
                    return;
                }
            }
            votes.emplace_back(p.class_label, w);
        };
        add_vote(nms.kept[k]);
        if (auto it = nms.clusters.find(k); it != nms.clusters.end()) {
            for (const auto& s : it->second) {
                add_vote(s);
            }
        }

        double best = votes.front().second;
        std::string best_label = votes.front().first;
        for (const auto& [label, weight] : votes) {
            if (weight > best) {
                best = weight;
                best_label = label;
            }
        }
        // votes.front() is the kept proposal's class: an exact tie with the
        // leader keeps the original label.
        if (votes.front().second == best) {
            best_label = votes.front().first;
        }
        relabeled.class_label = best_label;
        out.push_back(std::move(relabeled));
    }
    return out;
}

std::vector<ObjectProposal> prune_proposals(const std::vector<ObjectProposal>& proposals,
                                            const PruneConfig& config) {
    return majority_relabel(nms_prune(proposals, config), config);
}

}  // namespace s2p
