#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "scene2prompt/describe.hpp"

namespace s2p {

/// Input ablation modes: multi-view images, coordinate text, coordinate +
/// clock-direction text, their combinations, the full hierarchical
/// variant, and the zero-shot twin of CDT_MV (identical prompt, untrained
/// endpoint).
enum class AblationMode { MV, CT, CDT, CDT_MV, CDT_MV_HR, ZS_CDT_MV };

std::string ablation_mode_name(AblationMode mode);
AblationMode ablation_mode_from_name(const std::string& name);

bool mode_has_images(AblationMode mode);
bool mode_has_hierarchy(AblationMode mode);
bool mode_has_scene_text(AblationMode mode);
/// CDT variants need an agent situation to compute clock bearings.
bool mode_needs_situation(AblationMode mode);

struct PromptSegment {
    enum class Kind { ImageRef, SpecialToken, Text };
    Kind kind = Kind::Text;
    std::string value;  // path, token literal, or text
};

struct PromptBundle {
    std::string scene_id;
    AblationMode mode = AblationMode::CT;
    std::string system_text;
    std::vector<PromptSegment> user_segments;
    std::string question;
    std::optional<std::string> situation;
};

struct PromptOptions {
    // The reference template shows four view placeholders next to five
    // images; default emits one per view.
    bool four_view_placeholders = false;
    // Embed PNG bytes into dumped bundle JSONs instead of path refs only.
    bool inline_bundle_images = false;
};

/// Assembles the chat prompt for one (scene, question) pair. image_paths
/// must have exactly five entries for image modes and is ignored
/// otherwise. description is the scene text for the mode (CT or CDT form)
/// and is ignored for MV. Throws on mode/input mismatches.
PromptBundle assemble_prompt(const std::string& scene_id, const std::string& question,
                             AblationMode mode,
                             const std::optional<std::string>& situation_text,
                             const std::string& description,
                             const std::vector<std::string>& image_paths,
                             const PromptOptions& options = {});

struct WireConfig {
    std::string model = "qwen-vl";
    int max_answer_tokens = 16;
    bool inline_images = false;            // base64 data URLs instead of file refs
    std::size_t max_image_bytes = 16 * 1024 * 1024;
};

/// Chat-completions request body, serialized with sorted keys so identical
/// bundles produce identical bytes. temperature is pinned to 0.
std::string render_chat_request(const PromptBundle& bundle, const WireConfig& config);

/// Coarse budget estimate: 1.3 tokens per word of text, 500 per image,
/// one per special token. Informational only.
int estimate_tokens(const PromptBundle& bundle);

/// With inline_images, each image segment also carries its PNG bytes as
/// base64 so the dump is self-contained.
nlohmann::json bundle_to_json(const PromptBundle& bundle, bool inline_images = false);
PromptBundle bundle_from_json(const nlohmann::json& doc);

}  // namespace s2p
