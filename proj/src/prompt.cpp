#include "scene2prompt/prompt.hpp"

#include <cmath>
#include <stdexcept>

#include "scene2prompt/util.hpp"

namespace s2p {

namespace {

using nlohmann::json;

// Reproduced verbatim from the reference template, grammar included.
constexpr const char* kSystemText =
    "You are a assistant that can understand a scene, you will be provided with "
    "images of top-down views of the scene,view representations and scene "
    "representation, a situation and coordinates[x,y,z] of objects of the scene. "
    "Answer the question using a single word or phrase";

}  // namespace

std::string ablation_mode_name(AblationMode mode) {
    switch (mode) {
        case AblationMode::MV: return "MV";
        case AblationMode::CT: return "CT";
        case AblationMode::CDT: return "CDT";
        case AblationMode::CDT_MV: return "CDT_MV";
        case AblationMode::CDT_MV_HR: return "CDT_MV_HR";
        case AblationMode::ZS_CDT_MV: return "ZS_CDT_MV";
    }
    return "unknown";
}

AblationMode ablation_mode_from_name(const std::string& name) {
    const std::string n = to_lower(name);
    if (n == "mv") return AblationMode::MV;
    if (n == "ct") return AblationMode::CT;
    if (n == "cdt") return AblationMode::CDT;
    if (n == "cdt_mv") return AblationMode::CDT_MV;
    if (n == "cdt_mv_hr") return AblationMode::CDT_MV_HR;
    if (n == "zs_cdt_mv") return AblationMode::ZS_CDT_MV;
    throw std::invalid_argument("unknown ablation mode: " + name);
}

bool mode_has_images(AblationMode mode) {
    return mode == AblationMode::MV || mode == AblationMode::CDT_MV ||
           mode == AblationMode::CDT_MV_HR || mode == AblationMode::ZS_CDT_MV;
}

bool mode_has_hierarchy(AblationMode mode) { return mode == AblationMode::CDT_MV_HR; }

bool mode_has_scene_text(AblationMode mode) { return mode != AblationMode::MV; }

bool mode_needs_situation(AblationMode mode) {
    return mode == AblationMode::CDT || mode == AblationMode::CDT_MV ||
           mode == AblationMode::CDT_MV_HR || mode == AblationMode::ZS_CDT_MV;
}

PromptBundle assemble_prompt(const std::string& scene_id, const std::string& question,
                             AblationMode mode,
                             const std::optional<std::string>& situation_text,
                             const std::string& description,
                             const std::vector<std::string>& image_paths,
                             const PromptOptions& options) {
    if (question.empty()) {
        throw std::invalid_argument("question must be nonempty");
    }
    if (mode_has_images(mode) && image_paths.size() != 5) {
        throw std::invalid_argument(ablation_mode_name(mode) + " needs 5 views, got " +
                                    std::to_string(image_paths.size()));
    }
    if (mode_needs_situation(mode) && !situation_text.has_value()) {
        throw std::invalid_argument(ablation_mode_name(mode) +
                                    " needs an agent situation");
    }
    if (mode_has_scene_text(mode) && description.empty()) {
        throw std::invalid_argument(ablation_mode_name(mode) +
                                    " needs a scene description");
    }

    PromptBundle bundle;
    bundle.scene_id = scene_id;
    bundle.mode = mode;
    bundle.system_text = kSystemText;
    bundle.question = question;
    bundle.situation = situation_text;

    auto& seg = bundle.user_segments;
    const bool hr = mode_has_hierarchy(mode);
    if (hr) {
        seg.push_back({PromptSegment::Kind::SpecialToken, "<|vision_start|>"});
    }
    if (mode_has_images(mode)) {
        for (const auto& path : image_paths) {
            seg.push_back({PromptSegment::Kind::ImageRef, path});
        }
    }
    if (hr) {
        const int view_count = options.four_view_placeholders ? 4 : 5;
        for (int i = 0; i < view_count; ++i) {
            seg.push_back({PromptSegment::Kind::SpecialToken, "<|view_start|>"});
            seg.push_back({PromptSegment::Kind::SpecialToken, "<view>"});
            seg.push_back({PromptSegment::Kind::SpecialToken, "<|view_end|>"});
        }
        seg.push_back({PromptSegment::Kind::SpecialToken, "<|scene_start|>"});
        seg.push_back({PromptSegment::Kind::SpecialToken, "<scene>"});
        seg.push_back({PromptSegment::Kind::SpecialToken, "<|scene_end|>"});
        seg.push_back({PromptSegment::Kind::SpecialToken, "<|vision_end|>"});
    }
    if (situation_text.has_value()) {
        seg.push_back({PromptSegment::Kind::Text, "Situation: " + *situation_text});
    }
    if (mode_has_scene_text(mode)) {
        seg.push_back({PromptSegment::Kind::Text, description});
    }
    seg.push_back({PromptSegment::Kind::Text, "Question: " + question});
    return bundle;
}

std::string render_chat_request(const PromptBundle& bundle, const WireConfig& config) {
    json user_content = json::array();
    std::string text_buffer;
    auto flush_text = [&]() {
        if (!text_buffer.empty()) {
            user_content.push_back({{"type", "text"}, {"text", text_buffer}});
            text_buffer.clear();
        }
    };
    for (const auto& seg : bundle.user_segments) {
        switch (seg.kind) {
            case PromptSegment::Kind::ImageRef: {
                flush_text();
                std::string url;
                if (config.inline_images) {
                    const std::string bytes = read_file(seg.value);
                    if (bytes.size() > config.max_image_bytes) {
                        throw std::runtime_error(
                            "image payload " + seg.value + " is " +
                            std::to_string(bytes.size()) + " bytes, limit " +
                            std::to_string(config.max_image_bytes));
                    }
                    url = "data:image/png;base64," +
                          base64_encode(bytes.data(), bytes.size());
                } else {
                    url = "file://" + seg.value;
                }
                user_content.push_back(
                    {{"type", "image_url"}, {"image_url", {{"url", url}}}});
                break;
            }
            case PromptSegment::Kind::SpecialToken:
                text_buffer += seg.value;
                break;
            case PromptSegment::Kind::Text:
                if (!text_buffer.empty()) {
                    text_buffer += "\n";
                }
                text_buffer += seg.value;
                break;
        }
    }
    flush_text();

    json body;
    body["model"] = config.model;
    body["temperature"] = 0;
    body["max_tokens"] = config.max_answer_tokens;
    body["messages"] = json::array({
        json{{"role", "system"}, {"content", bundle.system_text}},
        json{{"role", "user"}, {"content", user_content}},
    });
    return body.dump();
}

int estimate_tokens(const PromptBundle& bundle) {
    std::size_t words = split_ws(bundle.system_text).size();
    int images = 0;
    int specials = 0;
    for (const auto& seg : bundle.user_segments) {
        switch (seg.kind) {
            case PromptSegment::Kind::ImageRef: ++images; break;
            case PromptSegment::Kind::SpecialToken: ++specials; break;
            case PromptSegment::Kind::Text: words += split_ws(seg.value).size(); break;
        }
    }
    return int(std::lround(double(words) * 1.3)) + 500 * images + specials;
}

nlohmann::json bundle_to_json(const PromptBundle& bundle, bool inline_images) {
    json doc;
    doc["scene_id"] = bundle.scene_id;
    doc["mode"] = ablation_mode_name(bundle.mode);
    doc["system"] = bundle.system_text;
    doc["question"] = bundle.question;
    if (bundle.situation.has_value()) {
        doc["situation"] = *bundle.situation;
    }
    doc["segments"] = json::array();
    for (const auto& seg : bundle.user_segments) {
        switch (seg.kind) {
            case PromptSegment::Kind::ImageRef: {
                json part = {{"type", "image"}, {"path", seg.value}};
                if (inline_images) {
                    const std::string bytes = read_file(seg.value);
                    part["b64"] = base64_encode(bytes.data(), bytes.size());
                }
                doc["segments"].push_back(std::move(part));
                break;
            }
            case PromptSegment::Kind::SpecialToken:
                doc["segments"].push_back({{"type", "special"}, {"token", seg.value}});
                break;
            case PromptSegment::Kind::Text:
                doc["segments"].push_back({{"type", "text"}, {"text", seg.value}});
                break;
        }
    }
    return doc;
}

PromptBundle bundle_from_json(const nlohmann::json& doc) {
    PromptBundle bundle;
    bundle.scene_id = doc.at("scene_id").get<std::string>();
    bundle.mode = ablation_mode_from_name(doc.at("mode").get<std::string>());
    bundle.system_text = doc.at("system").get<std::string>();
    bundle.question = doc.at("question").get<std::string>();
    if (doc.contains("situation")) {
        bundle.situation = doc["situation"].get<std::string>();
    }
    for (const auto& seg : doc.at("segments")) {
        const std::string type = seg.at("type").get<std::string>();
        if (type == "image") {
            bundle.user_segments.push_back(
                {PromptSegment::Kind::ImageRef, seg.at("path").get<std::string>()});
        } else if (type == "special") {
            bundle.user_segments.push_back(
                {PromptSegment::Kind::SpecialToken, seg.at("token").get<std::string>()});
        } else if (type == "text") {
            bundle.user_segments.push_back(
                {PromptSegment::Kind::Text, seg.at("text").get<std::string>()});
        } else {
            throw std::invalid_argument("unknown segment type: " + type);
        }
    }
    return bundle;
}

}  // namespace s2p
