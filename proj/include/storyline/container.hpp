#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "storyline/error.hpp"
#include "storyline/util.hpp"

namespace storyline {

/// Shared envelope for persisted models: a JSON document tagged with format,
/// version, model kind and the feature-layout hash it was trained against.
inline constexpr int kModelContainerVersion = 1;

inline nlohmann::json make_container(const std::string& kind, const std::string& layout_hash) {
    return {{"format", "storyline-model"},
            {"version", kModelContainerVersion},
            {"kind", kind},
            {"layout_hash", layout_hash}};
}

inline nlohmann::json read_container(const std::filesystem::path& path, const std::string& kind) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::Parse, path.string() + ": malformed model container: " + e.what());
    }
    if (!j.is_object() || j.value("format", "") != "storyline-model") {
        throw Error(ErrorCode::Parse, path.string() + ": not a model container");
    }
    if (!j.contains("version") || j.at("version") != kModelContainerVersion) {
        throw Error(ErrorCode::VersionMismatch, path.string() + ": unsupported model container version " +
                                                    (j.contains("version") ? j.at("version").dump() : "<none>") +
                                                    " (expected " + std::to_string(kModelContainerVersion) + ")");
    }
    if (j.value("kind", "") != kind) {
        throw Error(ErrorCode::Parse, path.string() + ": expected a '" + kind + "' model, found '" +
                                          j.value("kind", "") + "'");
    }
    return j;
}

inline void check_layout(const nlohmann::json& container, const std::string& expected,
                         const std::string& what) {
    const auto found = container.value("layout_hash", "");
    if (found != expected) {
        throw Error(ErrorCode::LayoutMismatch,
                    what + ": feature layout hash " + found + " does not match expected " + expected);
    }
}

}  // namespace storyline
