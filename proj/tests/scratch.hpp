#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include <unistd.h>

namespace scratch {

/// Fresh per-process directory under the system temp dir.
inline std::filesystem::path dir(const std::string& name) {
    auto p = std::filesystem::temp_directory_path() / ("storyline-" + name + "-" + std::to_string(::getpid()));
    std::filesystem::remove_all(p);
    std::filesystem::create_directories(p);
    return p;
}

inline void write(const std::filesystem::path& p, const std::string& text) {
    std::ofstream(p, std::ios::binary) << text;
}

}  // namespace scratch
