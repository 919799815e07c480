#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "evobt/chromosome.hpp"
#include "evobt/errors.hpp"
#include "evobt/node_library.hpp"

namespace evobt {

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path.string() + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path.string() + "'");
    out << text;
}

inline nlohmann::json read_json_file(const std::filesystem::path& path) {
    try {
        return nlohmann::json::parse(read_text_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

inline NodeLibrary load_library(const std::filesystem::path& path) { return library_from_json(read_json_file(path)); }

inline Chromosome load_tree(const std::filesystem::path& path) { return deserialize(read_text_file(path)); }

inline void save_tree(const std::filesystem::path& path, const Chromosome& c) { write_text_file(path, serialize(c)); }

}  // namespace evobt
