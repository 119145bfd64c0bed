#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

namespace icebench {

using json = nlohmann::json;

json load_json_file(const std::filesystem::path& path);
void save_json_file(const json& j, const std::filesystem::path& path, int indent = 2);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& text);

void read_bytes_exact(const std::filesystem::path& path, void* dst, size_t n,
                      const std::string& field);
void write_bytes(const std::filesystem::path& path, const void* src, size_t n);
size_t file_size_of(const std::filesystem::path& path, const std::string& field);

}  // namespace icebench
