#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace proplab {

inline constexpr const char* kToolVersion = "0.1.0";

std::string hash_hex(const std::string& bytes);
std::string hash_file_hex(const std::string& path);

// Write-to-temp-then-rename so partially written artifacts never land under
// their final names.
void atomic_write_file(const std::string& path, const std::string& content);

struct RunManifest {
    std::string command;
    std::string config_hash;
    std::uint64_t seed = 0;
    std::vector<std::pair<std::string, std::string>> inputs;   // path, hash
    std::vector<std::pair<std::string, std::string>> outputs;  // path, hash
    std::string timestamp;  // RFC3339 UTC

    void add_input(const std::string& path);
    void add_output(const std::string& path);
    void stamp_now();
    std::string to_json_text() const;
    void write(const std::string& path) const;
};

}  // namespace proplab
