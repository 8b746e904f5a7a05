#include "proplab/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "proplab/errors.hpp"
#include "proplab/rng.hpp"

namespace proplab {

std::string hash_hex(const std::string& bytes) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%016llx",
                  static_cast<unsigned long long>(fnv1a(bytes)));
    return buf;
}

std::string hash_file_hex(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw io_error("cannot open file for hashing: " + path);
    std::string bytes((std::istreambuf_iterator<char>(is)),
                      std::istreambuf_iterator<char>());
    return hash_hex(bytes);
}

void atomic_write_file(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary);
        if (!os) throw io_error("cannot write file: " + tmp);
        os << content;
        if (!os) throw io_error("write failed: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw io_error("cannot rename " + tmp + " to " + path);
}

void RunManifest::add_input(const std::string& path) {
    inputs.emplace_back(path, hash_file_hex(path));
}

void RunManifest::add_output(const std::string& path) {
    outputs.emplace_back(path, hash_file_hex(path));
}

void RunManifest::stamp_now() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    timestamp = buf;
}

std::string RunManifest::to_json_text() const {
    nlohmann::json j;
    j["tool_version"] = kToolVersion;
    j["command"] = command;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    nlohmann::json in = nlohmann::json::array();
    for (const auto& [path, hash] : inputs) {
        in.push_back({{"path", path}, {"hash", hash}});
    }
    nlohmann::json out = nlohmann::json::array();
    for (const auto& [path, hash] : outputs) {
        out.push_back({{"path", path}, {"hash", hash}});
    }
    j["inputs"] = in;
    j["outputs"] = out;
    j["timestamp"] = timestamp;
    return j.dump(2);
}

void RunManifest::write(const std::string& path) const {
    atomic_write_file(path, to_json_text() + "\n");
}

}  // namespace proplab
