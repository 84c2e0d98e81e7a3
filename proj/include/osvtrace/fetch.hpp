#pragma once

// Downloader for OSV ecosystem dumps. Each ecosystem's all.zip is fetched
// from the public bucket and pinned in a manifest (url, byte size, sha256)
// so a study can state exactly which snapshot it analyzed. Archives are
// never unpacked here.

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include <nlohmann/json.hpp>

#include "httplib.h"

#include "osvtrace/errors.hpp"

namespace osvtrace {

inline constexpr const char* kOsvBucketUrl = "https://osv-vulnerabilities.storage.googleapis.com";

struct FetchEntry {
    std::string ecosystem;
    std::string url;
    std::string path;   // local file, empty on failure
    std::uint64_t bytes = 0;
    std::string sha256; // lowercase hex, empty on failure
    bool ok = false;
    std::string error;  // set when !ok
};

struct FetchManifest {
    std::vector<FetchEntry> entries;

    bool all_failed() const {
        if (entries.empty()) return false;
        for (const FetchEntry& e : entries) {
            if (e.ok) return false;
        }
        return true;
    }
};

struct ProxySetting {
    std::string host;
    int port = 0;
};

/// Proxy from the conventional environment variables, if any. Accepts
/// `http://host:port` (trailing slash tolerated) or bare `host:port`.
inline std::optional<ProxySetting> proxy_from_env() {
    const char* raw = nullptr;
    for (const char* name : {"HTTPS_PROXY", "https_proxy", "HTTP_PROXY", "http_proxy"}) {
        raw = std::getenv(name);
        if (raw && *raw) break;
        raw = nullptr;
    }
    if (!raw) return std::nullopt;

    std::string value(raw);
    if (const auto scheme = value.find("://"); scheme != std::string::npos) {
        value = value.substr(scheme + 3);
    }
    while (!value.empty() && value.back() == '/') value.pop_back();
    const auto colon = value.rfind(':');
    if (colon == std::string::npos || colon + 1 >= value.size()) return std::nullopt;
    try {
        return ProxySetting{value.substr(0, colon), std::stoi(value.substr(colon + 1))};
    } catch (const std::exception&) {
        return std::nullopt;
    }
}

namespace detail {

inline std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

} // namespace detail

/// Download each ecosystem's all.zip into dest/<ecosystem>/all.zip and write
/// dest/manifest.json. HTTP failures are recorded per ecosystem and the rest
/// proceed; an empty ecosystem list yields an empty manifest.
inline FetchManifest fetch_dumps(const std::vector<std::string>& ecosystems,
                                 const std::filesystem::path& dest,
                                 const std::string& base_url = kOsvBucketUrl) {
    namespace fs = std::filesystem;
    fs::create_directories(dest);

    FetchManifest manifest;
    httplib::Client client(base_url);
    client.set_follow_location(true);
    client.set_connection_timeout(30);
    client.set_read_timeout(120);
    if (const auto proxy = proxy_from_env()) {
        client.set_proxy(proxy->host, proxy->port);
    }

    for (const std::string& eco : ecosystems) {
        FetchEntry entry;
        entry.ecosystem = eco;
        entry.url = base_url + "/" + eco + "/all.zip";

        const httplib::Result res = client.Get("/" + eco + "/all.zip");
        if (!res) {
            entry.error = "transport error: " + httplib::to_string(res.error());
        } else if (res->status != 200) {
            entry.error = "HTTP " + std::to_string(res->status);
        } else {
            const fs::path dir = dest / eco;
            fs::create_directories(dir);
            const fs::path file = dir / "all.zip";
            std::ofstream out(file, std::ios::binary | std::ios::trunc);
            if (!out) throw IoError("cannot write " + file.string());
            out.write(res->body.data(), static_cast<std::streamsize>(res->body.size()));
            out.close();
            entry.path = file.string();
            entry.bytes = res->body.size();
            entry.sha256 = detail::sha256_hex(res->body);
            entry.ok = true;
        }
        manifest.entries.push_back(std::move(entry));
    }

    nlohmann::json doc;
    doc["entries"] = nlohmann::json::array();
    for (const FetchEntry& e : manifest.entries) {
        nlohmann::json j;
        j["ecosystem"] = e.ecosystem;
        j["url"] = e.url;
        j["ok"] = e.ok;
        if (e.ok) {
            j["path"] = e.path;
            j["bytes"] = e.bytes;
            j["sha256"] = e.sha256;
        } else {
            j["error"] = e.error;
        }
        doc["entries"].push_back(std::move(j));
    }
    std::ofstream out(dest / "manifest.json", std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + (dest / "manifest.json").string());
    out << doc.dump(2) << '\n';
    return manifest;
}

} // namespace osvtrace
