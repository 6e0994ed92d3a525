#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>

namespace raglen {

// Content-addressed file cache. Keys are relative paths under the cache root.
// Writes go through a temp file plus rename, so concurrent readers never see
// a partial entry; an unreadable entry is treated as a miss.
class DiskCache {
public:
    explicit DiskCache(std::filesystem::path root);

    std::optional<std::string> get(const std::string& key) const;
    void put(const std::string& key, const std::string& value);
    bool contains(const std::string& key) const;

    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path root_;
    mutable std::mutex write_mutex_;
};

}  // namespace raglen
