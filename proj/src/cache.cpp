#include "raglen/cache.hpp"

#include <atomic>
#include <fstream>
#include <sstream>
#include <system_error>

namespace raglen {

namespace fs = std::filesystem;

DiskCache::DiskCache(fs::path root) : root_(std::move(root)) {
    std::error_code ec;
    fs::create_directories(root_, ec);
}

std::optional<std::string> DiskCache::get(const std::string& key) const {
    std::ifstream in(root_ / key, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) return std::nullopt;
    return buf.str();
}

bool DiskCache::contains(const std::string& key) const {
    std::error_code ec;
    return fs::is_regular_file(root_ / key, ec);
}

void DiskCache::put(const std::string& key, const std::string& value) {
    static std::atomic<unsigned long long> counter{0};
    const fs::path target = root_ / key;
    std::lock_guard<std::mutex> lock(write_mutex_);
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
    const fs::path tmp = target.string() + ".tmp" + std::to_string(counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(value.data(), static_cast<std::streamsize>(value.size()));
        if (!out) {
            fs::remove(tmp, ec);
            return;
        }
    }
    fs::rename(tmp, target, ec);
    if (ec) fs::remove(tmp, ec);
}

}  // namespace raglen
