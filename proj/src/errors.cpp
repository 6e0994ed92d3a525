#include "raglen/errors.hpp"

#include <iostream>
#include <mutex>

namespace raglen {

void log_warn(const std::string& msg) {
    static std::mutex mu;
    std::lock_guard<std::mutex> lock(mu);
    std::cerr << "[raglen] warning: " << msg << "\n";
}

}  // namespace raglen
