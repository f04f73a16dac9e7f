#pragma once

#include <cstdlib>
#include <iostream>
#include <sstream>

namespace kyleq {

// Verbosity from the KYLE_EQ_LOG environment variable: unset or 0 is silent,
// 1 prints progress, 2 adds per-iteration detail. Messages go to stderr so
// they never contaminate data written to stdout.
inline int log_level() {
    static const int level = [] {
        const char* v = std::getenv("KYLE_EQ_LOG");
        if (!v) return 0;
        return std::atoi(v);
    }();
    return level;
}

template <typename... Args>
inline void log(int level, const Args&... args) {
    if (log_level() < level) return;
    std::ostringstream os;
    (os << ... << args);
    std::cerr << "[kyleq] " << os.str() << "\n";
}

}  // namespace kyleq
