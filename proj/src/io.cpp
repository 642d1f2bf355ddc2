#include "pcf/io.hpp"

#include <cmath>
#include <cstdio>

namespace pcf {

std::string csv_number(double x) {
    if (std::isnan(x)) return "nan";
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.16e", x);
    return buf;
}

} // namespace pcf
