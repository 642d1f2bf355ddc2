#pragma once

#include <string>

namespace pcf {

/// Scientific notation with 17 significant digits; "inf", "-inf", "nan" for non-finite values.
std::string csv_number(double x);

} // namespace pcf
