#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace openrc {

/// Shortest decimal form that round-trips the exact double. All emitted
/// traces use this, so identical runs produce byte-identical files.
std::string format_double(double v);

std::uint64_t fnv1a(std::string_view s);

} // namespace openrc
