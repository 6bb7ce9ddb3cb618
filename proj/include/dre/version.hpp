#ifndef DRE_VERSION_HPP
#define DRE_VERSION_HPP

namespace dre {

inline constexpr const char* kVersion = "0.1.0";

}

#endif
