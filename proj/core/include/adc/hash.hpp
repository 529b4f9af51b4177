#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

namespace adc {

/// FNV-1a, 64-bit. Stable across platforms; used for config hashes and for
/// verifying that two evaluation runs consumed byte-identical inputs.
class Fnv1a64 {
public:
    Fnv1a64& update(const void* data, std::size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < n; ++i) {
            hash_ ^= p[i];
            hash_ *= 0x100000001b3ull;
        }
        return *this;
    }

    Fnv1a64& update(const std::string& s) { return update(s.data(), s.size()); }

    template <typename T>
    Fnv1a64& update_pod(const T& v) {
        return update(&v, sizeof(T));
    }

    std::uint64_t digest() const { return hash_; }

    std::string hex() const {
        static const char* k = "0123456789abcdef";
        std::string out(16, '0');
        std::uint64_t h = hash_;
        for (int i = 15; i >= 0; --i) {
            out[static_cast<std::size_t>(i)] = k[h & 0xf];
            h >>= 4;
        }
        return out;
    }

private:
    std::uint64_t hash_ = 0xcbf29ce484222325ull;
};

inline std::uint64_t fnv1a64(const void* data, std::size_t n) {
    return Fnv1a64().update(data, n).digest();
}

inline std::uint64_t fnv1a64(const std::string& s) { return fnv1a64(s.data(), s.size()); }

}  // namespace adc
