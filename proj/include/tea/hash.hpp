#pragma once

#include <cstdint>
#include <cstring>
#include <string>

namespace tea {

// FNV-1a over raw bytes. Used for model fingerprints, not security.
class Fnv1a {
public:
    void update(const void* data, std::size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (std::size_t i = 0; i < len; ++i) {
            h_ ^= p[i];
            h_ *= 0x100000001B3ULL;
        }
    }

    void update_u64(std::uint64_t v) { update(&v, sizeof v); }

    void update_double(double v) {
        std::uint64_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        update_u64(bits);
    }

    void update_str(const std::string& s) {
        update_u64(s.size());
        update(s.data(), s.size());
    }

    std::uint64_t digest() const { return h_; }

    std::string hex() const {
        static const char* k = "0123456789abcdef";
        std::string out(16, '0');
        std::uint64_t v = h_;
        for (int i = 15; i >= 0; --i) {
            out[static_cast<std::size_t>(i)] = k[v & 0xF];
            v >>= 4;
        }
        return out;
    }

private:
    std::uint64_t h_ = 0xCBF29CE484222325ULL;
};

}  // namespace tea
