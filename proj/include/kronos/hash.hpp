#pragma once

#include <cstdint>
#include <span>
#include <string_view>

namespace kronos {

// 64-bit FNV-1a. Used for output digests and log digests; stable across
// platforms because it only consumes bytes.
class Fnv64 {
public:
    static constexpr std::uint64_t kOffset = 0xcbf29ce484222325ULL;
    static constexpr std::uint64_t kPrime = 0x100000001b3ULL;

    void update(std::span<const std::uint8_t> bytes) {
        for (auto b : bytes) {
            state_ ^= b;
            state_ *= kPrime;
        }
    }
    void update(std::string_view text) {
        for (char c : text) {
            state_ ^= static_cast<std::uint8_t>(c);
            state_ *= kPrime;
        }
    }
    void update_u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            state_ ^= (v >> (8 * i)) & 0xFFu;
            state_ *= kPrime;
        }
    }
    void update_u64(std::uint64_t v) {
        update_u32(static_cast<std::uint32_t>(v));
        update_u32(static_cast<std::uint32_t>(v >> 32));
    }
    std::uint64_t value() const { return state_; }

private:
    std::uint64_t state_ = kOffset;
};

}  // namespace kronos
