#include "kronos/kernel_image.hpp"

#include <algorithm>
#include <bit>

#include "kronos/hash.hpp"

namespace kronos {

const char* to_string(ObjectKind kind) {
    switch (kind) {
        case ObjectKind::scalar: return "scalar";
        case ObjectKind::handle: return "handle";
        case ObjectKind::list: return "list";
        case ObjectKind::list_item: return "list_item";
        case ObjectKind::tcb: return "tcb";
        case ObjectKind::queue: return "queue";
        case ObjectKind::name_string: return "name_string";
        case ObjectKind::stack: return "stack";
        case ObjectKind::timer: return "timer";
    }
    return "?";
}

KernelImage::KernelImage(std::uint32_t capacity) {
    if (capacity < 256 || !std::has_single_bit(capacity)) {
        throw ImageError(ImageErrc::image_overflow,
                         "image capacity must be a power of two >= 256, got " + std::to_string(capacity));
    }
    bytes_.assign(capacity, 0);
}

void KernelImage::check_range(std::uint32_t offset, std::uint32_t width) const {
    if (!in_range(offset, width)) {
        throw ImageError(ImageErrc::out_of_image, "access [" + std::to_string(offset) + ", +" +
                                                      std::to_string(width) + ") outside image");
    }
}

std::uint32_t KernelImage::read_field(std::uint32_t offset, std::uint32_t width) const {
    if (width != 1 && width != 2 && width != 4) {
        throw ImageError(ImageErrc::out_of_image, "unsupported field width " + std::to_string(width));
    }
    check_range(offset, width);
    std::uint32_t v = 0;
    for (std::uint32_t i = 0; i < width; ++i) {
        v |= std::uint32_t{bytes_[offset + i]} << (8 * i);
    }
    for (const auto& m : masks_) {
        if (m.offset >= offset && m.offset < offset + width) {
            const std::uint32_t bit = 8 * (m.offset - offset) + m.bit;
            v = m.value ? (v | (1u << bit)) : (v & ~(1u << bit));
        }
    }
    return v;
}

void KernelImage::write_field(std::uint32_t offset, std::uint32_t width, std::uint32_t value) {
    if (width != 1 && width != 2 && width != 4) {
        throw ImageError(ImageErrc::out_of_image, "unsupported field width " + std::to_string(width));
    }
    check_range(offset, width);
    for (std::uint32_t i = 0; i < width; ++i) {
        bytes_[offset + i] = static_cast<std::uint8_t>(value >> (8 * i));
    }
    if (!masks_.empty()) apply_masks(offset, width);
}

bool KernelImage::read_bit(std::uint32_t offset, unsigned bit) const {
    return ((read_field(offset, 1) >> bit) & 1u) != 0;
}

void KernelImage::apply_masks(std::uint32_t offset, std::uint32_t width) {
    for (const auto& m : masks_) {
        if (m.offset >= offset && m.offset < offset + width) {
            auto& b = bytes_[m.offset];
            const auto bit = static_cast<std::uint8_t>(1u << m.bit);
            b = m.value ? static_cast<std::uint8_t>(b | bit) : static_cast<std::uint8_t>(b & ~bit);
        }
    }
}

void KernelImage::flip_bit(std::uint32_t offset, unsigned bit) {
    check_range(offset, 1);
    if (bit > 7) throw ImageError(ImageErrc::out_of_image, "bit index " + std::to_string(bit) + " > 7");
    bytes_[offset] ^= static_cast<std::uint8_t>(1u << bit);
}

void KernelImage::install_stuck_mask(std::uint32_t offset, unsigned bit, unsigned value) {
    check_range(offset, 1);
    if (bit > 7) throw ImageError(ImageErrc::out_of_image, "bit index " + std::to_string(bit) + " > 7");
    const bool duplicate = std::any_of(masks_.begin(), masks_.end(), [&](const StuckMask& m) {
        return m.offset == offset && m.bit == bit;
    });
    if (duplicate) {
        throw ImageError(ImageErrc::duplicate_mask, "stuck mask already installed at offset " +
                                                        std::to_string(offset) + " bit " + std::to_string(bit));
    }
    masks_.push_back({offset, static_cast<std::uint8_t>(bit), static_cast<std::uint8_t>(value ? 1 : 0)});
    apply_masks(offset, 1);
}

Snapshot KernelImage::snapshot() const {
    Snapshot s;
    s.bytes = bytes_;
    Fnv64 h;
    h.update(s.bytes);
    s.digest = h.value();
    return s;
}

std::vector<BitDifference> KernelImage::diff(const Snapshot& a, const Snapshot& b) {
    std::vector<BitDifference> out;
    const std::size_t n = std::min(a.bytes.size(), b.bytes.size());
    for (std::size_t i = 0; i < n; ++i) {
        std::uint8_t x = a.bytes[i] ^ b.bytes[i];
        for (std::uint8_t bit = 0; x != 0; ++bit, x >>= 1) {
            if (x & 1u) out.push_back({static_cast<std::uint32_t>(i), bit});
        }
    }
    return out;
}

std::size_t KernelImage::index_record(ObjectRecord record) {
    if (by_name_.contains(record.name)) {
        throw ImageError(ImageErrc::duplicate_object, "object '" + record.name + "' already exists");
    }
    const std::size_t idx = objects_.size();
    by_name_.emplace(record.name, idx);
    by_base_.emplace(record.base, idx);
    objects_.push_back(std::move(record));
    return idx;
}

std::uint32_t KernelImage::allocate(const std::string& name, std::uint32_t size, ObjectKind kind,
                                    std::optional<std::string> parent, std::uint32_t align) {
    const std::uint32_t base = (next_free_ + align - 1) / align * align;
    if (size == 0 || !in_range(base, size)) {
        throw ImageError(ImageErrc::image_overflow, "allocating '" + name + "' (" + std::to_string(size) +
                                                        " bytes) exceeds image capacity " +
                                                        std::to_string(capacity()));
    }
    index_record({name, base, size, kind, std::move(parent), true});
    next_free_ = base + size;
    return base;
}

void KernelImage::add_child(const std::string& name, const std::string& parent, std::uint32_t base,
                            std::uint32_t size, ObjectKind kind) {
    const ObjectRecord& p = get(parent);
    if (!p.contains(base, size)) {
        throw ImageError(ImageErrc::overlapping_object, "child '" + name + "' not inside '" + parent + "'");
    }
    index_record({name, base, size, kind, parent, true});
}

void KernelImage::release(const std::string& name) {
    const auto it = by_name_.find(name);
    if (it == by_name_.end()) throw ImageError(ImageErrc::unknown_object, "no object '" + name + "'");
    objects_[it->second].live = false;
    for (auto& r : objects_) {
        if (r.parent && *r.parent == name) r.live = false;
    }
}

const ObjectRecord* KernelImage::find(const std::string& name) const {
    const auto it = by_name_.find(name);
    return it == by_name_.end() ? nullptr : &objects_[it->second];
}

const ObjectRecord& KernelImage::get(const std::string& name) const {
    const auto* r = find(name);
    if (!r) throw ImageError(ImageErrc::unknown_object, "no object '" + name + "'");
    return *r;
}

const ObjectRecord* KernelImage::record_at(std::uint32_t raw, ObjectKind kind) const {
    auto [lo, hi] = by_base_.equal_range(raw);
    for (auto it = lo; it != hi; ++it) {
        const auto& r = objects_[it->second];
        if (r.kind == kind && r.live) return &r;
    }
    return nullptr;
}

}  // namespace kronos
