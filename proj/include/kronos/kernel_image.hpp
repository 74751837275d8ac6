#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace kronos {

enum class ObjectKind : std::uint8_t {
    scalar,
    handle,
    list,
    list_item,
    tcb,
    queue,
    name_string,
    stack,
    timer,
};

const char* to_string(ObjectKind kind);

enum class ImageErrc {
    out_of_image,
    duplicate_mask,
    image_overflow,
    unknown_object,
    duplicate_object,
    overlapping_object,
};

class ImageError : public std::runtime_error {
public:
    ImageError(ImageErrc code, const std::string& what)
        : std::runtime_error(what), code_(code) {}
    ImageErrc code() const noexcept { return code_; }

private:
    ImageErrc code_;
};

/// One named region of the image. Top-level records never overlap each
/// other; a record with a parent lies entirely inside that parent.
struct ObjectRecord {
    std::string name;
    std::uint32_t base = 0;
    std::uint32_t size = 0;
    ObjectKind kind = ObjectKind::scalar;
    std::optional<std::string> parent;
    bool live = true;

    bool contains(std::uint32_t offset, std::uint32_t width = 1) const {
        return offset >= base && std::uint64_t{offset} + width <= std::uint64_t{base} + size;
    }
};

struct StuckMask {
    std::uint32_t offset = 0;
    std::uint8_t bit = 0;
    std::uint8_t value = 0;
};

struct BitDifference {
    std::uint32_t offset = 0;
    std::uint8_t bit = 0;
    friend bool operator==(const BitDifference&, const BitDifference&) = default;
};

struct Snapshot {
    std::vector<std::uint8_t> bytes;
    std::uint64_t digest = 0;
};

/// Byte-addressable memory holding every kernel object. All multi-byte
/// fields are little-endian. Stuck-at masks are enforced on every write,
/// so a masked bit keeps its forced value for the lifetime of the image.
class KernelImage {
public:
    static constexpr std::uint32_t kDefaultCapacity = 64 * 1024;
    // Offsets below this are never handed out so that a zero handle is null.
    static constexpr std::uint32_t kReservedLow = 16;

    explicit KernelImage(std::uint32_t capacity = kDefaultCapacity);

    std::uint32_t capacity() const { return static_cast<std::uint32_t>(bytes_.size()); }
    bool in_range(std::uint32_t offset, std::uint32_t width) const {
        return std::uint64_t{offset} + width <= bytes_.size();
    }

    std::uint32_t read_field(std::uint32_t offset, std::uint32_t width) const;
    void write_field(std::uint32_t offset, std::uint32_t width, std::uint32_t value);
    std::uint8_t read_byte(std::uint32_t offset) const { return static_cast<std::uint8_t>(read_field(offset, 1)); }
    void write_byte(std::uint32_t offset, std::uint8_t value) { write_field(offset, 1, value); }
    bool read_bit(std::uint32_t offset, unsigned bit) const;

    void flip_bit(std::uint32_t offset, unsigned bit);
    void install_stuck_mask(std::uint32_t offset, unsigned bit, unsigned value);
    const std::vector<StuckMask>& stuck_masks() const { return masks_; }

    Snapshot snapshot() const;
    static std::vector<BitDifference> diff(const Snapshot& a, const Snapshot& b);

    // Bump allocation of a top-level record (aligned to `align`).
    std::uint32_t allocate(const std::string& name, std::uint32_t size, ObjectKind kind,
                           std::optional<std::string> parent = std::nullopt,
                           std::uint32_t align = 4);
    // Registers a child record inside an existing record.
    void add_child(const std::string& name, const std::string& parent, std::uint32_t base,
                   std::uint32_t size, ObjectKind kind);
    // Marks a record and all of its descendants dead; handles to them
    // become invalid.
    void release(const std::string& name);

    const std::vector<ObjectRecord>& objects() const { return objects_; }
    const ObjectRecord* find(const std::string& name) const;
    const ObjectRecord& get(const std::string& name) const;
    // Live record of `kind` whose base is exactly `raw`, if any.
    const ObjectRecord* record_at(std::uint32_t raw, ObjectKind kind) const;
    bool valid_handle(std::uint32_t raw, ObjectKind kind) const { return record_at(raw, kind) != nullptr; }
    std::uint32_t used_bytes() const { return next_free_; }

private:
    void check_range(std::uint32_t offset, std::uint32_t width) const;
    void apply_masks(std::uint32_t offset, std::uint32_t width);
    std::size_t index_record(ObjectRecord record);

    std::vector<std::uint8_t> bytes_;
    std::vector<StuckMask> masks_;
    std::vector<ObjectRecord> objects_;
    std::unordered_map<std::string, std::size_t> by_name_;
    std::unordered_multimap<std::uint32_t, std::size_t> by_base_;
    std::uint32_t next_free_ = kReservedLow;
};

}  // namespace kronos
