#include "kronos/workloads.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>

#include "kronos/hash.hpp"

namespace kronos {

const char* to_string(WorkloadId id) {
    switch (id) {
        case WorkloadId::SHA: return "SHA";
        case WorkloadId::FFT: return "FFT";
        case WorkloadId::CUBIC: return "CUBIC";
        case WorkloadId::HUFF_DEC: return "HUFF_DEC";
        case WorkloadId::ADPCM_ENC: return "ADPCM_ENC";
    }
    return "?";
}

std::optional<WorkloadId> parse_workload_id(std::string_view text) {
    for (auto id : kAllWorkloads) {
        if (text == to_string(id)) return id;
    }
    return std::nullopt;
}

WorkloadSpec workload_spec(WorkloadId id, const WorkloadSizes& sizes) {
    switch (id) {
        case WorkloadId::SHA: return {id, 1, sizes.sha_stride_blocks};
        case WorkloadId::FFT: return {id, 1, sizes.fft_stride_frames};
        case WorkloadId::CUBIC: return {id, 1, sizes.cubic_stride};
        case WorkloadId::HUFF_DEC: return {id, 2, sizes.huffman_stride};
        case WorkloadId::ADPCM_ENC: return {id, 3, sizes.adpcm_stride};
    }
    return {};
}

VerifyResult verify_outputs(const OutputSet& run, const OutputSet& golden) {
    VerifyResult result;
    for (const auto& [id, expected] : golden) {
        if (!run.contains(id)) result.ids.push_back(id);
    }
    if (!result.ids.empty()) {
        result.status = VerifyStatus::missing_output;
        return result;
    }
    for (const auto& [id, expected] : golden) {
        if (run.at(id).digest != expected.digest) result.ids.push_back(id);
    }
    result.status = result.ids.empty() ? VerifyStatus::match : VerifyStatus::mismatch;
    return result;
}

// -- SHA-1 ---------------------------------------------------------------------

namespace {
std::uint32_t rotl(std::uint32_t x, int n) { return (x << n) | (x >> (32 - n)); }
}  // namespace

Sha1::Sha1() : h_{0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u, 0xC3D2E1F0u} {}

void Sha1::block(const std::uint8_t* p) {
    std::array<std::uint32_t, 80> w{};
    for (int i = 0; i < 16; ++i) {
        w[i] = std::uint32_t{p[4 * i]} << 24 | std::uint32_t{p[4 * i + 1]} << 16 |
               std::uint32_t{p[4 * i + 2]} << 8 | std::uint32_t{p[4 * i + 3]};
    }
    for (int i = 16; i < 80; ++i) w[i] = rotl(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);
    auto [a, b, c, d, e] = h_;
    for (int i = 0; i < 80; ++i) {
        std::uint32_t f = 0;
        std::uint32_t k = 0;
        if (i < 20) {
            f = (b & c) | (~b & d);
            k = 0x5A827999u;
        } else if (i < 40) {
            f = b ^ c ^ d;
            k = 0x6ED9EBA1u;
        } else if (i < 60) {
            f = (b & c) | (b & d) | (c & d);
            k = 0x8F1BBCDCu;
        } else {
            f = b ^ c ^ d;
            k = 0xCA62C1D6u;
        }
        const auto t = rotl(a, 5) + f + e + k + w[i];
        e = d;
        d = c;
        c = rotl(b, 30);
        b = a;
        a = t;
    }
    h_[0] += a;
    h_[1] += b;
    h_[2] += c;
    h_[3] += d;
    h_[4] += e;
}

void Sha1::update(std::span<const std::uint8_t> data) {
    length_ += data.size();
    for (auto byte : data) {
        buf_[buffered_++] = byte;
        if (buffered_ == 64) {
            block(buf_.data());
            buffered_ = 0;
        }
    }
}

std::array<std::uint8_t, 20> Sha1::finish() {
    const std::uint64_t bits = length_ * 8;
    const std::uint8_t pad = 0x80;
    update({&pad, 1});
    const std::uint8_t zero = 0;
    while (buffered_ != 56) update({&zero, 1});
    std::array<std::uint8_t, 8> len{};
    for (int i = 0; i < 8; ++i) len[i] = static_cast<std::uint8_t>(bits >> (56 - 8 * i));
    update(len);
    std::array<std::uint8_t, 20> out{};
    for (int i = 0; i < 5; ++i) {
        for (int j = 0; j < 4; ++j) out[4 * i + j] = static_cast<std::uint8_t>(h_[i] >> (24 - 8 * j));
    }
    return out;
}

// -- FFT -----------------------------------------------------------------------

namespace {

struct Twiddles {
    std::array<std::int32_t, kFftLength / 2> cos{};
    std::array<std::int32_t, kFftLength / 2> sin{};
    Twiddles() {
        for (std::size_t k = 0; k < kFftLength / 2; ++k) {
            const double angle = 2.0 * std::numbers::pi * static_cast<double>(k) / kFftLength;
            cos[k] = static_cast<std::int32_t>(std::lround(32767.0 * std::cos(angle)));
            sin[k] = static_cast<std::int32_t>(std::lround(32767.0 * std::sin(angle)));
        }
    }
};

const Twiddles& twiddles() {
    static const Twiddles t;
    return t;
}

}  // namespace

void fft_fixed(std::span<FixedComplex, kFftLength> data) {
    constexpr std::size_t n = kFftLength;
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(data[i], data[j]);
    }
    const auto& tw = twiddles();
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t step = n / len;
        for (std::size_t start = 0; start < n; start += len) {
            for (std::size_t k = 0; k < len / 2; ++k) {
                const std::int64_t wr = tw.cos[k * step];
                const std::int64_t wi = -tw.sin[k * step];
                auto& a = data[start + k];
                auto& b = data[start + k + len / 2];
                const auto tr = static_cast<std::int32_t>((wr * b[0] - wi * b[1]) >> 15);
                const auto ti = static_cast<std::int32_t>((wr * b[1] + wi * b[0]) >> 15);
                const FixedComplex top{(a[0] + tr) >> 1, (a[1] + ti) >> 1};
                const FixedComplex bottom{(a[0] - tr) >> 1, (a[1] - ti) >> 1};
                a = top;
                b = bottom;
            }
        }
    }
}

// -- cubic -----------------------------------------------------------------------

std::vector<double> solve_cubic(double a, double b, double c, double d) {
    const double a1 = b / a;
    const double a2 = c / a;
    const double a3 = d / a;
    const double q = (a1 * a1 - 3.0 * a2) / 9.0;
    const double r = (2.0 * a1 * a1 * a1 - 9.0 * a1 * a2 + 27.0 * a3) / 54.0;
    const double r2_q3 = r * r - q * q * q;
    if (r2_q3 <= 0) {
        const double ratio = std::clamp(r / std::sqrt(q * q * q), -1.0, 1.0);
        const double theta = std::acos(ratio);
        const double s = -2.0 * std::sqrt(q);
        return {s * std::cos(theta / 3.0) - a1 / 3.0,
                s * std::cos((theta + 2.0 * std::numbers::pi) / 3.0) - a1 / 3.0,
                s * std::cos((theta + 4.0 * std::numbers::pi) / 3.0) - a1 / 3.0};
    }
    double x = std::pow(std::sqrt(r2_q3) + std::fabs(r), 1.0 / 3.0);
    x += q / x;
    x *= r < 0.0 ? 1.0 : -1.0;
    x -= a1 / 3.0;
    return {x};
}

// -- Huffman ---------------------------------------------------------------------

HuffmanCode build_huffman(std::span<const std::uint8_t> corpus) {
    std::array<std::uint64_t, 256> freq{};
    for (auto s : corpus) ++freq[s];

    struct Node {
        std::uint64_t weight;
        int min_symbol;
        int left;
        int right;
    };
    std::vector<Node> nodes;
    using Entry = std::tuple<std::uint64_t, int, int>;  // weight, min symbol, node
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
    for (int s = 0; s < 256; ++s) {
        if (freq[s] == 0) continue;
        nodes.push_back({freq[s], s, -1, -1});
        heap.emplace(freq[s], s, static_cast<int>(nodes.size() - 1));
    }
    HuffmanCode code;
    if (nodes.empty()) return code;
    if (nodes.size() == 1) {
        code.lengths[nodes[0].min_symbol] = 1;
    } else {
        while (heap.size() > 1) {
            auto [wa, sa, a] = heap.top();
            heap.pop();
            auto [wb, sb, b] = heap.top();
            heap.pop();
            nodes.push_back({wa + wb, std::min(sa, sb), a, b});
            heap.emplace(wa + wb, std::min(sa, sb), static_cast<int>(nodes.size() - 1));
        }
        std::vector<std::pair<int, std::uint8_t>> stack{{std::get<2>(heap.top()), 0}};
        while (!stack.empty()) {
            auto [idx, depth] = stack.back();
            stack.pop_back();
            const auto& node = nodes[idx];
            if (node.left < 0) {
                code.lengths[node.min_symbol] = depth;
            } else {
                stack.emplace_back(node.left, depth + 1);
                stack.emplace_back(node.right, depth + 1);
            }
        }
    }
    std::vector<int> order;
    for (int s = 0; s < 256; ++s) {
        if (code.lengths[s]) order.push_back(s);
    }
    std::sort(order.begin(), order.end(), [&](int x, int y) {
        return std::pair(code.lengths[x], x) < std::pair(code.lengths[y], y);
    });
    std::uint32_t next = 0;
    std::uint8_t prev_len = code.lengths[order.front()];
    for (int s : order) {
        next <<= (code.lengths[s] - prev_len);
        code.codes[s] = next++;
        prev_len = code.lengths[s];
    }
    return code;
}

std::vector<bool> huffman_encode(const HuffmanCode& code, std::span<const std::uint8_t> data) {
    std::vector<bool> bits;
    for (auto s : data) {
        const auto len = code.lengths[s];
        if (len == 0) throw std::invalid_argument("symbol without a Huffman code");
        for (int i = len - 1; i >= 0; --i) bits.push_back(((code.codes[s] >> i) & 1u) != 0);
    }
    return bits;
}

HuffmanDecoder::HuffmanDecoder(const HuffmanCode& code) {
    for (int s = 0; s < 256; ++s) {
        if (code.lengths[s]) ++count_[code.lengths[s]];
    }
    std::int32_t next = 0;
    std::int32_t index = 0;
    for (int len = 1; len <= 32; ++len) {
        first_code_[len] = next;
        first_index_[len] = index;
        next = (next + count_[len]) << 1;
        index += count_[len];
    }
    for (int len = 1; len <= 32; ++len) {
        for (int s = 0; s < 256; ++s) {
            if (code.lengths[s] == len) symbols_.push_back(static_cast<std::uint8_t>(s));
        }
    }
}

std::optional<std::uint8_t> HuffmanDecoder::next(const std::vector<bool>& bits, std::size_t& cursor) const {
    std::int32_t c = 0;
    for (int len = 1; len <= 32; ++len) {
        if (cursor >= bits.size()) return std::nullopt;
        c = (c << 1) | (bits[cursor++] ? 1 : 0);
        const auto offset = c - first_code_[len];
        if (offset >= 0 && offset < count_[len]) return symbols_[first_index_[len] + offset];
    }
    return std::nullopt;
}

std::vector<std::uint8_t> huffman_decode(const HuffmanCode& code, const std::vector<bool>& bits,
                                         std::size_t symbols) {
    HuffmanDecoder decoder(code);
    std::vector<std::uint8_t> out;
    std::size_t cursor = 0;
    while (out.size() < symbols) {
        const auto s = decoder.next(bits, cursor);
        if (!s) throw std::invalid_argument("malformed Huffman stream");
        out.push_back(*s);
    }
    return out;
}

// -- IMA ADPCM ---------------------------------------------------------------------

namespace {
constexpr std::array<std::int32_t, 89> kStepTable = {
    7,     8,     9,     10,    11,    12,    13,    14,    16,    17,    19,    21,    23,    25,    28,
    31,    34,    37,    41,    45,    50,    55,    60,    66,    73,    80,    88,    97,    107,   118,
    130,   143,   157,   173,   190,   209,   230,   253,   279,   307,   337,   371,   408,   449,   494,
    544,   598,   658,   724,   796,   876,   963,   1060,  1166,  1282,  1411,  1552,  1707,  1878,  2066,
    2272,  2499,  2749,  3024,  3327,  3660,  4026,  4428,  4871,  5358,  5894,  6484,  7132,  7845,  8630,
    9493,  10442, 11487, 12635, 13899, 15289, 16818, 18500, 20350, 22385, 24623, 27086, 29794, 32767};
constexpr std::array<std::int32_t, 16> kIndexTable = {-1, -1, -1, -1, 2, 4, 6, 8, -1, -1, -1, -1, 2, 4, 6, 8};
}  // namespace

std::uint8_t adpcm_encode_sample(AdpcmState& state, std::int16_t sample) {
    std::int32_t diff = sample - state.predicted;
    std::uint8_t code = 0;
    if (diff < 0) {
        code = 8;
        diff = -diff;
    }
    std::int32_t step = kStepTable[state.index];
    std::int32_t vpdiff = step >> 3;
    if (diff >= step) {
        code |= 4;
        diff -= step;
        vpdiff += step;
    }
    step >>= 1;
    if (diff >= step) {
        code |= 2;
        diff -= step;
        vpdiff += step;
    }
    step >>= 1;
    if (diff >= step) {
        code |= 1;
        vpdiff += step;
    }
    state.predicted += (code & 8) ? -vpdiff : vpdiff;
    state.predicted = std::clamp(state.predicted, -32768, 32767);
    state.index = std::clamp(state.index + kIndexTable[code], 0, 88);
    return code;
}

std::vector<std::uint8_t> adpcm_encode(std::span<const std::int16_t> samples) {
    AdpcmState state;
    std::vector<std::uint8_t> out;
    out.reserve(samples.size());
    for (auto s : samples) out.push_back(adpcm_encode_sample(state, s));
    return out;
}

// -- inputs ------------------------------------------------------------------------

namespace {

// Numerical Recipes LCG; input generation must not depend on <random>.
class InputLcg {
public:
    explicit InputLcg(std::uint32_t seed) : state_(seed) {}
    std::uint32_t next() {
        state_ = state_ * 1664525u + 1013904223u;
        return state_;
    }
    std::int32_t range(std::int32_t lo, std::int32_t hi) {
        return lo + static_cast<std::int32_t>((next() >> 8) % static_cast<std::uint32_t>(hi - lo + 1));
    }

private:
    std::uint32_t state_;
};

constexpr std::string_view kWords[] = {
    "the",    "kernel", "task",     "list",   "tick",  "queue",   "timer",    "priority", "ready",
    "delay",  "idle",   "schedule", "mutex",  "stack", "pointer", "overflow", "fault",    "bit",
    "memory", "radiation", "upset", "system", "state", "control", "block",    "and",      "of",
};

}  // namespace

std::shared_ptr<const WorkloadInputs> WorkloadInputs::build(const WorkloadSizes& sizes) {
    auto in = std::make_shared<WorkloadInputs>();
    in->sizes = sizes;

    InputLcg rng(0x5EED1234u);
    in->sha_message.resize(sizes.sha_bytes);
    for (auto& b : in->sha_message) b = static_cast<std::uint8_t>(rng.next() >> 24);

    in->fft_frames.resize(sizes.fft_frames);
    for (std::size_t f = 0; f < in->fft_frames.size(); ++f) {
        for (std::size_t n = 0; n < kFftLength; ++n) {
            const double t = 2.0 * std::numbers::pi * static_cast<double>(n) / kFftLength;
            const double v = 8000.0 * std::sin(static_cast<double>(f + 1) * t) + 4000.0 * std::cos(3.0 * t);
            in->fft_frames[f][n] = {static_cast<std::int32_t>(std::lround(v)) + rng.range(-256, 256), 0};
        }
    }

    in->cubic_coefficients.push_back({1.0, -6.0, 11.0, -6.0});
    while (in->cubic_coefficients.size() < sizes.cubic_equations) {
        if (in->cubic_coefficients.size() % 2 == 1) {
            const double r1 = rng.range(-5, 5);
            const double r2 = rng.range(-5, 5);
            const double r3 = rng.range(-5, 5);
            in->cubic_coefficients.push_back(
                {1.0, -(r1 + r2 + r3), r1 * r2 + r1 * r3 + r2 * r3, -(r1 * r2 * r3)});
        } else {
            in->cubic_coefficients.push_back({static_cast<double>(rng.range(1, 4)), static_cast<double>(rng.range(-9, 9)),
                                              static_cast<double>(rng.range(-9, 9)),
                                              static_cast<double>(rng.range(-30, 30))});
        }
    }
    in->cubic_coefficients.resize(sizes.cubic_equations);

    while (in->huffman_corpus.size() < sizes.huffman_bytes) {
        const auto word = kWords[rng.next() % std::size(kWords)];
        for (char c : word) in->huffman_corpus.push_back(static_cast<std::uint8_t>(c));
        in->huffman_corpus.push_back(rng.next() % 9 == 0 ? '\n' : ' ');
    }
    in->huffman_corpus.resize(sizes.huffman_bytes);
    in->huffman_code = build_huffman(in->huffman_corpus);
    in->huffman_bits = huffman_encode(in->huffman_code, in->huffman_corpus);

    double phase = 0.0;
    in->adpcm_samples.resize(sizes.adpcm_samples);
    for (std::size_t n = 0; n < in->adpcm_samples.size(); ++n) {
        in->adpcm_samples[n] = static_cast<std::int16_t>(std::lround(12000.0 * std::sin(phase)));
        phase += 0.01 + 0.0001 * static_cast<double>(n);
    }
    return in;
}

std::uint32_t expected_slices(WorkloadId id, const WorkloadSizes& s) {
    auto ceil_div = [](std::uint32_t a, std::uint32_t b) { return b == 0 ? a : (a + b - 1) / b; };
    switch (id) {
        case WorkloadId::SHA: return ceil_div(s.sha_bytes / 64, s.sha_stride_blocks);
        case WorkloadId::FFT: return ceil_div(s.fft_frames, s.fft_stride_frames);
        case WorkloadId::CUBIC: return ceil_div(s.cubic_equations, s.cubic_stride);
        case WorkloadId::HUFF_DEC: return ceil_div(s.huffman_bytes, s.huffman_stride);
        case WorkloadId::ADPCM_ENC: return ceil_div(s.adpcm_samples, s.adpcm_stride);
    }
    return 0;
}

// -- task bodies ------------------------------------------------------------------

namespace {

class WorkloadTask : public TaskBody {
public:
    WorkloadTask(WorkloadId id, std::shared_ptr<const WorkloadInputs> inputs, OutputSink& sink)
        : id_(id), in_(std::move(inputs)), sink_(sink),
          cap_(10 * std::max<std::uint32_t>(1, expected_slices(id, in_->sizes))) {}

    SliceResult run_slice(Kernel& kernel) final {
        if (++slices_ > cap_) {
            throw WorkloadOverrun(std::string(to_string(id_)) + " exceeded its iteration cap");
        }
        if (!checked_) {
            self_check(kernel);
            checked_ = true;
        }
        return step(kernel);
    }

protected:
    virtual SliceResult step(Kernel& kernel) = 0;

    SliceResult finish(Kernel& kernel) {
        sink_.outputs[id_] = {id_, digest_.value(), kernel.clock()};
        return {SliceAction::done, 0};
    }

    WorkloadId id_;
    std::shared_ptr<const WorkloadInputs> in_;
    Fnv64 digest_;

private:
    // Takes and gives one mutex and round-trips one notification through
    // the task's own TCB.
    void self_check(Kernel& kernel) {
        const std::uint32_t magic = 0xC0DE0000u | static_cast<std::uint32_t>(id_);
        kernel.mutex_take();
        kernel.notify_self(magic);
        kernel.require(kernel.notify_take() == magic, "notification value corrupted");
        kernel.mutex_give();
    }

    OutputSink& sink_;
    std::uint32_t cap_;
    std::uint32_t slices_ = 0;
    bool checked_ = false;
};

class ShaTask final : public WorkloadTask {
public:
    using WorkloadTask::WorkloadTask;

private:
    SliceResult step(Kernel& kernel) override {
        const auto& msg = in_->sha_message;
        const std::size_t chunk = 64 * std::max<std::uint32_t>(1, in_->sizes.sha_stride_blocks);
        const std::size_t end = std::min(msg.size(), offset_ + chunk);
        sha_.update(std::span(msg).subspan(offset_, end - offset_));
        offset_ = end;
        if (offset_ < msg.size()) return {};
        digest_.update(sha_.finish());
        return finish(kernel);
    }

    Sha1 sha_;
    std::size_t offset_ = 0;
};

class FftTask final : public WorkloadTask {
public:
    using WorkloadTask::WorkloadTask;

private:
    SliceResult step(Kernel& kernel) override {
        const auto stride = std::max<std::uint32_t>(1, in_->sizes.fft_stride_frames);
        for (std::uint32_t i = 0; i < stride && frame_ < in_->fft_frames.size(); ++i, ++frame_) {
            auto data = in_->fft_frames[frame_];
            fft_fixed(data);
            for (const auto& [re, im] : data) {
                digest_.update_u32(static_cast<std::uint32_t>(re));
                digest_.update_u32(static_cast<std::uint32_t>(im));
            }
        }
        if (frame_ < in_->fft_frames.size()) return {};
        return finish(kernel);
    }

    std::size_t frame_ = 0;
};

// Solves its equations in batches and sleeps between batches. The digest
// also records whether each sleep lasted as long as requested, which is the
// only kernel state any workload observes.
class CubicTask final : public WorkloadTask {
public:
    using WorkloadTask::WorkloadTask;

private:
    SliceResult step(Kernel& kernel) override {
        const auto& sz = in_->sizes;
        if (sleeping_since_) {
            const auto slept = kernel.tick_count() - *sleeping_since_;
            if (slept >= sz.cubic_delay_ticks && slept < sz.cubic_delay_ticks + 8) ++on_time_wakeups_;
            sleeping_since_.reset();
        }
        const auto stride = std::max<std::uint32_t>(1, sz.cubic_stride);
        for (std::uint32_t i = 0; i < stride && next_ < in_->cubic_coefficients.size(); ++i, ++next_) {
            const auto& [a, b, c, d] = in_->cubic_coefficients[next_];
            auto roots = solve_cubic(a, b, c, d);
            std::sort(roots.begin(), roots.end());
            digest_.update_u32(static_cast<std::uint32_t>(roots.size()));
            for (double r : roots) digest_.update_u64(static_cast<std::uint64_t>(std::llround(r * 1e6)));
        }
        if (next_ >= in_->cubic_coefficients.size()) {
            digest_.update_u32(on_time_wakeups_);
            return finish(kernel);
        }
        if (sz.cubic_delay_every != 0 && next_ % sz.cubic_delay_every == 0) {
            sleeping_since_ = kernel.tick_count();
            return {SliceAction::delay, sz.cubic_delay_ticks};
        }
        return {};
    }

    std::size_t next_ = 0;
    std::optional<std::uint32_t> sleeping_since_;
    std::uint32_t on_time_wakeups_ = 0;
};

class HuffmanTask final : public WorkloadTask {
public:
    HuffmanTask(WorkloadId id, std::shared_ptr<const WorkloadInputs> inputs, OutputSink& sink)
        : WorkloadTask(id, std::move(inputs), sink), decoder_(in_->huffman_code) {}

private:
    SliceResult step(Kernel& kernel) override {
        const auto stride = std::max<std::uint32_t>(1, in_->sizes.huffman_stride);
        for (std::uint32_t i = 0; i < stride && decoded_ < in_->huffman_corpus.size(); ++i, ++decoded_) {
            const auto symbol = decoder_.next(in_->huffman_bits, cursor_);
            kernel.require(symbol.has_value(), "malformed Huffman stream");
            const std::uint8_t s = *symbol;
            digest_.update(std::span<const std::uint8_t>(&s, 1));
        }
        if (decoded_ < in_->huffman_corpus.size()) return {};
        return finish(kernel);
    }

    HuffmanDecoder decoder_;
    std::size_t cursor_ = 0;
    std::size_t decoded_ = 0;
};

class AdpcmTask final : public WorkloadTask {
public:
    using WorkloadTask::WorkloadTask;

private:
    SliceResult step(Kernel& kernel) override {
        const auto stride = std::max<std::uint32_t>(1, in_->sizes.adpcm_stride);
        for (std::uint32_t i = 0; i < stride && next_ < in_->adpcm_samples.size(); ++i, ++next_) {
            const std::uint8_t code = adpcm_encode_sample(state_, in_->adpcm_samples[next_]);
            digest_.update(std::span<const std::uint8_t>(&code, 1));
        }
        if (next_ < in_->adpcm_samples.size()) return {};
        return finish(kernel);
    }

    AdpcmState state_;
    std::size_t next_ = 0;
};

}  // namespace

std::unique_ptr<TaskBody> make_task_body(WorkloadId id, std::shared_ptr<const WorkloadInputs> inputs,
                                         OutputSink& sink) {
    switch (id) {
        case WorkloadId::SHA: return std::make_unique<ShaTask>(id, std::move(inputs), sink);
        case WorkloadId::FFT: return std::make_unique<FftTask>(id, std::move(inputs), sink);
        case WorkloadId::CUBIC: return std::make_unique<CubicTask>(id, std::move(inputs), sink);
        case WorkloadId::HUFF_DEC: return std::make_unique<HuffmanTask>(id, std::move(inputs), sink);
        case WorkloadId::ADPCM_ENC: return std::make_unique<AdpcmTask>(id, std::move(inputs), sink);
    }
    return nullptr;
}

void install_workloads(Kernel& kernel, std::shared_ptr<const WorkloadInputs> inputs, OutputSink& sink) {
    for (auto id : kAllWorkloads) {
        const auto spec = workload_spec(id, inputs->sizes);
        kernel.task_create(to_string(id), spec.priority, inputs->sizes.stack_words, make_task_body(id, inputs, sink));
    }
    if (inputs->sizes.heartbeat_period != 0) {
        const auto heartbeat = kernel.timer_create("heartbeat", inputs->sizes.heartbeat_period, true);
        kernel.timer_start(heartbeat);
    }
}

}  // namespace kronos
