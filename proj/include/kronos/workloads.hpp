#pragma once

#include <array>
#include <complex>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kronos/rtos.hpp"

namespace kronos {

enum class WorkloadId { SHA, FFT, CUBIC, HUFF_DEC, ADPCM_ENC };

// Creation order; also the order of the priority-1 round robin.
inline constexpr std::array<WorkloadId, 5> kAllWorkloads = {
    WorkloadId::SHA, WorkloadId::FFT, WorkloadId::CUBIC, WorkloadId::HUFF_DEC, WorkloadId::ADPCM_ENC};

const char* to_string(WorkloadId id);
std::optional<WorkloadId> parse_workload_id(std::string_view text);

/// Input sizes and cooperative-yield strides of the benchmark mix.
struct WorkloadSizes {
    std::uint32_t sha_bytes = 4096;
    std::uint32_t sha_stride_blocks = 2;
    std::uint32_t fft_frames = 16;
    std::uint32_t fft_stride_frames = 1;
    std::uint32_t cubic_equations = 32;
    std::uint32_t cubic_stride = 2;
    std::uint32_t cubic_delay_every = 8;
    std::uint32_t cubic_delay_ticks = 3;
    std::uint32_t huffman_bytes = 2048;
    std::uint32_t huffman_stride = 128;
    std::uint32_t adpcm_samples = 1024;
    std::uint32_t adpcm_stride = 256;
    std::uint32_t stack_words = 128;
    std::uint32_t heartbeat_period = 40;
};

struct WorkloadSpec {
    WorkloadId id = WorkloadId::SHA;
    std::uint32_t priority = 1;
    std::uint32_t yield_stride = 1;
};

// SHA/FFT/CUBIC run at priority 1, HUFF_DEC at 2, ADPCM_ENC at 3.
WorkloadSpec workload_spec(WorkloadId id, const WorkloadSizes& sizes);

struct WorkloadOutput {
    WorkloadId id = WorkloadId::SHA;
    std::uint64_t digest = 0;
    std::uint32_t completion_tick = 0;
    friend bool operator==(const WorkloadOutput&, const WorkloadOutput&) = default;
};

using OutputSet = std::map<WorkloadId, WorkloadOutput>;

enum class VerifyStatus { match, mismatch, missing_output };
struct VerifyResult {
    VerifyStatus status = VerifyStatus::match;
    std::vector<WorkloadId> ids;  // mismatching or missing workloads
};

// Bit-exact digest comparison. Missing outputs take precedence over mismatches.
VerifyResult verify_outputs(const OutputSet& run, const OutputSet& golden);

// -- algorithm kernels ----------------------------------------------------------

class Sha1 {
public:
    Sha1();
    void update(std::span<const std::uint8_t> data);
    std::array<std::uint8_t, 20> finish();

private:
    void block(const std::uint8_t* p);
    std::array<std::uint32_t, 5> h_;
    std::array<std::uint8_t, 64> buf_{};
    std::size_t buffered_ = 0;
    std::uint64_t length_ = 0;
};

inline constexpr std::size_t kFftLength = 64;
using FixedComplex = std::array<std::int32_t, 2>;

// In-place radix-2 decimation-in-time FFT on Q15 data; every stage scales by
// 1/2, so the result is the DFT divided by the length.
void fft_fixed(std::span<FixedComplex, kFftLength> data);

// Real roots of a*x^3 + b*x^2 + c*x + d = 0 (one or three).
std::vector<double> solve_cubic(double a, double b, double c, double d);

struct HuffmanCode {
    std::array<std::uint8_t, 256> lengths{};
    std::array<std::uint32_t, 256> codes{};
};
HuffmanCode build_huffman(std::span<const std::uint8_t> corpus);
std::vector<bool> huffman_encode(const HuffmanCode& code, std::span<const std::uint8_t> data);

// Canonical decoder; decodes one symbol at a time from a bit cursor.
class HuffmanDecoder {
public:
    explicit HuffmanDecoder(const HuffmanCode& code);
    // Returns the next symbol, or nullopt on a malformed stream.
    std::optional<std::uint8_t> next(const std::vector<bool>& bits, std::size_t& cursor) const;

private:
    std::array<std::int32_t, 33> first_code_{};
    std::array<std::int32_t, 33> first_index_{};
    std::array<std::int32_t, 33> count_{};
    std::vector<std::uint8_t> symbols_;
};
std::vector<std::uint8_t> huffman_decode(const HuffmanCode& code, const std::vector<bool>& bits,
                                         std::size_t symbols);

struct AdpcmState {
    std::int32_t predicted = 0;
    std::int32_t index = 0;
};
// IMA ADPCM: one 4-bit code per sample.
std::uint8_t adpcm_encode_sample(AdpcmState& state, std::int16_t sample);
std::vector<std::uint8_t> adpcm_encode(std::span<const std::int16_t> samples);

// -- task bodies ------------------------------------------------------------------

/// Fixed inputs of every workload. Built once and shared read-only.
struct WorkloadInputs {
    WorkloadSizes sizes;
    std::vector<std::uint8_t> sha_message;
    std::vector<std::array<FixedComplex, kFftLength>> fft_frames;
    std::vector<std::array<double, 4>> cubic_coefficients;
    std::vector<std::uint8_t> huffman_corpus;
    HuffmanCode huffman_code;
    std::vector<bool> huffman_bits;
    std::vector<std::int16_t> adpcm_samples;

    static std::shared_ptr<const WorkloadInputs> build(const WorkloadSizes& sizes);
};

// Host-side sink the task bodies deliver their results to.
struct OutputSink {
    OutputSet outputs;
};

class WorkloadOverrun : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

std::unique_ptr<TaskBody> make_task_body(WorkloadId id, std::shared_ptr<const WorkloadInputs> inputs,
                                         OutputSink& sink);

// Number of slices each workload needs on its fixed input.
std::uint32_t expected_slices(WorkloadId id, const WorkloadSizes& sizes);

// Creates the five workload tasks and the heartbeat timer.
void install_workloads(Kernel& kernel, std::shared_ptr<const WorkloadInputs> inputs, OutputSink& sink);

}  // namespace kronos
