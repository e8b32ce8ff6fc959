#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace xmt {

/// Decoded PCM audio, mixed down to mono.
struct AudioData {
    double sample_rate = 48000.0;
    int channels = 1;
    int bits_per_sample = 16;
    std::vector<double> samples;
};

/// RIFF/WAVE PCM, 16- or 24-bit, any channel count.
AudioData parse_wav(std::string_view bytes);
AudioData read_wav(const std::string& path);

/// 24-bit PCM; each sample is clamped to [-1, 1] and duplicated across
/// `channels`.
std::string encode_wav24(std::span<const double> mono, int sample_rate, int channels = 1);

/// Writes through a temporary file so a failed write leaves no partial output.
void write_file_atomic(const std::string& path, std::string_view bytes);

/// Interleaved 16-bit little-endian stereo frames.
std::string encode_pcm16_stereo(std::span<const double> mono);

std::vector<double> resample_linear(std::span<const double> input, double from_rate, double to_rate);

std::string read_file(const std::string& path);

}  // namespace xmt
