#include "xmt/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace xmt {

namespace {

std::uint32_t le32(std::string_view b, std::size_t at) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(b[at])) |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 1])) << 8 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 2])) << 16 |
           static_cast<std::uint32_t>(static_cast<unsigned char>(b[at + 3])) << 24;
}

std::uint16_t le16(std::string_view b, std::size_t at) {
    return static_cast<std::uint16_t>(static_cast<unsigned char>(b[at]) |
                                      static_cast<unsigned char>(b[at + 1]) << 8);
}

void put_le(std::string& out, std::uint32_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

}  // namespace

AudioData parse_wav(std::string_view bytes) {
    if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" || bytes.substr(8, 4) != "WAVE")
        throw std::runtime_error("not a RIFF/WAVE file");

    AudioData audio;
    bool have_format = false;
    std::string_view data;
    bool have_data = false;
    std::size_t at = 12;
    while (at + 8 <= bytes.size()) {
        const auto id = bytes.substr(at, 4);
        const std::size_t size = le32(bytes, at + 4);
        const std::size_t body = at + 8;
        if (body + size > bytes.size()) {
            if (id == "data") {
                data = bytes.substr(body);  // tolerate a truncated size field
                have_data = true;
            }
            break;
        }
        if (id == "fmt ") {
            if (size < 16) throw std::runtime_error("WAVE fmt chunk too short");
            const auto format = le16(bytes, body);
            if (format != 1 && format != 0xFFFE) throw std::runtime_error("only PCM WAVE files are supported");
            audio.channels = le16(bytes, body + 2);
            audio.sample_rate = le32(bytes, body + 4);
            audio.bits_per_sample = le16(bytes, body + 14);
            have_format = true;
        } else if (id == "data") {
            data = bytes.substr(body, size);
            have_data = true;
        }
        at = body + size + (size & 1);
    }
    if (!have_format || !have_data) throw std::runtime_error("WAVE file lacks fmt or data chunk");
    if (audio.channels < 1) throw std::runtime_error("WAVE file has no channels");
    if (audio.bits_per_sample != 16 && audio.bits_per_sample != 24)
        throw std::runtime_error("only 16- and 24-bit PCM are supported");
    if (!(audio.sample_rate > 0)) throw std::runtime_error("invalid WAVE sample rate");

    const std::size_t width = static_cast<std::size_t>(audio.bits_per_sample / 8);
    const std::size_t frame = width * static_cast<std::size_t>(audio.channels);
    const std::size_t frames = data.size() / frame;
    audio.samples.resize(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        double sum = 0.0;
        for (int c = 0; c < audio.channels; ++c) {
            const std::size_t p = f * frame + static_cast<std::size_t>(c) * width;
            if (width == 2) {
                sum += static_cast<std::int16_t>(le16(data, p)) / 32768.0;
            } else {
                std::int32_t v = static_cast<unsigned char>(data[p]) | static_cast<unsigned char>(data[p + 1]) << 8 |
                                 static_cast<unsigned char>(data[p + 2]) << 16;
                if (v & 0x800000) v -= 0x1000000;
                sum += v / 8388608.0;
            }
        }
        audio.samples[f] = sum / audio.channels;
    }
    return audio;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

AudioData read_wav(const std::string& path) { return parse_wav(read_file(path)); }

std::string encode_wav24(std::span<const double> mono, int sample_rate, int channels) {
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(mono.size() * 3 * static_cast<std::size_t>(channels));
    std::string out;
    out.reserve(44 + data_bytes);
    out += "RIFF";
    put_le(out, 36 + data_bytes, 4);
    out += "WAVEfmt ";
    put_le(out, 16, 4);
    put_le(out, 1, 2);
    put_le(out, static_cast<std::uint32_t>(channels), 2);
    put_le(out, static_cast<std::uint32_t>(sample_rate), 4);
    put_le(out, static_cast<std::uint32_t>(sample_rate * channels * 3), 4);
    put_le(out, static_cast<std::uint32_t>(channels * 3), 2);
    put_le(out, 24, 2);
    out += "data";
    put_le(out, data_bytes, 4);
    for (double s : mono) {
        const auto q = static_cast<std::int32_t>(std::lround(std::clamp(s, -1.0, 1.0) * 8388607.0));
        for (int c = 0; c < channels; ++c) put_le(out, static_cast<std::uint32_t>(q) & 0xFFFFFF, 3);
    }
    return out;
}

std::string encode_pcm16_stereo(std::span<const double> mono) {
    std::string out;
    out.reserve(mono.size() * 4);
    for (double s : mono) {
        const auto q = static_cast<std::int16_t>(std::lround(std::clamp(s, -1.0, 1.0) * 32767.0));
        put_le(out, static_cast<std::uint16_t>(q), 2);
        put_le(out, static_cast<std::uint16_t>(q), 2);
    }
    return out;
}

void write_file_atomic(const std::string& path, std::string_view bytes) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp = target;
    tmp += ".partial";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            out.close();
            fs::remove(tmp);
            throw std::runtime_error("failed writing " + target.string());
        }
    }
    fs::rename(tmp, target);
}

std::vector<double> resample_linear(std::span<const double> input, double from_rate, double to_rate) {
    if (input.empty() || from_rate == to_rate) return {input.begin(), input.end()};
    const auto frames = static_cast<std::size_t>(std::floor(static_cast<double>(input.size()) * to_rate / from_rate));
    std::vector<double> out(frames);
    const double ratio = from_rate / to_rate;
    for (std::size_t i = 0; i < frames; ++i) {
        const double pos = static_cast<double>(i) * ratio;
        const auto k = static_cast<std::size_t>(pos);
        const double t = pos - static_cast<double>(k);
        const double a = input[std::min(k, input.size() - 1)];
        const double b = input[std::min(k + 1, input.size() - 1)];
        out[i] = a + t * (b - a);
    }
    return out;
}

}  // namespace xmt
