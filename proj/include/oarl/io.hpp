#pragma once

#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "oarl/common.hpp"

namespace oarl {

// Little-endian byte buffer. All on-disk formats go through these so the
// layout is identical on every platform.
class ByteWriter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u16(uint16_t v) { raw(&v, 2); }
    void u32(uint32_t v) { raw(&v, 4); }
    void u64(uint64_t v) { raw(&v, 8); }
    void f32(float v) { raw(&v, 4); }
    void f64(double v) { raw(&v, 8); }
    void bytes(const void* p, size_t n) { raw(p, n); }
    void str(const std::string& s) {
        u32(static_cast<uint32_t>(s.size()));
        raw(s.data(), s.size());
    }

    const std::vector<uint8_t>& data() const { return buf_; }

private:
    void raw(const void* p, size_t n) {
        const auto* b = static_cast<const uint8_t*>(p);
        buf_.insert(buf_.end(), b, b + n);
    }
    std::vector<uint8_t> buf_;
};

class ByteReader {
public:
    ByteReader(const uint8_t* data, size_t len) : data_(data), len_(len) {}
    explicit ByteReader(const std::vector<uint8_t>& buf) : data_(buf.data()), len_(buf.size()) {}

    uint8_t u8() { return take<uint8_t>(); }
    uint16_t u16() { return take<uint16_t>(); }
    uint32_t u32() { return take<uint32_t>(); }
    uint64_t u64() { return take<uint64_t>(); }
    float f32() { return take<float>(); }
    double f64() { return take<double>(); }
    void bytes(void* out, size_t n) {
        need(n);
        std::memcpy(out, data_ + pos_, n);
        pos_ += n;
    }
    std::string str() {
        uint32_t n = u32();
        need(n);
        std::string s(reinterpret_cast<const char*>(data_ + pos_), n);
        pos_ += n;
        return s;
    }
    size_t remaining() const { return len_ - pos_; }
    bool exhausted() const { return pos_ == len_; }

private:
    template <typename T>
    T take() {
        need(sizeof(T));
        T v;
        std::memcpy(&v, data_ + pos_, sizeof(T));
        pos_ += sizeof(T);
        return v;
    }
    void need(size_t n) {
        if (pos_ + n > len_)
            throw IoError(IoErrorKind::ChecksumMismatch, "file truncated: payload shorter than header declares");
    }
    const uint8_t* data_;
    size_t len_;
    size_t pos_ = 0;
};

// Writes magic + version + payload + trailing fnv1a64 checksum of everything
// before the checksum field.
void write_envelope(const std::string& path, const std::string& magic, uint32_t version,
                    const std::vector<uint8_t>& payload);

// Verifies magic, version and checksum; returns the payload. Errors are
// distinct per failure kind.
std::vector<uint8_t> read_envelope(const std::string& path, const std::string& magic,
                                   uint32_t expected_version);

}  // namespace oarl
