#include "oarl/io.hpp"

#include <cstdio>
#include <fstream>

namespace oarl {

void write_envelope(const std::string& path, const std::string& magic, uint32_t version,
                    const std::vector<uint8_t>& payload) {
    std::vector<uint8_t> file;
    file.reserve(magic.size() + 4 + payload.size() + 8);
    file.insert(file.end(), magic.begin(), magic.end());
    for (int i = 0; i < 4; ++i) file.push_back(static_cast<uint8_t>((version >> (8 * i)) & 0xff));
    file.insert(file.end(), payload.begin(), payload.end());
    uint64_t sum = fnv1a64(file.data(), file.size());
    for (int i = 0; i < 8; ++i) file.push_back(static_cast<uint8_t>((sum >> (8 * i)) & 0xff));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError(IoErrorKind::WriteFailed, "cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(file.data()), static_cast<std::streamsize>(file.size()));
    if (!out) throw IoError(IoErrorKind::WriteFailed, "short write: " + path);
}

std::vector<uint8_t> read_envelope(const std::string& path, const std::string& magic,
                                   uint32_t expected_version) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw IoError(IoErrorKind::ReadFailed, "cannot open: " + path);
    auto size = static_cast<size_t>(in.tellg());
    in.seekg(0);
    std::vector<uint8_t> file(size);
    if (size > 0) in.read(reinterpret_cast<char*>(file.data()), static_cast<std::streamsize>(size));
    if (!in) throw IoError(IoErrorKind::ReadFailed, "short read: " + path);

    const size_t header = magic.size() + 4;
    if (size < header + 8) throw IoError(IoErrorKind::ChecksumMismatch, "file truncated: " + path);

    if (std::memcmp(file.data(), magic.data(), magic.size()) != 0)
        throw IoError(IoErrorKind::BadMagic, "bad magic in " + path + " (expected \"" + magic + "\")");

    uint32_t version = 0;
    for (int i = 3; i >= 0; --i) version = (version << 8) | file[magic.size() + static_cast<size_t>(i)];
    if (version != expected_version)
        throw IoError(IoErrorKind::VersionMismatch,
                      "format version " + std::to_string(version) + " in " + path + ", expected " +
                          std::to_string(expected_version));

    uint64_t stored = 0;
    for (int i = 7; i >= 0; --i) stored = (stored << 8) | file[size - 8 + static_cast<size_t>(i)];
    uint64_t actual = fnv1a64(file.data(), size - 8);
    if (stored != actual)
        throw IoError(IoErrorKind::ChecksumMismatch, "checksum mismatch in " + path);

    return std::vector<uint8_t>(file.begin() + static_cast<std::ptrdiff_t>(header),
                                file.end() - 8);
}

}  // namespace oarl
