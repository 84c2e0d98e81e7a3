#pragma once

// Read-only ZIP archive access, enough for OSV `all.zip` dumps: central
// directory walking, stored and deflated entries, and zip64 archives with
// many entries. Decompression is zlib's raw inflate.

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <zlib.h>

#include "osvtrace/errors.hpp"

namespace osvtrace {

struct ZipEntry {
    std::string name;
    std::uint64_t compressed_size = 0;
    std::uint64_t uncompressed_size = 0;
    std::uint64_t local_header_offset = 0;
    std::uint16_t method = 0; // 0 = stored, 8 = deflate

    bool is_directory() const { return !name.empty() && name.back() == '/'; }
};

class ZipReader {
  public:
    explicit ZipReader(const std::string& path) : path_(path), file_(path, std::ios::binary) {
        if (!file_) throw IoError("zip: cannot open " + path);
        file_.seekg(0, std::ios::end);
        file_size_ = static_cast<std::uint64_t>(file_.tellg());
        parse_central_directory();
    }

    const std::vector<ZipEntry>& entries() const { return entries_; }

    std::string read(const ZipEntry& entry) {
        // local header: 30 fixed bytes, then name and extra field
        std::vector<unsigned char> header = read_at(entry.local_header_offset, 30);
        if (u32(header.data()) != 0x04034b50) {
            throw ParseError("zip: bad local header for " + entry.name + " in " + path_);
        }
        const std::uint16_t name_len = u16(header.data() + 26);
        const std::uint16_t extra_len = u16(header.data() + 28);
        const std::uint64_t data_offset = entry.local_header_offset + 30 + name_len + extra_len;
        const std::vector<unsigned char> raw = read_at(data_offset, entry.compressed_size);

        if (entry.method == 0) {
            return std::string(reinterpret_cast<const char*>(raw.data()), raw.size());
        }
        if (entry.method != 8) {
            throw ParseError("zip: unsupported compression method " +
                             std::to_string(entry.method) + " for " + entry.name);
        }
        return inflate_raw(raw, entry.uncompressed_size, entry.name);
    }

  private:
    static std::uint16_t u16(const unsigned char* p) {
        return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
    }
    static std::uint32_t u32(const unsigned char* p) {
        return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
               (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
    }
    static std::uint64_t u64(const unsigned char* p) {
        return static_cast<std::uint64_t>(u32(p)) | (static_cast<std::uint64_t>(u32(p + 4)) << 32);
    }

    std::vector<unsigned char> read_at(std::uint64_t offset, std::uint64_t size) {
        if (offset + size > file_size_) throw ParseError("zip: truncated archive " + path_);
        std::vector<unsigned char> buf(size);
        file_.seekg(static_cast<std::streamoff>(offset));
        file_.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(size));
        if (!file_) throw IoError("zip: short read from " + path_);
        return buf;
    }

    void parse_central_directory() {
        // end-of-central-directory record: scan back over a possible comment
        const std::uint64_t scan = std::min<std::uint64_t>(file_size_, 65557);
        const std::vector<unsigned char> tail = read_at(file_size_ - scan, scan);
        std::size_t eocd = tail.size();
        for (std::size_t i = tail.size(); i >= 22; --i) {
            if (u32(tail.data() + i - 22) == 0x06054b50) {
                eocd = i - 22;
                break;
            }
        }
        if (eocd == tail.size()) throw ParseError("zip: no end-of-central-directory in " + path_);
        const unsigned char* e = tail.data() + eocd;
        std::uint64_t entry_count = u16(e + 10);
        std::uint64_t cd_offset = u32(e + 16);
        const std::uint64_t eocd_abs = file_size_ - scan + eocd;

        if (entry_count == 0xFFFF || cd_offset == 0xFFFFFFFF) {
            // zip64: locator sits directly before the EOCD record
            if (eocd_abs < 20) throw ParseError("zip: bad zip64 locator in " + path_);
            const std::vector<unsigned char> loc = read_at(eocd_abs - 20, 20);
            if (u32(loc.data()) != 0x07064b50) {
                throw ParseError("zip: missing zip64 locator in " + path_);
            }
            const std::uint64_t eocd64_offset = u64(loc.data() + 8);
            const std::vector<unsigned char> e64 = read_at(eocd64_offset, 56);
            if (u32(e64.data()) != 0x06064b50) {
                throw ParseError("zip: bad zip64 end-of-central-directory in " + path_);
            }
            entry_count = u64(e64.data() + 32);
            cd_offset = u64(e64.data() + 48);
        }

        std::uint64_t pos = cd_offset;
        entries_.reserve(entry_count);
        for (std::uint64_t i = 0; i < entry_count; ++i) {
            const std::vector<unsigned char> h = read_at(pos, 46);
            if (u32(h.data()) != 0x02014b50) {
                throw ParseError("zip: bad central directory entry in " + path_);
            }
            ZipEntry entry;
            entry.method = u16(h.data() + 10);
            entry.compressed_size = u32(h.data() + 20);
            entry.uncompressed_size = u32(h.data() + 24);
            const std::uint16_t name_len = u16(h.data() + 28);
            const std::uint16_t extra_len = u16(h.data() + 30);
            const std::uint16_t comment_len = u16(h.data() + 32);
            entry.local_header_offset = u32(h.data() + 42);

            const std::vector<unsigned char> name = read_at(pos + 46, name_len);
            entry.name.assign(reinterpret_cast<const char*>(name.data()), name.size());

            if (entry.compressed_size == 0xFFFFFFFF || entry.uncompressed_size == 0xFFFFFFFF ||
                entry.local_header_offset == 0xFFFFFFFF) {
                parse_zip64_extra(read_at(pos + 46 + name_len, extra_len), entry);
            }
            pos += 46ull + name_len + extra_len + comment_len;
            entries_.push_back(std::move(entry));
        }
    }

    static void parse_zip64_extra(const std::vector<unsigned char>& extra, ZipEntry& entry) {
        std::size_t pos = 0;
        while (pos + 4 <= extra.size()) {
            const std::uint16_t id = u16(extra.data() + pos);
            const std::uint16_t size = u16(extra.data() + pos + 2);
            if (id == 0x0001) {
                std::size_t f = pos + 4;
                // fields appear in order, only for values that overflowed
                if (entry.uncompressed_size == 0xFFFFFFFF && f + 8 <= pos + 4 + size) {
                    entry.uncompressed_size = u64(extra.data() + f);
                    f += 8;
                }
                if (entry.compressed_size == 0xFFFFFFFF && f + 8 <= pos + 4 + size) {
                    entry.compressed_size = u64(extra.data() + f);
                    f += 8;
                }
                if (entry.local_header_offset == 0xFFFFFFFF && f + 8 <= pos + 4 + size) {
                    entry.local_header_offset = u64(extra.data() + f);
                }
                return;
            }
            pos += 4ull + size;
        }
        throw ParseError("zip: zip64 sizes promised but extra field missing for " + entry.name);
    }

    std::string inflate_raw(const std::vector<unsigned char>& raw, std::uint64_t expected,
                            const std::string& name) {
        std::string out;
        out.resize(expected);
        z_stream zs{};
        if (inflateInit2(&zs, -15) != Z_OK) throw IoError("zip: inflateInit failed");
        zs.next_in = const_cast<Bytef*>(raw.data());
        zs.avail_in = static_cast<uInt>(raw.size());
        zs.next_out = reinterpret_cast<Bytef*>(out.data());
        zs.avail_out = static_cast<uInt>(out.size());
        const int rc = inflate(&zs, Z_FINISH);
        inflateEnd(&zs);
        if (rc != Z_STREAM_END || zs.total_out != expected) {
            throw ParseError("zip: inflate failed for " + name + " in " + path_);
        }
        return out;
    }

    std::string path_;
    std::ifstream file_;
    std::uint64_t file_size_ = 0;
    std::vector<ZipEntry> entries_;
};

} // namespace osvtrace
