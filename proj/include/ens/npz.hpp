#pragma once

// Minimal reader/writer for ZIP archives of NPY arrays (the numpy `.npz` layout).
// Reads stored and deflated entries, including zip64 size records; writes deflated
// entries with a fixed timestamp so identical input gives identical bytes.

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "ens/error.hpp"

namespace ens::npz {

/// An n-d float array in C (row-major) order.
struct NpyArray {
    std::vector<std::size_t> shape;
    std::vector<float> data;

    std::size_t element_count() const {
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }
};

namespace detail {

inline std::uint16_t get_u16(const unsigned char* p) { return std::uint16_t(p[0] | (p[1] << 8)); }
inline std::uint32_t get_u32(const unsigned char* p) {
    return std::uint32_t(p[0]) | (std::uint32_t(p[1]) << 8) | (std::uint32_t(p[2]) << 16) |
           (std::uint32_t(p[3]) << 24);
}
inline std::uint64_t get_u64(const unsigned char* p) {
    return std::uint64_t(get_u32(p)) | (std::uint64_t(get_u32(p + 4)) << 32);
}
inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(char(v & 0xff));
    out.push_back(char(v >> 8));
}
inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

inline float half_to_float(std::uint16_t h) {
    const std::uint32_t sign = std::uint32_t(h & 0x8000) << 16;
    std::uint32_t exp = (h >> 10) & 0x1f;
    std::uint32_t mant = h & 0x3ff;
    std::uint32_t bits;
    if (exp == 0) {
        if (mant == 0) {
            bits = sign;
        } else {
            exp = 127 - 15 + 1;
            while ((mant & 0x400) == 0) {
                mant <<= 1;
                --exp;
            }
            mant &= 0x3ff;
            bits = sign | (exp << 23) | (mant << 13);
        }
    } else if (exp == 0x1f) {
        bits = sign | 0x7f800000u | (mant << 13);
    } else {
        bits = sign | ((exp + 127 - 15) << 23) | (mant << 13);
    }
    return std::bit_cast<float>(bits);
}

/// Value of `key` in a numpy header dict literal, as raw text.
inline std::string_view dict_value(std::string_view header, std::string_view key) {
    for (char q : {'\'', '"'}) {
        std::string quoted;
        quoted += q;
        quoted += key;
        quoted += q;
        auto pos = header.find(quoted);
        if (pos == std::string_view::npos) continue;
        pos = header.find(':', pos + quoted.size());
        if (pos == std::string_view::npos) break;
        ++pos;
        while (pos < header.size() && header[pos] == ' ') ++pos;
        std::size_t end = pos;
        if (end < header.size() && header[end] == '(') {
            end = header.find(')', end);
            if (end == std::string_view::npos) break;
            return header.substr(pos, end - pos + 1);
        }
        if (end < header.size() && (header[end] == '\'' || header[end] == '"')) {
            const char qq = header[end];
            end = header.find(qq, end + 1);
            if (end == std::string_view::npos) break;
            return header.substr(pos + 1, end - pos - 1);
        }
        while (end < header.size() && header[end] != ',' && header[end] != '}') ++end;
        auto v = header.substr(pos, end - pos);
        while (!v.empty() && v.back() == ' ') v.remove_suffix(1);
        return v;
    }
    throw FormatError("npy header lacks key '" + std::string(key) + "'");
}

inline std::vector<std::size_t> parse_shape(std::string_view tuple) {
    std::vector<std::size_t> shape;
    if (tuple.size() < 2 || tuple.front() != '(' || tuple.back() != ')') {
        throw FormatError("malformed npy shape '" + std::string(tuple) + "'");
    }
    std::size_t i = 1;
    while (i + 1 < tuple.size()) {
        while (i + 1 < tuple.size() && (tuple[i] == ' ' || tuple[i] == ',')) ++i;
        if (i + 1 >= tuple.size()) break;
        std::size_t v = 0;
        bool any = false;
        while (i + 1 < tuple.size() && tuple[i] >= '0' && tuple[i] <= '9') {
            v = v * 10 + std::size_t(tuple[i] - '0');
            ++i;
            any = true;
        }
        if (!any) throw FormatError("malformed npy shape '" + std::string(tuple) + "'");
        shape.push_back(v);
    }
    return shape;
}

template <typename T>
T load_swapped(const unsigned char* p, bool swap) {
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, p, sizeof(T));
    if (swap) std::reverse(buf, buf + sizeof(T));
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

inline std::vector<float> convert(const unsigned char* p, std::size_t count, std::string_view descr) {
    if (descr.size() < 3) throw FormatError("unsupported npy dtype '" + std::string(descr) + "'");
    const char order = descr[0];
    const bool swap = (order == '>' && std::endian::native == std::endian::little) ||
                      (order == '<' && std::endian::native == std::endian::big);
    const auto kind = descr.substr(1);
    std::vector<float> out(count);
    auto each = [&](auto tag) {
        using T = decltype(tag);
        for (std::size_t i = 0; i < count; ++i) out[i] = float(load_swapped<T>(p + i * sizeof(T), swap));
    };
    if (kind == "f4") each(float{});
    else if (kind == "f8") each(double{});
    else if (kind == "f2") {
        for (std::size_t i = 0; i < count; ++i) out[i] = half_to_float(load_swapped<std::uint16_t>(p + 2 * i, swap));
    }
    else if (kind == "u1" || kind == "b1") each(std::uint8_t{});
    else if (kind == "i1") each(std::int8_t{});
    else if (kind == "u2") each(std::uint16_t{});
    else if (kind == "i2") each(std::int16_t{});
    else if (kind == "u4") each(std::uint32_t{});
    else if (kind == "i4") each(std::int32_t{});
    else if (kind == "u8") each(std::uint64_t{});
    else if (kind == "i8") each(std::int64_t{});
    else throw FormatError("unsupported npy dtype '" + std::string(descr) + "'");
    return out;
}

inline std::size_t dtype_size(std::string_view descr) {
    const auto kind = descr.substr(1);
    return std::size_t(kind[1] - '0');
}

/// Reorders a column-major buffer into row-major order.
inline std::vector<float> fortran_to_c(const std::vector<float>& src, const std::vector<std::size_t>& shape) {
    const std::size_t n = src.size();
    const std::size_t rank = shape.size();
    if (rank < 2) return src;
    std::vector<std::size_t> fstride(rank, 1);
    for (std::size_t d = 1; d < rank; ++d) fstride[d] = fstride[d - 1] * shape[d - 1];
    std::vector<float> out(n);
    std::vector<std::size_t> index(rank, 0);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t off = 0;
        for (std::size_t d = 0; d < rank; ++d) off += index[d] * fstride[d];
        out[i] = src[off];
        for (std::size_t d = rank; d-- > 0;) {
            if (++index[d] < shape[d]) break;
            index[d] = 0;
        }
    }
    return out;
}

} // namespace detail

inline NpyArray parse_npy(std::string_view bytes) {
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data());
    if (bytes.size() < 10 || p[0] != 0x93 || bytes.substr(1, 5) != "NUMPY") {
        throw FormatError("bad npy magic");
    }
    const unsigned major = p[6];
    std::size_t header_len;
    std::size_t header_start;
    if (major == 1) {
        header_len = detail::get_u16(p + 8);
        header_start = 10;
    } else if (major == 2 || major == 3) {
        if (bytes.size() < 12) throw FormatError("truncated npy header");
        header_len = detail::get_u32(p + 8);
        header_start = 12;
    } else {
        throw FormatError("unsupported npy version " + std::to_string(major));
    }
    if (header_start + header_len > bytes.size()) throw FormatError("truncated npy header");
    const auto header = bytes.substr(header_start, header_len);
    const auto descr = std::string(detail::dict_value(header, "descr"));
    const auto fortran = detail::dict_value(header, "fortran_order");
    NpyArray arr;
    arr.shape = detail::parse_shape(detail::dict_value(header, "shape"));
    const std::size_t count = arr.element_count();
    const std::size_t width = detail::dtype_size(descr);
    const std::size_t body = header_start + header_len;
    if (bytes.size() - body < count * width) {
        throw FormatError("npy payload holds " + std::to_string(bytes.size() - body) + " bytes, expected " +
                          std::to_string(count * width));
    }
    arr.data = detail::convert(p + body, count, descr);
    if (fortran == "True") arr.data = detail::fortran_to_c(arr.data, arr.shape);
    return arr;
}

/// NPY v1.0, little-endian float32, C order, header padded to 64 bytes.
inline std::string serialize_npy(const NpyArray& arr) {
    if (arr.data.size() != arr.element_count()) throw ShapeError("npy data size does not match shape");
    std::string shape = "(";
    for (std::size_t i = 0; i < arr.shape.size(); ++i) {
        shape += std::to_string(arr.shape[i]);
        if (arr.shape.size() == 1 || i + 1 < arr.shape.size()) shape += ", ";
    }
    if (arr.shape.size() == 1) shape.pop_back();
    shape += ")";
    std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': " + shape + ", }";
    std::size_t total = 10 + dict.size() + 1;
    dict.append((64 - total % 64) % 64, ' ');
    dict.push_back('\n');

    std::string out;
    out.reserve(10 + dict.size() + arr.data.size() * 4);
    out.push_back(char(0x93));
    out += "NUMPY";
    out.push_back(char(1));
    out.push_back(char(0));
    detail::put_u16(out, std::uint16_t(dict.size()));
    out += dict;
    const std::size_t body = out.size();
    out.resize(body + arr.data.size() * 4);
    if constexpr (std::endian::native == std::endian::little) {
        std::memcpy(out.data() + body, arr.data.data(), arr.data.size() * 4);
    } else {
        for (std::size_t i = 0; i < arr.data.size(); ++i) {
            auto bits = std::bit_cast<std::uint32_t>(arr.data[i]);
            for (int k = 0; k < 4; ++k) out[body + 4 * i + k] = char((bits >> (8 * k)) & 0xff);
        }
    }
    return out;
}

class ZipReader {
public:
    struct Entry {
        std::string name;
        std::uint16_t method = 0;
        std::uint32_t crc = 0;
        std::uint64_t compressed = 0;
        std::uint64_t uncompressed = 0;
        std::uint64_t local_offset = 0;
    };

    explicit ZipReader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
        if (!in_) throw IoError("cannot open " + path.string());
        in_.seekg(0, std::ios::end);
        const auto file_size = std::uint64_t(in_.tellg());
        const std::uint64_t tail = std::min<std::uint64_t>(file_size, 65535 + 22 + 20);
        auto buf = read_at(file_size - tail, tail);
        const auto* p = reinterpret_cast<const unsigned char*>(buf.data());
        std::size_t eocd = std::string::npos;
        for (std::size_t i = tail >= 22 ? tail - 22 + 1 : 0; i-- > 0;) {
            if (detail::get_u32(p + i) == 0x06054b50) {
                eocd = i;
                break;
            }
        }
        if (eocd == std::string::npos) throw FormatError(path.string() + ": not a zip archive");
        std::uint64_t count = detail::get_u16(p + eocd + 10);
        std::uint64_t cd_size = detail::get_u32(p + eocd + 12);
        std::uint64_t cd_offset = detail::get_u32(p + eocd + 16);
        if (eocd >= 20 && detail::get_u32(p + eocd - 20) == 0x07064b50) {
            const std::uint64_t z64_off = detail::get_u64(p + eocd - 20 + 8);
            auto z = read_at(z64_off, 56);
            const auto* zp = reinterpret_cast<const unsigned char*>(z.data());
            if (detail::get_u32(zp) != 0x06064b50) throw FormatError(path.string() + ": bad zip64 record");
            count = detail::get_u64(zp + 32);
            cd_size = detail::get_u64(zp + 40);
            cd_offset = detail::get_u64(zp + 48);
        }
        auto cd = read_at(cd_offset, cd_size);
        const auto* c = reinterpret_cast<const unsigned char*>(cd.data());
        std::size_t pos = 0;
        for (std::uint64_t k = 0; k < count; ++k) {
            if (pos + 46 > cd.size() || detail::get_u32(c + pos) != 0x02014b50) {
                throw FormatError(path.string() + ": corrupt central directory");
            }
            Entry e;
            e.method = detail::get_u16(c + pos + 10);
            e.crc = detail::get_u32(c + pos + 16);
            e.compressed = detail::get_u32(c + pos + 20);
            e.uncompressed = detail::get_u32(c + pos + 24);
            const std::size_t nlen = detail::get_u16(c + pos + 28);
            const std::size_t xlen = detail::get_u16(c + pos + 30);
            const std::size_t clen = detail::get_u16(c + pos + 32);
            e.local_offset = detail::get_u32(c + pos + 42);
            if (pos + 46 + nlen + xlen > cd.size()) throw FormatError(path.string() + ": corrupt central directory");
            e.name.assign(cd.data() + pos + 46, nlen);
            apply_zip64_extra(e, c + pos + 46 + nlen, xlen);
            entries_.push_back(std::move(e));
            pos += 46 + nlen + xlen + clen;
        }
    }

    const std::vector<Entry>& entries() const noexcept { return entries_; }

    const Entry* find(std::string_view name) const {
        for (const auto& e : entries_) {
            if (e.name == name) return &e;
        }
        return nullptr;
    }

    std::string read(const Entry& e) {
        auto local = read_at(e.local_offset, 30);
        const auto* lp = reinterpret_cast<const unsigned char*>(local.data());
        if (detail::get_u32(lp) != 0x04034b50) throw FormatError(path_.string() + ": bad local header for " + e.name);
        const std::uint64_t data_off = e.local_offset + 30 + detail::get_u16(lp + 26) + detail::get_u16(lp + 28);
        auto raw = read_at(data_off, e.compressed);
        std::string out;
        if (e.method == 0) {
            out = std::move(raw);
        } else if (e.method == 8) {
            out.resize(e.uncompressed);
            z_stream zs{};
            if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw FormatError("inflateInit failed");
            zs.next_in = reinterpret_cast<Bytef*>(raw.data());
            zs.avail_in = uInt(raw.size());
            zs.next_out = reinterpret_cast<Bytef*>(out.data());
            zs.avail_out = uInt(out.size());
            const int rc = inflate(&zs, Z_FINISH);
            inflateEnd(&zs);
            if (rc != Z_STREAM_END || zs.total_out != e.uncompressed) {
                throw FormatError(path_.string() + ": corrupt deflate stream in " + e.name);
            }
        } else {
            throw FormatError(path_.string() + ": unsupported compression method " + std::to_string(e.method));
        }
        const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(out.data()), uInt(out.size()));
        if (crc != e.crc) throw FormatError(path_.string() + ": crc mismatch in " + e.name);
        return out;
    }

private:
    std::string read_at(std::uint64_t offset, std::uint64_t size) {
        std::string buf(size, '\0');
        in_.clear();
        in_.seekg(std::streamoff(offset));
        in_.read(buf.data(), std::streamsize(size));
        if (std::uint64_t(in_.gcount()) != size) throw FormatError(path_.string() + ": truncated archive");
        return buf;
    }

    static void apply_zip64_extra(Entry& e, const unsigned char* x, std::size_t len) {
        std::size_t pos = 0;
        while (pos + 4 <= len) {
            const auto id = detail::get_u16(x + pos);
            const auto sz = detail::get_u16(x + pos + 2);
            if (id == 0x0001) {
                std::size_t q = pos + 4;
                if (e.uncompressed == 0xffffffffu && q + 8 <= pos + 4 + sz) { e.uncompressed = detail::get_u64(x + q); q += 8; }
                if (e.compressed == 0xffffffffu && q + 8 <= pos + 4 + sz) { e.compressed = detail::get_u64(x + q); q += 8; }
                if (e.local_offset == 0xffffffffu && q + 8 <= pos + 4 + sz) { e.local_offset = detail::get_u64(x + q); }
            }
            pos += 4 + sz;
        }
    }

    std::filesystem::path path_;
    std::ifstream in_;
    std::vector<Entry> entries_;
};

class ZipWriter {
public:
    explicit ZipWriter(const std::filesystem::path& path, int level = 1)
        : path_(path), out_(path, std::ios::binary | std::ios::trunc), level_(level) {
        if (!out_) throw IoError("cannot create " + path.string());
    }

    void add(const std::string& name, std::string_view data) {
        if (data.size() >= 0xffffffffu) throw IoError(name + ": entry too large for a non-zip64 archive");
        const auto crc = std::uint32_t(crc32(0L, reinterpret_cast<const Bytef*>(data.data()), uInt(data.size())));
        std::string packed(deflateBound(nullptr, uLong(data.size())) + 64, '\0');
        z_stream zs{};
        if (deflateInit2(&zs, level_, Z_DEFLATED, -MAX_WBITS, 8, Z_DEFAULT_STRATEGY) != Z_OK) {
            throw IoError("deflateInit failed");
        }
        zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
        zs.avail_in = uInt(data.size());
        zs.next_out = reinterpret_cast<Bytef*>(packed.data());
        zs.avail_out = uInt(packed.size());
        const int rc = deflate(&zs, Z_FINISH);
        const auto csize = zs.total_out;
        deflateEnd(&zs);
        if (rc != Z_STREAM_END) throw IoError("deflate failed for " + name);
        packed.resize(csize);

        Record r{name, crc, std::uint32_t(csize), std::uint32_t(data.size()), offset_};
        std::string header;
        detail::put_u32(header, 0x04034b50);
        common_fields(header, r);
        detail::put_u16(header, 0); // extra length
        header += name;
        write(header);
        write(packed);
        records_.push_back(std::move(r));
    }

    void add_array(const std::string& name, const NpyArray& arr) { add(name + ".npy", serialize_npy(arr)); }

    void finish() {
        if (finished_) return;
        const std::uint64_t cd_offset = offset_;
        std::string cd;
        for (const auto& r : records_) {
            detail::put_u32(cd, 0x02014b50);
            detail::put_u16(cd, 20); // made by
            common_fields(cd, r);
            detail::put_u16(cd, 0); // extra
            detail::put_u16(cd, 0); // comment
            detail::put_u16(cd, 0); // disk
            detail::put_u16(cd, 0); // internal attrs
            detail::put_u32(cd, 0); // external attrs
            detail::put_u32(cd, std::uint32_t(r.offset));
            cd += r.name;
        }
        write(cd);
        std::string end;
        detail::put_u32(end, 0x06054b50);
        detail::put_u16(end, 0);
        detail::put_u16(end, 0);
        detail::put_u16(end, std::uint16_t(records_.size()));
        detail::put_u16(end, std::uint16_t(records_.size()));
        detail::put_u32(end, std::uint32_t(cd.size()));
        detail::put_u32(end, std::uint32_t(cd_offset));
        detail::put_u16(end, 0);
        write(end);
        out_.flush();
        if (!out_) throw IoError("write failed for " + path_.string());
        out_.close();
        finished_ = true;
    }

    ~ZipWriter() {
        try {
            finish();
        } catch (...) {
        }
    }

private:
    struct Record {
        std::string name;
        std::uint32_t crc;
        std::uint32_t csize;
        std::uint32_t usize;
        std::uint64_t offset;
    };

    static void common_fields(std::string& h, const Record& r) {
        detail::put_u16(h, 20); // version needed
        detail::put_u16(h, 0);  // flags
        detail::put_u16(h, 8);  // deflate
        detail::put_u16(h, 0);  // time 00:00:00
        detail::put_u16(h, 33); // date 1980-01-01
        detail::put_u32(h, r.crc);
        detail::put_u32(h, r.csize);
        detail::put_u32(h, r.usize);
        detail::put_u16(h, std::uint16_t(r.name.size()));
    }

    void write(const std::string& s) {
        if (offset_ + s.size() >= 0xffffffffu) throw IoError(path_.string() + ": archive exceeds 4 GiB");
        out_.write(s.data(), std::streamsize(s.size()));
        offset_ += s.size();
    }

    std::filesystem::path path_;
    std::ofstream out_;
    int level_;
    std::uint64_t offset_ = 0;
    std::vector<Record> records_;
    bool finished_ = false;
};

/// Reads array `name` (with or without the `.npy` suffix) from an npz archive.
inline NpyArray read_array(ZipReader& zip, const std::string& name) {
    const auto* e = zip.find(name + ".npy");
    if (!e) e = zip.find(name);
    if (!e) throw MissingArray(name);
    return parse_npy(zip.read(*e));
}

} // namespace ens::npz
