#include "mv3/zip.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include <zlib.h>

#include "mv3/errors.hpp"

namespace mv3::zip {

namespace {

constexpr std::uint32_t kLocalSig = 0x04034b50;    // PK\x03\x04
constexpr std::uint32_t kCentralSig = 0x02014b50;  // PK\x01\x02
constexpr std::uint32_t kEocdSig = 0x06054b50;     // PK\x05\x06

std::uint16_t u16(const std::string& b, std::size_t off) {
    return static_cast<std::uint16_t>(static_cast<unsigned char>(b[off]) |
                                      (static_cast<unsigned char>(b[off + 1]) << 8));
}

std::uint32_t u32(const std::string& b, std::size_t off) {
    return static_cast<std::uint32_t>(static_cast<unsigned char>(b[off])) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 1])) << 8) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 2])) << 16) |
           (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 3])) << 24);
}

void put16(std::string& b, std::uint16_t v) {
    b.push_back(static_cast<char>(v & 0xff));
    b.push_back(static_cast<char>((v >> 8) & 0xff));
}

void put32(std::string& b, std::uint32_t v) {
    put16(b, static_cast<std::uint16_t>(v & 0xffff));
    put16(b, static_cast<std::uint16_t>((v >> 16) & 0xffff));
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MalformedArchive("cannot open archive: " + path.string());
    std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return data;
}

bool entry_name_ok(const std::string& name) {
    if (name.empty() || name.front() == '/' || name.find('\\') != std::string::npos) return false;
    // reject any ".." path segment
    std::size_t start = 0;
    while (start <= name.size()) {
        std::size_t slash = name.find('/', start);
        std::string_view seg = slash == std::string::npos
                              ? std::string_view(name).substr(start)
                              : std::string_view(name).substr(start, slash - start);
        if (seg == "..") return false;
        if (slash == std::string::npos) break;
        start = slash + 1;
    }
    return true;
}

std::string inflate_raw(const char* data, std::size_t comp_size, std::size_t uncomp_size) {
    std::string out(uncomp_size, '\0');
    z_stream zs{};
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw MalformedArchive("inflate init failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data));
    zs.avail_in = static_cast<uInt>(comp_size);
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(uncomp_size);
    const int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || zs.total_out != uncomp_size)
        throw MalformedArchive("corrupt deflate stream in archive entry");
    return out;
}

std::string deflate_raw(const std::string& data) {
    z_stream zs{};
    if (deflateInit2(&zs, Z_DEFAULT_COMPRESSION, Z_DEFLATED, -MAX_WBITS, 8,
                     Z_DEFAULT_STRATEGY) != Z_OK)
        throw IoError("deflate init failed");
    std::string out(deflateBound(&zs, static_cast<uLong>(data.size())), '\0');
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
    zs.avail_in = static_cast<uInt>(data.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = deflate(&zs, Z_FINISH);
    const std::size_t produced = zs.total_out;
    deflateEnd(&zs);
    if (rc != Z_STREAM_END) throw IoError("deflate failed");
    out.resize(produced);
    return out;
}

}  // namespace

std::map<std::string, std::string> read_archive(const std::filesystem::path& path) {
    const std::string buf = read_file(path);
    if (buf.size() < 22) throw MalformedArchive("archive too small: " + path.string());

    // End-of-central-directory record: scan backwards (comment may follow).
    std::size_t eocd = std::string::npos;
    const std::size_t scan_floor = buf.size() > 65557 ? buf.size() - 65557 : 0;
    for (std::size_t i = buf.size() - 22 + 1; i-- > scan_floor;) {
        if (u32(buf, i) == kEocdSig) {
            eocd = i;
            break;
        }
    }
    if (eocd == std::string::npos) throw MalformedArchive("no end-of-central-directory record");

    const std::uint16_t entry_count = u16(buf, eocd + 10);
    const std::uint32_t cd_size = u32(buf, eocd + 12);
    const std::uint32_t cd_offset = u32(buf, eocd + 16);
    if (static_cast<std::size_t>(cd_offset) + cd_size > buf.size())
        throw MalformedArchive("central directory out of bounds");

    std::map<std::string, std::string> files;
    std::size_t pos = cd_offset;
    for (std::uint16_t i = 0; i < entry_count; ++i) {
        if (pos + 46 > buf.size() || u32(buf, pos) != kCentralSig)
            throw MalformedArchive("bad central directory entry");
        const std::uint16_t method = u16(buf, pos + 10);
        const std::uint32_t crc = u32(buf, pos + 16);
        const std::uint32_t comp_size = u32(buf, pos + 20);
        const std::uint32_t uncomp_size = u32(buf, pos + 24);
        const std::uint16_t name_len = u16(buf, pos + 28);
        const std::uint16_t extra_len = u16(buf, pos + 30);
        const std::uint16_t comment_len = u16(buf, pos + 32);
        const std::uint32_t local_off = u32(buf, pos + 42);
        if (pos + 46 + name_len > buf.size()) throw MalformedArchive("truncated entry name");
        const std::string name = buf.substr(pos + 46, name_len);
        pos += 46 + static_cast<std::size_t>(name_len) + extra_len + comment_len;

        if (!name.empty() && name.back() == '/') continue;  // directory entry
        if (!entry_name_ok(name))
            throw MalformedArchive("unsafe entry path in archive: " + name);

        if (static_cast<std::size_t>(local_off) + 30 > buf.size() ||
            u32(buf, local_off) != kLocalSig)
            throw MalformedArchive("bad local header for entry: " + name);
        const std::uint16_t lname = u16(buf, local_off + 26);
        const std::uint16_t lextra = u16(buf, local_off + 28);
        const std::size_t data_off = static_cast<std::size_t>(local_off) + 30 + lname + lextra;
        if (data_off + comp_size > buf.size())
            throw MalformedArchive("truncated entry data: " + name);

        std::string content;
        if (method == 0) {
            if (comp_size != uncomp_size) throw MalformedArchive("stored size mismatch: " + name);
            content = buf.substr(data_off, comp_size);
        } else if (method == 8) {
            content = inflate_raw(buf.data() + data_off, comp_size, uncomp_size);
        } else {
            throw MalformedArchive("unsupported compression method in entry: " + name);
        }

        const auto actual_crc = crc32(0L, reinterpret_cast<const Bytef*>(content.data()),
                                      static_cast<uInt>(content.size()));
        if (static_cast<std::uint32_t>(actual_crc) != crc)
            throw MalformedArchive("CRC mismatch in entry: " + name);
        files[name] = std::move(content);
    }
    return files;
}

void write_archive(const std::filesystem::path& path,
                   const std::map<std::string, std::string>& files, bool deflate) {
    std::string out;
    struct CentralEntry {
        std::string name;
        std::uint32_t crc, comp_size, uncomp_size, offset;
        std::uint16_t method;
    };
    std::vector<CentralEntry> central;

    for (const auto& [name, content] : files) {
        const std::uint32_t crc = static_cast<std::uint32_t>(crc32(
            0L, reinterpret_cast<const Bytef*>(content.data()), static_cast<uInt>(content.size())));
        std::string payload = deflate ? deflate_raw(content) : content;
        std::uint16_t method = deflate ? 8 : 0;
        const std::uint32_t offset = static_cast<std::uint32_t>(out.size());

        put32(out, kLocalSig);
        put16(out, 20);      // version needed
        put16(out, 0);       // flags
        put16(out, method);
        put16(out, 0);       // mod time
        put16(out, 0);       // mod date
        put32(out, crc);
        put32(out, static_cast<std::uint32_t>(payload.size()));
        put32(out, static_cast<std::uint32_t>(content.size()));
        put16(out, static_cast<std::uint16_t>(name.size()));
        put16(out, 0);       // extra len
        out += name;
        out += payload;

        central.push_back({name, crc, static_cast<std::uint32_t>(payload.size()),
                           static_cast<std::uint32_t>(content.size()), offset, method});
    }

    const std::uint32_t cd_offset = static_cast<std::uint32_t>(out.size());
    for (const CentralEntry& e : central) {
        put32(out, kCentralSig);
        put16(out, 20);  // version made by
        put16(out, 20);  // version needed
        put16(out, 0);
        put16(out, e.method);
        put16(out, 0);
        put16(out, 0);
        put32(out, e.crc);
        put32(out, e.comp_size);
        put32(out, e.uncomp_size);
        put16(out, static_cast<std::uint16_t>(e.name.size()));
        put16(out, 0);  // extra
        put16(out, 0);  // comment
        put16(out, 0);  // disk
        put16(out, 0);  // internal attrs
        put32(out, 0);  // external attrs
        put32(out, e.offset);
        out += e.name;
    }
    const std::uint32_t cd_size = static_cast<std::uint32_t>(out.size()) - cd_offset;

    put32(out, kEocdSig);
    put16(out, 0);
    put16(out, 0);
    put16(out, static_cast<std::uint16_t>(central.size()));
    put16(out, static_cast<std::uint16_t>(central.size()));
    put32(out, cd_size);
    put32(out, cd_offset);
    put16(out, 0);  // comment len

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write archive: " + path.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

}  // namespace mv3::zip
