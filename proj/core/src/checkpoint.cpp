#include "iled/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "iled/errors.hpp"

namespace iled::diff {

namespace {

constexpr char kMagic[8] = {'I', 'L', 'E', 'D', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

// The build targets little-endian hosts; the writers below assume native
// byte order matches the on-disk format.
void write_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void write_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t read_u32(std::istream& is) {
    std::uint32_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 4);
    return v;
}
std::uint64_t read_u64(std::istream& is) {
    std::uint64_t v = 0;
    is.read(reinterpret_cast<char*>(&v), 8);
    return v;
}

}  // namespace

void save_blocks(const std::string& path, const std::map<std::string, Tensor>& blocks) {
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("checkpoint: cannot open for writing: " + path);
    os.write(kMagic, 8);
    write_u32(os, kVersion);
    write_u32(os, static_cast<std::uint32_t>(blocks.size()));
    for (const auto& [name, t] : blocks) {
        write_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        write_u32(os, static_cast<std::uint32_t>(t.shape.size()));
        for (auto d : t.shape) write_u64(os, static_cast<std::uint64_t>(d));
        os.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * 8));
    }
    if (!os) throw DataError("checkpoint: write failed: " + path);
}

std::map<std::string, Tensor> load_blocks(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("checkpoint: cannot open: " + path);
    char magic[8];
    is.read(magic, 8);
    if (!is || std::memcmp(magic, kMagic, 8) != 0) throw ConfigError("checkpoint: bad magic in " + path);
    const std::uint32_t version = read_u32(is);
    if (version != kVersion)
        throw ConfigError("checkpoint: unsupported version " + std::to_string(version) + " in " + path);
    const std::uint32_t count = read_u32(is);
    std::map<std::string, Tensor> blocks;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t nlen = read_u32(is);
        if (!is || nlen > 4096) throw ConfigError("checkpoint: corrupt block name in " + path);
        std::string name(nlen, '\0');
        is.read(name.data(), nlen);
        const std::uint32_t rank = read_u32(is);
        if (!is || rank > 8) throw ConfigError("checkpoint: corrupt block rank in " + path);
        std::vector<std::int64_t> shape(rank);
        for (auto& d : shape) d = static_cast<std::int64_t>(read_u64(is));
        const std::int64_t n = shape_product(shape);
        if (!is || n < 0 || n > (1ll << 32)) throw ConfigError("checkpoint: corrupt block shape in " + path);
        Tensor t(shape);
        is.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(t.data.size() * 8));
        if (!is) throw ConfigError("checkpoint: truncated data in " + path);
        blocks.emplace(std::move(name), std::move(t));
    }
    return blocks;
}

}  // namespace iled::diff
