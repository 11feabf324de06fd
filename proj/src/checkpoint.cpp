// SPDX-License-Identifier: Apache-2.0
#include "espo/substrate/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <vector>

namespace espo::nn {

namespace {

constexpr char kMagic[8] = {'E', 'S', 'P', 'O', 'C', 'K', 'P', 'T'};

void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u64(std::string& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_f32(std::string& out, float v) {
    std::uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32(out, bits);
}

struct Reader {
    const std::string& buf;
    std::size_t pos = 0;

    void need(std::size_t n) const {
        if (pos + n > buf.size()) throw InputDomainError("checkpoint: truncated file");
    }
    std::uint32_t u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= std::uint32_t(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 4;
        return v;
    }
    std::uint64_t u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= std::uint64_t(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
        pos += 8;
        return v;
    }
    float f32() {
        std::uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = buf.substr(pos, n);
        pos += n;
        return s;
    }
};

}  // namespace

void save_arrays(const std::string& path, const ParameterSet& params) {
    std::string out;
    out.append(kMagic, sizeof(kMagic));
    put_u32(out, kCheckpointVersion);
    put_u32(out, static_cast<std::uint32_t>(params.names().size()));
    for (const std::string& name : params.names()) {
        const Tensor& t = params.at(name);
        put_u32(out, static_cast<std::uint32_t>(name.size()));
        out.append(name);
        put_u32(out, static_cast<std::uint32_t>(t.rank()));
        for (std::size_t d : t.shape()) put_u64(out, d);
        for (std::size_t i = 0; i < t.size(); ++i) put_f32(out, static_cast<float>(t[i]));
    }

    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw ConfigError("checkpoint: cannot open for writing: " + tmp);
        f.write(out.data(), static_cast<std::streamsize>(out.size()));
        if (!f) throw ConfigError("checkpoint: write failed: " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) {
        throw ConfigError("checkpoint: rename failed: " + path);
    }
}

ParameterSet load_arrays(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ConfigError("checkpoint: cannot open: " + path);
    std::string buf((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

    Reader r{buf};
    if (r.bytes(sizeof(kMagic)) != std::string(kMagic, sizeof(kMagic))) {
        throw InputDomainError("checkpoint: bad magic");
    }
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion) {
        throw InputDomainError("checkpoint: unsupported version " + std::to_string(version));
    }
    const std::uint32_t count = r.u32();
    ParameterSet ps;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = r.u32();
        const std::string name = r.bytes(name_len);
        const std::uint32_t rank = r.u32();
        std::vector<std::size_t> shape(rank);
        for (std::uint32_t d = 0; d < rank; ++d) shape[d] = static_cast<std::size_t>(r.u64());
        Tensor t(shape);
        for (std::size_t j = 0; j < t.size(); ++j) t[j] = static_cast<double>(r.f32());
        ps.add(name, std::move(t));
    }
    if (r.pos != buf.size()) throw InputDomainError("checkpoint: trailing bytes");
    return ps;
}

}  // namespace espo::nn
