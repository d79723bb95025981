#include "condseg/nifti.hpp"

#include <zlib.h>

#include <cmath>
#include <cstdint>
#include <cstring>

#include "condseg/error.hpp"

namespace condseg {

namespace {

constexpr int kHeaderSize = 348;

// NIfTI-1 datatype codes
enum : int16_t {
    DT_UINT8 = 2,
    DT_INT16 = 4,
    DT_INT32 = 8,
    DT_FLOAT32 = 16,
    DT_FLOAT64 = 64,
    DT_INT8 = 256,
    DT_UINT16 = 512,
    DT_UINT32 = 768,
};

template <typename T>
T bswap(T v) {
    T out;
    auto* a = reinterpret_cast<unsigned char*>(&v);
    auto* b = reinterpret_cast<unsigned char*>(&out);
    for (size_t i = 0; i < sizeof(T); ++i) b[i] = a[sizeof(T) - 1 - i];
    return out;
}

struct Reader {
    gzFile f;
    explicit Reader(const std::string& path) : f(gzopen(path.c_str(), "rb")) {
        if (!f) throw IoError("cannot open NIfTI file: " + path);
    }
    ~Reader() { gzclose(f); }
    void read(void* dst, size_t n, const std::string& path) {
        if (gzread(f, dst, static_cast<unsigned>(n)) != static_cast<int>(n))
            throw IoError("truncated NIfTI file: " + path);
    }
};

template <typename T>
void convert(const std::vector<char>& raw, size_t count, bool swap, float slope, float inter,
             std::vector<float>& out) {
    const T* src = reinterpret_cast<const T*>(raw.data());
    for (size_t i = 0; i < count; ++i) {
        T v = src[i];
        if (swap) v = bswap(v);
        out[i] = static_cast<float>(v) * slope + inter;
    }
}

}  // namespace

NiftiVolume read_nifti(const std::string& path) {
    Reader r(path);
    std::vector<char> hdr(kHeaderSize);
    r.read(hdr.data(), kHeaderSize, path);

    auto get_i32 = [&](int off) { return *reinterpret_cast<int32_t*>(hdr.data() + off); };
    auto get_i16 = [&](int off) { return *reinterpret_cast<int16_t*>(hdr.data() + off); };
    auto get_f32 = [&](int off) { return *reinterpret_cast<float*>(hdr.data() + off); };

    bool swap = false;
    int32_t sizeof_hdr = get_i32(0);
    if (sizeof_hdr != kHeaderSize) {
        if (bswap(sizeof_hdr) == kHeaderSize)
            swap = true;
        else
            throw IoError("not a NIfTI-1 file: " + path);
    }
    auto i16 = [&](int off) { int16_t v = get_i16(off); return swap ? bswap(v) : v; };
    auto f32 = [&](int off) { float v = get_f32(off); return swap ? bswap(v) : v; };

    const char* magic = hdr.data() + 344;
    if (std::strncmp(magic, "n+1", 3) != 0 && std::strncmp(magic, "ni1", 3) != 0)
        throw IoError("missing NIfTI magic: " + path);
    if (std::strncmp(magic, "ni1", 3) == 0)
        throw IoError("two-file NIfTI (.hdr/.img) not supported: " + path);

    const int ndim = i16(40);
    if (ndim < 2 || ndim > 7) throw IoError("unsupported NIfTI dim[0]: " + path);
    NiftiVolume v;
    v.nx = i16(42);
    v.ny = i16(44);
    v.nz = ndim >= 3 ? std::max<int>(1, i16(46)) : 1;
    for (int d = 4; d <= ndim; ++d)
        if (i16(40 + 2 * d) > 1)
            throw IoError("NIfTI volume has more than three non-trivial dims: " + path);
    if (v.nx <= 0 || v.ny <= 0 || v.nz <= 0) throw IoError("bad NIfTI dims: " + path);

    v.dx = f32(80);  // pixdim[1]
    v.dy = f32(84);
    v.dz = f32(88);

    const int16_t datatype = i16(70);
    float slope = f32(112);
    float inter = f32(116);
    if (slope == 0.0f) {
        slope = 1.0f;
        inter = 0.0f;
    }
    const float vox_offset = f32(108);
    const long skip = std::max(0L, static_cast<long>(std::lround(vox_offset)) - kHeaderSize);
    if (skip > 0) {
        std::vector<char> pad(static_cast<size_t>(skip));
        r.read(pad.data(), pad.size(), path);
    }

    const size_t count = static_cast<size_t>(v.nx) * v.ny * v.nz;
    size_t elem = 0;
    switch (datatype) {
        case DT_UINT8:
        case DT_INT8: elem = 1; break;
        case DT_INT16:
        case DT_UINT16: elem = 2; break;
        case DT_INT32:
        case DT_UINT32:
        case DT_FLOAT32: elem = 4; break;
        case DT_FLOAT64: elem = 8; break;
        default: throw IoError("unsupported NIfTI datatype " + std::to_string(datatype) + ": " + path);
    }
    std::vector<char> raw(count * elem);
    r.read(raw.data(), raw.size(), path);

    v.data.resize(count);
    switch (datatype) {
        case DT_UINT8: convert<uint8_t>(raw, count, false, slope, inter, v.data); break;
        case DT_INT8: convert<int8_t>(raw, count, false, slope, inter, v.data); break;
        case DT_INT16: convert<int16_t>(raw, count, swap, slope, inter, v.data); break;
        case DT_UINT16: convert<uint16_t>(raw, count, swap, slope, inter, v.data); break;
        case DT_INT32: convert<int32_t>(raw, count, swap, slope, inter, v.data); break;
        case DT_UINT32: convert<uint32_t>(raw, count, swap, slope, inter, v.data); break;
        case DT_FLOAT32: convert<float>(raw, count, swap, slope, inter, v.data); break;
        case DT_FLOAT64: convert<double>(raw, count, swap, slope, inter, v.data); break;
    }
    return v;
}

void write_nifti(const std::string& path, const NiftiVolume& v, bool as_uint8) {
    std::vector<char> hdr(kHeaderSize, 0);
    auto put_i32 = [&](int off, int32_t x) { std::memcpy(hdr.data() + off, &x, 4); };
    auto put_i16 = [&](int off, int16_t x) { std::memcpy(hdr.data() + off, &x, 2); };
    auto put_f32 = [&](int off, float x) { std::memcpy(hdr.data() + off, &x, 4); };

    put_i32(0, kHeaderSize);
    put_i16(40, 3);  // dim[0]
    put_i16(42, static_cast<int16_t>(v.nx));
    put_i16(44, static_cast<int16_t>(v.ny));
    put_i16(46, static_cast<int16_t>(v.nz));
    put_i16(48, 1);
    put_i16(50, 1);
    put_i16(52, 1);
    put_i16(54, 1);
    put_i16(70, as_uint8 ? DT_UINT8 : DT_FLOAT32);  // datatype
    put_i16(72, as_uint8 ? 8 : 32);                 // bitpix
    put_f32(76, 1.0f);                              // pixdim[0]
    put_f32(80, static_cast<float>(v.dx));
    put_f32(84, static_cast<float>(v.dy));
    put_f32(88, static_cast<float>(v.dz));
    put_f32(108, 352.0f);  // vox_offset
    put_f32(112, 1.0f);    // scl_slope
    put_f32(116, 0.0f);    // scl_inter
    hdr[123] = 2;          // xyzt_units: mm
    std::memcpy(hdr.data() + 344, "n+1", 4);

    gzFile f = gzopen(path.c_str(), "wb");
    if (!f) throw IoError("cannot create NIfTI file: " + path);
    bool ok = gzwrite(f, hdr.data(), kHeaderSize) == kHeaderSize;
    const char ext[4] = {0, 0, 0, 0};
    ok = ok && gzwrite(f, ext, 4) == 4;
    if (as_uint8) {
        std::vector<uint8_t> buf(v.data.size());
        for (size_t i = 0; i < v.data.size(); ++i)
            buf[i] = static_cast<uint8_t>(std::lround(v.data[i]));
        ok = ok && gzwrite(f, buf.data(), static_cast<unsigned>(buf.size())) ==
                       static_cast<int>(buf.size());
    } else {
        ok = ok && gzwrite(f, v.data.data(), static_cast<unsigned>(v.data.size() * 4)) ==
                       static_cast<int>(v.data.size() * 4);
    }
    gzclose(f);
    if (!ok) throw IoError("failed writing NIfTI file: " + path);
}

}  // namespace condseg
