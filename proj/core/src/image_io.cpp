#include "snp/image_io.hpp"

#include <png.h>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include "snp/errors.hpp"

namespace snp {

namespace {

void put_u32_le(std::vector<unsigned char>& out, uint32_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xff));
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xff));
}

uint32_t get_u32_le(const unsigned char* p) {
    return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
           (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

float get_f32_le(const unsigned char* p) {
    uint32_t bits = get_u32_le(p);
    float f;
    std::memcpy(&f, &bits, sizeof f);
    return f;
}

void put_f32_le(std::vector<unsigned char>& out, float f) {
    uint32_t bits;
    std::memcpy(&bits, &f, sizeof bits);
    put_u32_le(out, bits);
}

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    return bytes;
}

void write_all(const std::filesystem::path& path, const std::vector<unsigned char>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed: " + path.string());
}

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

}  // namespace

Gray read_depth_png(const std::filesystem::path& path) {
    FilePtr fp(std::fopen(path.string().c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path.string());

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8))
        throw IoError(path.string() + " is not a PNG file");

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_read_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    std::vector<png_bytep> row_ptrs;
    std::vector<unsigned char> pixels;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng failed reading " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_sig_bytes(png, 8);
    png_read_info(png, info);

    const png_uint_32 w = png_get_image_width(png, info);
    const png_uint_32 h = png_get_image_height(png, info);
    const int color = png_get_color_type(png, info);
    int depth_bits = png_get_bit_depth(png, info);
    if (color != PNG_COLOR_TYPE_GRAY) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError(path.string() + ": depth PNGs must be single-channel grayscale");
    }
    if (depth_bits < 8) {
        png_set_expand_gray_1_2_4_to_8(png);
        depth_bits = 8;
    }
    png_set_interlace_handling(png);
    png_read_update_info(png, info);

    const size_t rowbytes = png_get_rowbytes(png, info);
    pixels.resize(rowbytes * h);
    row_ptrs.resize(h);
    for (png_uint_32 y = 0; y < h; ++y) row_ptrs[y] = pixels.data() + y * rowbytes;
    png_read_image(png, row_ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);

    Gray out(static_cast<int>(h), static_cast<int>(w));
    if (depth_bits == 8) {
        for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = pixels[i] / 255.0f;
    } else {  // 16-bit PNG samples are big-endian
        for (size_t i = 0; i < out.v.size(); ++i) {
            const unsigned char* p = pixels.data() + 2 * i;
            out.v[i] = static_cast<float>((p[0] << 8) | p[1]) / 65535.0f;
        }
    }
    return out;
}

void write_depth_png(const std::filesystem::path& path, const Gray& depth, int bit_depth) {
    if (bit_depth != 8 && bit_depth != 16)
        throw ContractViolation("depth PNG bit depth must be 8 or 16");
    if (depth.h <= 0 || depth.w <= 0) throw ContractViolation("cannot write empty depth map");

    FilePtr fp(std::fopen(path.string().c_str(), "wb"));
    if (!fp) throw IoError("cannot open " + path.string() + " for writing");

    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) throw IoError("png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png_create_info_struct failed");
    }
    std::vector<unsigned char> pixels;
    std::vector<png_bytep> row_ptrs;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng failed writing " + path.string());
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, depth.w, depth.h, bit_depth, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);

    const size_t bytes_per = bit_depth == 8 ? 1 : 2;
    pixels.resize(depth.v.size() * bytes_per);
    for (size_t i = 0; i < depth.v.size(); ++i) {
        float v = depth.v[i];
        v = v < 0.0f ? 0.0f : (v > 1.0f ? 1.0f : v);
        if (bit_depth == 8) {
            pixels[i] = static_cast<unsigned char>(v * 255.0f + 0.5f);
        } else {
            const auto q = static_cast<uint16_t>(v * 65535.0f + 0.5f);
            pixels[2 * i] = static_cast<unsigned char>(q >> 8);  // big-endian
            pixels[2 * i + 1] = static_cast<unsigned char>(q & 0xff);
        }
    }
    row_ptrs.resize(depth.h);
    for (int y = 0; y < depth.h; ++y)
        row_ptrs[y] = pixels.data() + static_cast<size_t>(y) * depth.w * bytes_per;
    png_write_image(png, row_ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

Gray read_depth_snpd(const std::filesystem::path& path) {
    std::vector<unsigned char> bytes = read_all(path);
    if (bytes.size() < 16 || std::memcmp(bytes.data(), "SNPD", 4) != 0)
        throw IoError(path.string() + ": missing SNPD header");
    const uint32_t h = get_u32_le(bytes.data() + 4);
    const uint32_t w = get_u32_le(bytes.data() + 8);
    const size_t expected = 16 + static_cast<size_t>(h) * w * 4;
    if (h == 0 || w == 0 || bytes.size() != expected)
        throw IoError(path.string() + ": SNPD size mismatch (header says " + std::to_string(h) +
                      "x" + std::to_string(w) + ")");
    Gray out(static_cast<int>(h), static_cast<int>(w));
    for (size_t i = 0; i < out.v.size(); ++i) out.v[i] = get_f32_le(bytes.data() + 16 + 4 * i);
    return out;
}

void write_depth_snpd(const std::filesystem::path& path, const Gray& depth) {
    if (depth.h <= 0 || depth.w <= 0) throw ContractViolation("cannot write empty depth map");
    std::vector<unsigned char> bytes;
    bytes.reserve(16 + depth.v.size() * 4);
    bytes.insert(bytes.end(), {'S', 'N', 'P', 'D'});
    put_u32_le(bytes, static_cast<uint32_t>(depth.h));
    put_u32_le(bytes, static_cast<uint32_t>(depth.w));
    put_u32_le(bytes, 0);  // reserved
    for (float v : depth.v) put_f32_le(bytes, v);
    write_all(path, bytes);
}

Gray read_depth_file(const std::filesystem::path& path) {
    std::ifstream probe(path, std::ios::binary);
    if (!probe) throw IoError("cannot open " + path.string());
    unsigned char head[4] = {0, 0, 0, 0};
    probe.read(reinterpret_cast<char*>(head), 4);
    probe.close();
    if (std::memcmp(head, "SNPD", 4) == 0) return read_depth_snpd(path);
    if (head[0] == 0x89 && head[1] == 'P' && head[2] == 'N' && head[3] == 'G')
        return read_depth_png(path);
    throw IoError(path.string() + ": unrecognized depth format (expected PNG or SNPD)");
}

void write_latent(const std::filesystem::path& path, const Tensor4f& latent, int batch_index) {
    if (batch_index < 0 || batch_index >= latent.shape.n)
        throw ContractViolation("latent batch index out of range");
    std::vector<unsigned char> bytes;
    const size_t per = static_cast<size_t>(latent.shape.c) * latent.shape.h * latent.shape.w;
    bytes.reserve(16 + per * 4);
    bytes.insert(bytes.end(), {'S', 'N', 'P', 'L'});
    put_u32_le(bytes, static_cast<uint32_t>(latent.shape.c));
    put_u32_le(bytes, static_cast<uint32_t>(latent.shape.h));
    put_u32_le(bytes, static_cast<uint32_t>(latent.shape.w));
    const float* src = latent.data.data() + static_cast<size_t>(batch_index) * per;
    for (size_t i = 0; i < per; ++i) put_f32_le(bytes, src[i]);
    write_all(path, bytes);
}

Tensor4f read_latent(const std::filesystem::path& path) {
    std::vector<unsigned char> bytes = read_all(path);
    if (bytes.size() < 16 || std::memcmp(bytes.data(), "SNPL", 4) != 0)
        throw IoError(path.string() + ": missing SNPL header");
    const uint32_t c = get_u32_le(bytes.data() + 4);
    const uint32_t h = get_u32_le(bytes.data() + 8);
    const uint32_t w = get_u32_le(bytes.data() + 12);
    const size_t expected = 16 + static_cast<size_t>(c) * h * w * 4;
    if (c == 0 || h == 0 || w == 0 || bytes.size() != expected)
        throw IoError(path.string() + ": SNPL size mismatch");
    Tensor4f out({1, static_cast<int>(c), static_cast<int>(h), static_cast<int>(w)});
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] = get_f32_le(bytes.data() + 16 + 4 * i);
    return out;
}

std::vector<float> read_feat(const std::filesystem::path& path) {
    std::vector<unsigned char> bytes = read_all(path);
    if (bytes.empty() || bytes.size() % 4 != 0)
        throw IoError(path.string() + ": .feat files must be a non-empty multiple of 4 bytes");
    std::vector<float> out(bytes.size() / 4);
    for (size_t i = 0; i < out.size(); ++i) out[i] = get_f32_le(bytes.data() + 4 * i);
    return out;
}

void write_feat(const std::filesystem::path& path, std::span<const float> values) {
    std::vector<unsigned char> bytes;
    bytes.reserve(values.size() * 4);
    for (float v : values) put_f32_le(bytes, v);
    write_all(path, bytes);
}

}  // namespace snp
