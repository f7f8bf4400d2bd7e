#include "lens/codec.hpp"

#include "lens/error.hpp"

#include <cstdio>
#include <csetjmp>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

#include <jpeglib.h>
#include <openssl/evp.h>
#include <png.h>
#include <zlib.h>

namespace lens {

RasterImage decode_png(std::span<const std::uint8_t> bytes) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
        throw Error(ErrorCode::parse, std::string("PNG header: ") + img.message);
    }
    const bool alpha = (img.format & PNG_FORMAT_FLAG_ALPHA) != 0;
    img.format = alpha ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
    std::vector<std::uint8_t> pixels(PNG_IMAGE_SIZE(img));
    if (!png_image_finish_read(&img, nullptr, pixels.data(), 0, nullptr)) {
        std::string message = img.message;
        png_image_free(&img);
        throw Error(ErrorCode::parse, "PNG decode: " + message);
    }
    return RasterImage(static_cast<int>(img.width), static_cast<int>(img.height), alpha ? 4 : 3, std::move(pixels));
}

Bytes encode_png(const RasterImage& image, PngColor color) {
    png_image img{};
    img.version = PNG_IMAGE_VERSION;
    img.width = static_cast<png_uint_32>(image.width());
    img.height = static_cast<png_uint_32>(image.height());

    std::vector<std::uint8_t> gray;
    const void* buffer = image.data().data();
    img.format = image.has_alpha() ? PNG_FORMAT_RGBA : PNG_FORMAT_RGB;
    if (color == PngColor::automatic && !image.has_alpha()) {
        const auto px = image.data();
        bool is_gray = true;
        for (std::size_t i = 0; i < px.size() && is_gray; i += 3) {
            is_gray = px[i] == px[i + 1] && px[i] == px[i + 2];
        }
        if (is_gray) {
            gray.resize(px.size() / 3);
            for (std::size_t i = 0; i < gray.size(); ++i) {
                gray[i] = px[i * 3];
            }
            img.format = PNG_FORMAT_GRAY;
            buffer = gray.data();
        }
    }

    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&img, nullptr, &size, 0, buffer, 0, nullptr)) {
        throw Error(ErrorCode::io, std::string("PNG encode: ") + img.message);
    }
    Bytes out(size);
    if (!png_image_write_to_memory(&img, out.data(), &size, 0, buffer, 0, nullptr)) {
        throw Error(ErrorCode::io, std::string("PNG encode: ") + img.message);
    }
    out.resize(size);
    return out;
}

namespace {

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* mgr = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, mgr->message);
    std::longjmp(mgr->jump, 1);
}

} // namespace

RasterImage decode_jpeg(std::span<const std::uint8_t> bytes) {
    jpeg_decompress_struct cinfo{};
    JpegErrorManager err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    std::vector<std::uint8_t> pixels;
    int width = 0;
    int height = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw Error(ErrorCode::parse, std::string("JPEG decode: ") + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    const bool cmyk = cinfo.jpeg_color_space == JCS_CMYK || cinfo.jpeg_color_space == JCS_YCCK;
    cinfo.out_color_space = cmyk ? JCS_CMYK : JCS_RGB;
    jpeg_start_decompress(&cinfo);
    width = static_cast<int>(cinfo.output_width);
    height = static_cast<int>(cinfo.output_height);
    const int comps = cinfo.output_components;
    std::vector<std::uint8_t> row(static_cast<std::size_t>(width) * comps);
    pixels.resize(static_cast<std::size_t>(width) * height * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW rows[1] = {row.data()};
        const int y = static_cast<int>(cinfo.output_scanline);
        jpeg_read_scanlines(&cinfo, rows, 1);
        std::uint8_t* dst = pixels.data() + static_cast<std::size_t>(y) * width * 3;
        for (int x = 0; x < width; ++x) {
            if (cmyk) {
                // Adobe CMYK JPEGs store inverted channels.
                const int k = row[x * 4 + 3];
                for (int c = 0; c < 3; ++c) {
                    dst[x * 3 + c] = static_cast<std::uint8_t>(row[x * 4 + c] * k / 255);
                }
            } else {
                std::copy_n(row.data() + x * 3, 3, dst + x * 3);
            }
        }
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return RasterImage(width, height, 3, std::move(pixels));
}

std::optional<ImageHeader> probe_image(std::span<const std::uint8_t> b) {
    static constexpr std::uint8_t png_sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};
    if (b.size() >= 24 && std::equal(png_sig, png_sig + 8, b.begin())) {
        auto be32 = [&](std::size_t o) {
            return (static_cast<std::uint32_t>(b[o]) << 24) | (static_cast<std::uint32_t>(b[o + 1]) << 16) |
                   (static_cast<std::uint32_t>(b[o + 2]) << 8) | b[o + 3];
        };
        return ImageHeader{static_cast<int>(be32(16)), static_cast<int>(be32(20))};
    }
    if (b.size() >= 4 && b[0] == 0xFF && b[1] == 0xD8) {
        std::size_t i = 2;
        while (i + 9 < b.size()) {
            if (b[i] != 0xFF) {
                ++i;
                continue;
            }
            const std::uint8_t marker = b[i + 1];
            if (marker == 0xFF || marker == 0x01 || (marker >= 0xD0 && marker <= 0xD7)) {
                i += marker == 0xFF ? 1 : 2;
                continue;
            }
            const std::size_t len = (static_cast<std::size_t>(b[i + 2]) << 8) | b[i + 3];
            const bool sof = marker >= 0xC0 && marker <= 0xCF && marker != 0xC4 && marker != 0xC8 && marker != 0xCC;
            if (sof) {
                const int h = (b[i + 5] << 8) | b[i + 6];
                const int w = (b[i + 7] << 8) | b[i + 8];
                return ImageHeader{w, h};
            }
            i += 2 + len;
        }
    }
    return std::nullopt;
}

RasterImage read_png(const std::filesystem::path& path) {
    const Bytes bytes = read_file(path);
    return decode_png(bytes);
}

void write_png(const std::filesystem::path& path, const RasterImage& image, PngColor color) {
    write_file_atomic(path, encode_png(image, color));
}

Bytes read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::io, "cannot open " + path.string());
    }
    return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

std::string read_text(const std::filesystem::path& path) {
    const Bytes bytes = read_file(path);
    return std::string(bytes.begin(), bytes.end());
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    thread_local std::mt19937_64 rng{std::random_device{}()};
    std::filesystem::path tmp = path;
    tmp += ".tmp" + std::to_string(rng() % 1000000000);
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(ErrorCode::io, "cannot write " + tmp.string());
        }
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) {
            throw Error(ErrorCode::io, "short write to " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

void write_file_atomic(const std::filesystem::path& path, const std::string& text) {
    write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr)) {
        throw Error(ErrorCode::io, "SHA-256 failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

Bytes zlib_compress(std::span<const std::uint8_t> bytes, int level) {
    uLongf size = compressBound(static_cast<uLong>(bytes.size()));
    Bytes out(size);
    if (compress2(out.data(), &size, bytes.data(), static_cast<uLong>(bytes.size()), level) != Z_OK) {
        throw Error(ErrorCode::io, "zlib compression failed");
    }
    out.resize(size);
    return out;
}

Bytes zlib_decompress(std::span<const std::uint8_t> bytes) {
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) {
        throw Error(ErrorCode::parse, "zlib init failed");
    }
    zs.next_in = const_cast<Bytef*>(bytes.data());
    zs.avail_in = static_cast<uInt>(bytes.size());
    Bytes out;
    std::uint8_t chunk[65536];
    int rc = Z_OK;
    do {
        zs.next_out = chunk;
        zs.avail_out = sizeof(chunk);
        rc = inflate(&zs, Z_NO_FLUSH);
        if (rc != Z_OK && rc != Z_STREAM_END) {
            // Truncated streams are common in PDFs; keep what was recovered.
            if (rc == Z_BUF_ERROR && !out.empty()) {
                break;
            }
            inflateEnd(&zs);
            throw Error(ErrorCode::parse, "zlib stream is corrupt");
        }
        out.insert(out.end(), chunk, chunk + (sizeof(chunk) - zs.avail_out));
    } while (rc != Z_STREAM_END && (zs.avail_in > 0 || zs.avail_out == 0));
    inflateEnd(&zs);
    return out;
}

} // namespace lens
