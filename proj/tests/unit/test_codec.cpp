#include "lens/codec.hpp"
#include "lens/error.hpp"

#include "../support/testkit.hpp"

#include <gtest/gtest.h>

#include <random>
#include <string>

using namespace lens;

TEST(Png, RoundTripRgbAndRgba) {
    std::mt19937_64 rng(1);
    for (int ch : {3, 4}) {
        const RasterImage im = testkit::random_image(37, 21, ch, rng);
        const Bytes bytes = encode_png(im);
        EXPECT_EQ(decode_png(bytes), im);
        const auto hdr = probe_image(bytes);
        ASSERT_TRUE(hdr);
        EXPECT_EQ(hdr->width, 37);
        EXPECT_EQ(hdr->height, 21);
    }
}

TEST(Png, GrayStorageIsLossless) {
    RasterImage im(8, 4, 3);
    for (int y = 0; y < 4; ++y) {
        for (int x = 0; x < 8; ++x) {
            auto* p = im.pixel(x, y);
            p[0] = p[1] = p[2] = static_cast<std::uint8_t>(x * 30 + y);
        }
    }
    const Bytes gray = encode_png(im);
    const Bytes color = encode_png(im, PngColor::color);
    EXPECT_LE(gray.size(), color.size());
    EXPECT_EQ(decode_png(gray), im);
    EXPECT_EQ(decode_png(color), im);
}

TEST(Png, EncodingIsDeterministic) {
    std::mt19937_64 rng(2);
    const RasterImage im = testkit::random_image(16, 16, 3, rng);
    EXPECT_EQ(encode_png(im), encode_png(im));
}

TEST(Png, GarbageRaises) {
    const Bytes junk{1, 2, 3, 4, 5};
    EXPECT_THROW(decode_png(junk), Error);
    EXPECT_FALSE(probe_image(junk));
}

TEST(Sha256, KnownVectors) {
    const std::string abc = "abc";
    EXPECT_EQ(sha256_hex({reinterpret_cast<const std::uint8_t*>(abc.data()), abc.size()}),
              "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    EXPECT_EQ(sha256_hex({}), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST(Zlib, RoundTrip) {
    std::mt19937_64 rng(3);
    Bytes data(5000);
    for (auto& b : data) b = static_cast<std::uint8_t>(rng() % 7);
    const Bytes z = zlib_compress(data);
    EXPECT_LT(z.size(), data.size());
    EXPECT_EQ(zlib_decompress(z), data);
    EXPECT_THROW(zlib_decompress(Bytes{0x78, 0x9c, 0xff}), Error);
}

TEST(Files, AtomicWriteAndRead) {
    testkit::TempDir tmp;
    const auto path = tmp / "a" / "b.txt";
    std::filesystem::create_directories(path.parent_path());
    write_file_atomic(path, std::string("hello"));
    EXPECT_EQ(read_text(path), "hello");
    write_file_atomic(path, std::string("again"));
    EXPECT_EQ(read_text(path), "again");
    EXPECT_THROW(read_file(tmp / "missing"), Error);
}

namespace {

Bytes fixture(const std::string& name) { return read_file(std::filesystem::path(LENS_IMAGE_FIXTURES) / name); }

} // namespace

TEST(Jpeg, DecodesBaselineProgressiveGrayAndCmyk) {
    for (const char* name : {"gradient_baseline.jpg", "gradient_progressive.jpg", "gradient_gray.jpg", "gradient_cmyk.jpg"}) {
        SCOPED_TRACE(name);
        const Bytes bytes = fixture(name);
        const auto hdr = probe_image(bytes);
        ASSERT_TRUE(hdr);
        EXPECT_EQ(hdr->width, 48);
        EXPECT_EQ(hdr->height, 32);
        const RasterImage im = decode_jpeg(bytes);
        ASSERT_EQ(im.width(), 48);
        ASSERT_EQ(im.height(), 32);
        EXPECT_EQ(im.channels(), 3);
    }
    // The color fixtures are a red-green gradient over constant blue 128.
    for (const char* name : {"gradient_baseline.jpg", "gradient_progressive.jpg"}) {
        const RasterImage im = decode_jpeg(fixture(name));
        const auto* p = im.pixel(47, 0);
        EXPECT_NEAR(p[0], 255, 12) << name;
        EXPECT_NEAR(p[1], 0, 12) << name;
        EXPECT_NEAR(p[2], 128, 12) << name;
    }
}

TEST(Jpeg, TruncatedStreamRaises) {
    const Bytes not_jpeg{0xff, 0xd8, 0x00};
    EXPECT_THROW(decode_jpeg(not_jpeg), Error);
}
