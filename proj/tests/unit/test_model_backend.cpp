#include "lens/codec.hpp"
#include "lens/error.hpp"
#include "lens/model_backend.hpp"

#include "../support/testkit.hpp"

#include <gtest/gtest.h>

using namespace lens;

namespace {

const fs::path fixtures = LENS_FIXTURE_DIR;

RasterImage page_with_squares() {
    RasterImage im(512, 400, 3);
    for (int y = 0; y < im.height(); ++y) {
        for (int x = 0; x < im.width(); ++x) {
            for (int c = 0; c < 3; ++c) im.pixel(x, y)[c] = 250;
        }
    }
    const int corners[4][2] = {{40, 40}, {300, 50}, {60, 260}, {330, 240}};
    for (const auto& c : corners) {
        for (int y = c[1]; y < c[1] + 90; ++y) {
            for (int x = c[0]; x < c[0] + 90; ++x) {
                for (int k = 0; k < 3; ++k) im.pixel(x, y)[k] = 10;
            }
        }
    }
    return im;
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error";
    return ErrorCode::io;
}

} // namespace

TEST(OnnxSignature, ReadsInputsAndOutputs) {
    const OnnxSignature seg = read_onnx_signature(fixtures / "ink_seg.onnx");
    ASSERT_EQ(seg.inputs.size(), 1u);
    EXPECT_EQ(seg.inputs[0], (std::vector<long long>{1, 3, 128, 128}));
    ASSERT_EQ(seg.outputs.size(), 2u);
    EXPECT_EQ(seg.outputs[0], (std::vector<long long>{1, 6, 64}));
    EXPECT_EQ(seg.outputs[1].size(), 4u);
    EXPECT_EQ(read_onnx_signature(fixtures / "ink_det_only.onnx").outputs.size(), 1u);
}

TEST(ModelBackend, RejectsUnusableFiles) {
    EXPECT_EQ(code_of([] { load_model_backend(fixtures / "ink_det_only.onnx"); }), ErrorCode::backend_unavailable);
    EXPECT_EQ(code_of([] { load_model_backend(fixtures / "missing.onnx"); }), ErrorCode::backend_unavailable);
    testkit::TempDir tmp;
    write_file_atomic(tmp / "garbage.onnx", std::string("\xff\xff\xff\xff not a model"));
    EXPECT_EQ(code_of([&] { load_model_backend(tmp / "garbage.onnx"); }), ErrorCode::backend_unavailable);
    EXPECT_EQ(code_of([&] { read_onnx_signature(tmp / "garbage.onnx"); }), ErrorCode::parse);
}

TEST(ModelBackend, FindsDarkSquaresDeterministically) {
    const auto backend = load_model_backend(fixtures / "ink_seg.onnx");
    const RasterImage page = page_with_squares();
    const auto a = backend->infer(page, 1);
    EXPECT_GE(a.size(), 4u);
    for (const RawInstance& r : a) {
        EXPECT_EQ(r.mask.width(), 512);
        EXPECT_EQ(r.mask.height(), 400);
        EXPECT_GE(r.score, 0.0);
        EXPECT_LE(r.score, 1.0);
    }
    const auto b = backend->infer(page, 1);
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].score, b[i].score);
        EXPECT_EQ(a[i].mask, b[i].mask);
    }

    // After post-processing every square is covered and no detection lands on the blank background.
    InferenceParams params;
    params.conf_threshold = 0.3;
    const DetectionSet set = run_detection(page, 1, 300, *backend, params);
    EXPECT_GE(set.detections.size(), 4u);
    const int centres[4][2] = {{85, 85}, {345, 95}, {105, 305}, {375, 285}};
    for (const auto& c : centres) {
        bool covered = false;
        for (const Detection& d : set.detections) {
            covered = covered || contains(d.polygon, {static_cast<double>(c[0]), static_cast<double>(c[1])});
        }
        EXPECT_TRUE(covered) << c[0] << "," << c[1];
    }
}

TEST(ModelBackend, RegisteredUnderModelSpec) {
    register_model_backend();
    const auto backend = make_backend("model:" + (fixtures / "ink_seg.onnx").string());
    EXPECT_NE(backend->id().find("ink_seg.onnx"), std::string::npos);
}
