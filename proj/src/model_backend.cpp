#include "lens/model_backend.hpp"

#include "lens/codec.hpp"
#include "lens/error.hpp"

#include <opencv2/core.hpp>
#include <opencv2/dnn.hpp>
#include <opencv2/imgproc.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <numeric>
#include <set>
#include <span>

namespace lens {

namespace {

constexpr int default_input_size = 640;

/// Minimal protobuf wire-format cursor, enough to walk ONNX graph signatures.
class ProtoReader {
public:
    explicit ProtoReader(std::span<const std::uint8_t> bytes) : p_(bytes.data()), end_(bytes.data() + bytes.size()) {}

    bool done() const { return p_ >= end_; }

    std::uint64_t varint() {
        std::uint64_t v = 0;
        for (int shift = 0; shift < 64; shift += 7) {
            if (p_ >= end_) throw Error(ErrorCode::parse, "truncated varint");
            const std::uint8_t b = *p_++;
            v |= static_cast<std::uint64_t>(b & 0x7f) << shift;
            if ((b & 0x80) == 0) return v;
        }
        throw Error(ErrorCode::parse, "varint too long");
    }

    void key(int& field, int& wire) {
        const std::uint64_t k = varint();
        field = static_cast<int>(k >> 3);
        wire = static_cast<int>(k & 7);
    }

    std::span<const std::uint8_t> bytes() {
        const std::uint64_t n = varint();
        if (n > static_cast<std::uint64_t>(end_ - p_)) throw Error(ErrorCode::parse, "truncated field");
        std::span<const std::uint8_t> s(p_, static_cast<std::size_t>(n));
        p_ += n;
        return s;
    }

    void skip(int wire) {
        switch (wire) {
        case 0: varint(); break;
        case 1: advance(8); break;
        case 2: bytes(); break;
        case 5: advance(4); break;
        default: throw Error(ErrorCode::parse, "unsupported wire type " + std::to_string(wire));
        }
    }

private:
    void advance(std::size_t n) {
        if (n > static_cast<std::size_t>(end_ - p_)) throw Error(ErrorCode::parse, "truncated field");
        p_ += n;
    }

    const std::uint8_t* p_;
    const std::uint8_t* end_;
};

std::string as_string(std::span<const std::uint8_t> s) { return {s.begin(), s.end()}; }

/// ValueInfoProto -> (name, dims).
std::pair<std::string, std::vector<long long>> value_info(std::span<const std::uint8_t> bytes) {
    std::string name;
    std::vector<long long> dims;
    ProtoReader r(bytes);
    while (!r.done()) {
        int f = 0;
        int w = 0;
        r.key(f, w);
        if (f == 1 && w == 2) {
            name = as_string(r.bytes());
        } else if (f == 2 && w == 2) {
            ProtoReader type(r.bytes());
            while (!type.done()) {
                type.key(f, w);
                if (f != 1 || w != 2) {
                    type.skip(w);
                    continue;
                }
                ProtoReader tensor(type.bytes());
                while (!tensor.done()) {
                    tensor.key(f, w);
                    if (f != 2 || w != 2) {
                        tensor.skip(w);
                        continue;
                    }
                    ProtoReader shape(tensor.bytes());
                    while (!shape.done()) {
                        shape.key(f, w);
                        if (f != 1 || w != 2) {
                            shape.skip(w);
                            continue;
                        }
                        ProtoReader dim(shape.bytes());
                        long long value = -1;
                        while (!dim.done()) {
                            dim.key(f, w);
                            if (f == 1 && w == 0) value = static_cast<long long>(dim.varint());
                            else dim.skip(w);
                        }
                        dims.push_back(value);
                    }
                }
            }
        } else {
            r.skip(w);
        }
    }
    return {name, dims};
}

float sigmoid(float v) { return 1.0f / (1.0f + std::exp(-v)); }

struct Candidate {
    int index = 0;
    float score = 0;
    float x0 = 0, y0 = 0, x1 = 0, y1 = 0;
};

float box_iou(const Candidate& a, const Candidate& b) {
    const float iw = std::max(0.0f, std::min(a.x1, b.x1) - std::max(a.x0, b.x0));
    const float ih = std::max(0.0f, std::min(a.y1, b.y1) - std::max(a.y0, b.y0));
    const float inter = iw * ih;
    const float uni = (a.x1 - a.x0) * (a.y1 - a.y0) + (b.x1 - b.x0) * (b.y1 - b.y0) - inter;
    return uni > 0 ? inter / uni : 0.0f;
}

class OnnxBackend final : public DetectionBackend {
public:
    OnnxBackend(const std::filesystem::path& file, const ModelOptions& options) : options_(options) {
        id_ = "model:" + file.filename().string();
        OnnxSignature sig;
        try {
            sig = read_onnx_signature(file);
        } catch (const Error& e) {
            throw Error(ErrorCode::backend_unavailable, file.string() + ": " + e.what());
        }
        if (sig.inputs.size() != 1) {
            throw Error(ErrorCode::backend_unavailable,
                        file.string() + ": expected 1 input, found " + std::to_string(sig.inputs.size()));
        }
        if (sig.outputs.size() != 2) {
            throw Error(ErrorCode::backend_unavailable, file.string() + ": expected 2 outputs (detections, mask prototypes), found " +
                                                            std::to_string(sig.outputs.size()));
        }
        const auto& in = sig.inputs[0];
        if (in.size() != 4 || (in[1] != 3 && in[1] != -1)) {
            throw Error(ErrorCode::backend_unavailable, file.string() + ": input must be [1,3,H,W]");
        }
        in_h_ = in[2] > 0 ? static_cast<int>(in[2]) : default_input_size;
        in_w_ = in[3] > 0 ? static_cast<int>(in[3]) : default_input_size;
        try {
            net_ = cv::dnn::readNetFromONNX(file.string());
            net_.setPreferableBackend(cv::dnn::DNN_BACKEND_OPENCV);
            net_.setPreferableTarget(cv::dnn::DNN_TARGET_CPU);
            out_names_ = net_.getUnconnectedOutLayersNames();
        } catch (const cv::Exception& e) {
            throw Error(ErrorCode::backend_unavailable, file.string() + ": " + e.what());
        }
        if (out_names_.size() != 2) {
            throw Error(ErrorCode::backend_unavailable, file.string() + ": network exposes " +
                                                            std::to_string(out_names_.size()) + " outputs, expected 2");
        }
        // A forward pass on a blank input surfaces unsupported layers and shape problems now rather than per page.
        cv::Mat blank(in_h_, in_w_, CV_8UC3, cv::Scalar(114, 114, 114));
        std::vector<cv::Mat> outs;
        try {
            outs = forward(blank);
        } catch (const cv::Exception& e) {
            throw Error(ErrorCode::backend_unavailable, file.string() + ": test inference failed: " + e.what());
        }
        det_index_ = -1;
        proto_index_ = -1;
        for (int i = 0; i < 2; ++i) {
            if (outs[static_cast<std::size_t>(i)].dims == 3) det_index_ = i;
            if (outs[static_cast<std::size_t>(i)].dims == 4) proto_index_ = i;
        }
        if (det_index_ < 0 || proto_index_ < 0) {
            throw Error(ErrorCode::backend_unavailable, file.string() + ": outputs must be one 3-D detection tensor and one 4-D prototype tensor");
        }
        const cv::Mat& proto = outs[static_cast<std::size_t>(proto_index_)];
        const cv::Mat& det = outs[static_cast<std::size_t>(det_index_)];
        nm_ = proto.size[1];
        mask_h_ = proto.size[2];
        mask_w_ = proto.size[3];
        const int channels = 5 + nm_;
        if (det.size[1] == channels) {
            transposed_ = false;
        } else if (det.size[2] == channels) {
            transposed_ = true;
        } else {
            throw Error(ErrorCode::backend_unavailable,
                        file.string() + ": detection tensor lacks a " + std::to_string(channels) +
                            "-channel axis (4 box + 1 class + " + std::to_string(nm_) + " mask coefficients)");
        }
    }

    std::string id() const override { return id_; }

    std::vector<RawInstance> infer(const RasterImage& page, int) const override {
        const int pw = page.width();
        const int ph = page.height();
        const double r = std::min(static_cast<double>(in_w_) / pw, static_cast<double>(in_h_) / ph);
        const int nw = std::max(1, static_cast<int>(std::lround(pw * r)));
        const int nh = std::max(1, static_cast<int>(std::lround(ph * r)));
        const int padx = (in_w_ - nw) / 2;
        const int pady = (in_h_ - nh) / 2;

        cv::Mat src(ph, pw, page.has_alpha() ? CV_8UC4 : CV_8UC3, const_cast<std::uint8_t*>(page.data().data()));
        cv::Mat rgb;
        if (page.has_alpha()) cv::cvtColor(src, rgb, cv::COLOR_RGBA2RGB);
        else rgb = src;
        cv::Mat canvas(in_h_, in_w_, CV_8UC3, cv::Scalar(114, 114, 114));
        cv::Mat resized;
        cv::resize(rgb, resized, cv::Size(nw, nh), 0, 0, r < 1.0 ? cv::INTER_AREA : cv::INTER_LINEAR);
        resized.copyTo(canvas(cv::Rect(padx, pady, nw, nh)));

        const std::vector<cv::Mat> outs = forward(canvas);
        const cv::Mat& det = outs[static_cast<std::size_t>(det_index_)];
        const cv::Mat& proto = outs[static_cast<std::size_t>(proto_index_)];
        const int n = transposed_ ? det.size[1] : det.size[2];
        const auto* dp = reinterpret_cast<const float*>(det.data);
        auto at = [&](int c, int i) { return transposed_ ? dp[i * (5 + nm_) + c] : dp[c * n + i]; };

        std::vector<Candidate> cands;
        for (int i = 0; i < n; ++i) {
            const float score = at(4, i);
            if (!(score >= options_.score_floor)) continue;
            const float cx = at(0, i), cy = at(1, i), w = at(2, i), h = at(3, i);
            cands.push_back({i, std::min(score, 1.0f), cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2});
        }
        std::stable_sort(cands.begin(), cands.end(), [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
        std::vector<Candidate> kept;
        for (const Candidate& c : cands) {
            if (kept.size() >= options_.max_instances) break;
            const bool suppressed = std::any_of(kept.begin(), kept.end(),
                                                [&](const Candidate& k) { return box_iou(k, c) > options_.nms_iou; });
            if (!suppressed) kept.push_back(c);
        }

        const auto* pp = reinterpret_cast<const float*>(proto.data);
        const std::size_t plane = static_cast<std::size_t>(mask_h_) * static_cast<std::size_t>(mask_w_);
        std::vector<RawInstance> out;
        std::vector<float> prob(plane);
        for (const Candidate& c : kept) {
            std::fill(prob.begin(), prob.end(), 0.0f);
            for (int k = 0; k < nm_; ++k) {
                const float coeff = at(5 + k, c.index);
                const float* src_plane = pp + static_cast<std::size_t>(k) * plane;
                for (std::size_t j = 0; j < plane; ++j) prob[j] += coeff * src_plane[j];
            }
            for (float& v : prob) v = sigmoid(v);

            BinaryMask mask(pw, ph);
            const int x0 = std::clamp(static_cast<int>(std::floor((c.x0 - padx) / r)), 0, pw);
            const int x1 = std::clamp(static_cast<int>(std::ceil((c.x1 - padx) / r)), 0, pw);
            const int y0 = std::clamp(static_cast<int>(std::floor((c.y0 - pady) / r)), 0, ph);
            const int y1 = std::clamp(static_cast<int>(std::ceil((c.y1 - pady) / r)), 0, ph);
            const double sx = static_cast<double>(mask_w_) / in_w_;
            const double sy = static_cast<double>(mask_h_) / in_h_;
            for (int y = y0; y < y1; ++y) {
                const double v = (y + 0.5) * r + pady;
                if (v < c.y0 || v > c.y1) continue;
                const double fy = std::clamp(v * sy - 0.5, 0.0, mask_h_ - 1.0);
                const int iy = std::min(static_cast<int>(fy), mask_h_ - 2 < 0 ? 0 : mask_h_ - 2);
                const double ty = mask_h_ > 1 ? fy - iy : 0.0;
                for (int x = x0; x < x1; ++x) {
                    const double u = (x + 0.5) * r + padx;
                    if (u < c.x0 || u > c.x1) continue;
                    const double fx = std::clamp(u * sx - 0.5, 0.0, mask_w_ - 1.0);
                    const int ix = std::min(static_cast<int>(fx), mask_w_ - 2 < 0 ? 0 : mask_w_ - 2);
                    const double tx = mask_w_ > 1 ? fx - ix : 0.0;
                    auto g = [&](int xx, int yy) {
                        xx = std::min(xx, mask_w_ - 1);
                        yy = std::min(yy, mask_h_ - 1);
                        return static_cast<double>(prob[static_cast<std::size_t>(yy) * mask_w_ + xx]);
                    };
                    const double val = (1 - ty) * ((1 - tx) * g(ix, iy) + tx * g(ix + 1, iy)) +
                                       ty * ((1 - tx) * g(ix, iy + 1) + tx * g(ix + 1, iy + 1));
                    if (val > 0.5) mask.set(x, y);
                }
            }
            out.push_back({std::move(mask), static_cast<double>(c.score)});
        }
        return out;
    }

private:
    std::vector<cv::Mat> forward(const cv::Mat& rgb) const {
        const cv::Mat blob = cv::dnn::blobFromImage(rgb, 1.0 / 255.0, cv::Size(), cv::Scalar(), false, false, CV_32F);
        std::lock_guard lock(mu_);
        net_.setInput(blob);
        std::vector<cv::Mat> outs;
        net_.forward(outs, out_names_);
        // Copies detach the results from the network's reused buffers before the lock is released.
        for (cv::Mat& m : outs) m = m.clone();
        return outs;
    }

    ModelOptions options_;
    std::string id_;
    mutable cv::dnn::Net net_;
    mutable std::mutex mu_;
    std::vector<std::string> out_names_;
    int in_w_ = default_input_size;
    int in_h_ = default_input_size;
    int det_index_ = 0;
    int proto_index_ = 1;
    int nm_ = 0;
    int mask_w_ = 0;
    int mask_h_ = 0;
    bool transposed_ = false;
};

std::unique_ptr<DetectionBackend> default_factory(const std::filesystem::path& file) { return load_model_backend(file); }

} // namespace

OnnxSignature read_onnx_signature(const std::filesystem::path& model_file) {
    const Bytes bytes = read_file(model_file);
    ProtoReader model(bytes);
    std::span<const std::uint8_t> graph;
    bool found = false;
    while (!model.done()) {
        int f = 0;
        int w = 0;
        model.key(f, w);
        if (f == 7 && w == 2) {
            graph = model.bytes();
            found = true;
        } else {
            model.skip(w);
        }
    }
    if (!found) throw Error(ErrorCode::parse, "no graph in model file");

    std::set<std::string> initializers;
    std::vector<std::pair<std::string, std::vector<long long>>> inputs;
    OnnxSignature sig;
    ProtoReader g(graph);
    while (!g.done()) {
        int f = 0;
        int w = 0;
        g.key(f, w);
        if (f == 5 && w == 2) {
            ProtoReader t(g.bytes());
            while (!t.done()) {
                t.key(f, w);
                if (f == 8 && w == 2) initializers.insert(as_string(t.bytes()));
                else t.skip(w);
            }
        } else if (f == 11 && w == 2) {
            inputs.push_back(value_info(g.bytes()));
        } else if (f == 12 && w == 2) {
            sig.outputs.push_back(value_info(g.bytes()).second);
        } else {
            g.skip(w);
        }
    }
    for (auto& [name, dims] : inputs) {
        if (initializers.count(name) == 0) sig.inputs.push_back(std::move(dims));
    }
    return sig;
}

std::unique_ptr<DetectionBackend> load_model_backend(const std::filesystem::path& model_file, const ModelOptions& options) {
    if (!std::filesystem::is_regular_file(model_file)) {
        throw Error(ErrorCode::backend_unavailable, "model file " + model_file.string() + " does not exist");
    }
    return std::make_unique<OnnxBackend>(model_file, options);
}

void register_model_backend() { set_model_backend_factory(&default_factory); }

} // namespace lens
