/**
 * @file model_backend.hpp
 * @brief ONNX instance-segmentation backend (YOLOv8-seg output layout) on OpenCV dnn.
 *
 * Expected network: one input [1,3,H,W] (RGB, 0..1) and two outputs,
 * detections [1, 4+1+nm, N] (cx, cy, w, h in input pixels, class score,
 * nm mask coefficients) and mask prototypes [1, nm, mh, mw]. A transposed
 * detection tensor [1, N, 4+1+nm] is accepted too. Pages are letterboxed
 * into the input geometry embedded in the file (640 x 640 when dynamic).
 */
#pragma once

#include "lens/detect.hpp"

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

namespace lens {

struct ModelOptions {
    /// Candidates below this score are dropped before NMS to bound memory.
    double score_floor = 0.05;
    double nms_iou = 0.7;
    std::size_t max_instances = 100;
};

/// Tensor shapes declared in an ONNX file; dynamic dimensions are -1.
struct OnnxSignature {
    std::vector<std::vector<long long>> inputs;
    std::vector<std::vector<long long>> outputs;
};

/// Reads the graph inputs (excluding initializers) and outputs. Throws parse errors for malformed files.
OnnxSignature read_onnx_signature(const std::filesystem::path& model_file);

/**
 * Loads and validates the network, running one forward pass on a blank input
 * to check output shapes. Any problem raises backend_unavailable here, never
 * during inference.
 */
std::unique_ptr<DetectionBackend> load_model_backend(const std::filesystem::path& model_file,
                                                     const ModelOptions& options = {});

/// Registers load_model_backend as the loader behind "model:<file>" backend specs.
void register_model_backend();

} // namespace lens
