/**
 * @file selfannot.hpp
 * @brief Export of reviewed detections as a YOLO instance-segmentation dataset.
 */
#pragma once

#include "lens/ingest.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace lens {

struct ExportOptions {
    double ratio = 0.8;
    std::uint64_t seed = 42;
    std::string class_name = "pottery";
    /// Write provenance.json with detection ids, origins and review states.
    bool provenance = true;
};

struct DatasetSplit {
    std::vector<int> train_pages;
    std::vector<int> val_pages;
};

/**
 * Page-level split: n_train = round(ratio * N), pages shuffled with a
 * Fisher-Yates pass driven by mt19937_64(seed); each side is sorted.
 */
DatasetSplit split_pages(std::vector<int> pages, double ratio, std::uint64_t seed);

struct ExportResult {
    std::filesystem::path dir;
    DatasetSplit split;
    std::size_t instances = 0;
};

/**
 * Writes images/{train,val}/NNNN.png, labels/{train,val}/NNNN.txt (one
 * "0 x1 y1 ..." line per accepted detection, 6 decimals, LF) and finally
 * data.yaml. Only pages with at least one accepted detection are exported.
 * Throws empty_dataset when there is none.
 */
ExportResult export_yolo(const Project& project, const std::filesystem::path& out_dir, const ExportOptions& options = {});

/// Formats one label line (without the trailing LF) from a pixel polygon.
std::string yolo_line(const std::vector<Point>& polygon, int width, int height);

struct YoloLabelFile {
    /// "train" or "val".
    std::string split;
    std::string stem;
    int width = 0;
    int height = 0;
    /// Pixel polygons, one per line.
    std::vector<std::vector<Point>> polygons;
};

/**
 * Parses every .txt under labels/train and labels/val and maps coordinates back to pixels using
 * the matching images/ file. Errors name the file and line.
 */
std::vector<YoloLabelFile> parse_yolo_labels(const std::filesystem::path& dataset_dir);

/// Parses a single label line into normalized coordinates. @p where prefixes error messages.
std::vector<Point> parse_yolo_line(const std::string& line, const std::string& where);

} // namespace lens
