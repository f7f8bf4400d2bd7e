/**
 * @file render.hpp
 * @brief Pluggable PDF page renderers used by ingestion.
 *
 * The engine treats a renderer as a black box that turns one PDF page into a
 * bitmap at a requested resolution. Two implementations ship:
 *
 *  - builtin: an in-process rasterizer covering what scanned publication
 *    plates contain (image XObjects in Flate, LZW, RunLength, ASCII and DCT
 *    encodings, 1/2/4/8/16-bit samples, indexed and ICC color spaces, soft
 *    masks, stencil masks, form XObjects) plus filled and stroked vector
 *    paths. Text is not drawn. JPX, JBIG2 and CCITT images raise an ingest
 *    error naming the page so the caller can switch to an external renderer.
 *  - command: any external program driven through a command template, e.g.
 *    "pdftoppm -r {dpi} -f {page} -l {page} -singlefile -png {input} {stem}".
 */
#pragma once

#include "lens/imagecore.hpp"

#include <filesystem>
#include <memory>
#include <string>

namespace lens {

class RenderSession {
public:
    virtual ~RenderSession() = default;
    virtual std::size_t page_count() const = 0;
    /// @param page_index zero-based page index.
    virtual RasterImage render(std::size_t page_index, int dpi) const = 0;
};

class PageRenderer {
public:
    virtual ~PageRenderer() = default;
    virtual std::string id() const = 0;
    /// Throws ErrorCode::ingest when the document cannot be opened.
    virtual std::unique_ptr<RenderSession> open(const std::filesystem::path& pdf) const = 0;
};

class BuiltinPdfRenderer final : public PageRenderer {
public:
    std::string id() const override { return "builtin"; }
    std::unique_ptr<RenderSession> open(const std::filesystem::path& pdf) const override;
};

/**
 * Runs an external rasterizer once per page. The template may use {input},
 * {dpi}, {page} (1-based), {stem} and {output} ({stem}.png). The program must
 * write a PNG to {output}. Page counting uses the builtin PDF reader.
 */
class CommandPdfRenderer final : public PageRenderer {
public:
    explicit CommandPdfRenderer(std::string command_template) : template_(std::move(command_template)) {}
    std::string id() const override { return "command"; }
    std::unique_ptr<RenderSession> open(const std::filesystem::path& pdf) const override;

private:
    std::string template_;
};

/// "builtin" or "command:<template>".
std::unique_ptr<PageRenderer> make_renderer(const std::string& spec);

} // namespace lens
