#include "lens/codec.hpp"
#include "lens/error.hpp"
#include "lens/ingest.hpp"
#include "lens/pdf_writer.hpp"
#include "lens/workspace.hpp"

#include "../support/testkit.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace lens;

namespace {

fs::path write_pdf(const fs::path& path, int pages) {
    pdf::Writer w;
    RasterImage im(8, 8, 3, 40);
    const int h = w.add_image(im);
    for (int p = 0; p < pages; ++p) {
        w.begin_page(72, 36);
        w.draw_image(h, 0, 0, 36, 36);
        w.end_page();
    }
    write_file_atomic(path, w.finish({}));
    return path;
}

IngestOptions fixed_options() {
    IngestOptions o;
    o.created_at = "2024-05-01T00:00:00Z";
    o.workers = 2;
    return o;
}

ErrorCode code_of(const std::function<void()>& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorCode::io;
}

} // namespace

TEST(Workspace, ProjectIdSlugs) {
    EXPECT_NO_THROW(workspace::validate_project_id("Site-12.b_x"));
    EXPECT_THROW(workspace::validate_project_id(""), Error);
    EXPECT_THROW(workspace::validate_project_id("../x"), Error);
    EXPECT_THROW(workspace::validate_project_id("-lead"), Error);
    EXPECT_THROW(workspace::validate_project_id(std::string(65, 'a')), Error);
    EXPECT_EQ(workspace::page_file_name(7), "pages/0007.png");
}

TEST(IngestPdf, RendersEveryPageAndWritesManifest) {
    testkit::TempDir tmp;
    const auto pdf = write_pdf(tmp / "doc.pdf", 3);
    std::vector<double> progress;
    std::mutex mu;
    IngestOptions o = fixed_options();
    o.dpi = 144;
    o.progress = [&](double f) {
        std::lock_guard lock(mu);
        progress.push_back(f);
    };
    const Project p = ingest_pdf(pdf, tmp / "proj", "proj", o);
    ASSERT_EQ(p.pages.size(), 3u);
    EXPECT_EQ(p.pages[0].width, 144);
    EXPECT_EQ(p.pages[0].height, 72);
    EXPECT_EQ(p.pages[2].file, "pages/0003.png");
    EXPECT_EQ(p.pages[1].dpi, 144);
    EXPECT_FALSE(progress.empty());
    EXPECT_DOUBLE_EQ(*std::max_element(progress.begin(), progress.end()), 1.0);

    const Project loaded = load_project(tmp / "proj");
    EXPECT_EQ(loaded.id, "proj");
    EXPECT_EQ(loaded.created_at, "2024-05-01T00:00:00Z");
    EXPECT_EQ(loaded.pages.size(), 3u);
    EXPECT_EQ(loaded.pages[0].checksum, sha256_hex(read_file(tmp / "proj" / "pages" / "0001.png")));
    EXPECT_TRUE(validate_project(loaded).empty());
}

TEST(IngestPdf, ReingestIsByteIdentical) {
    testkit::TempDir tmp;
    const auto pdf = write_pdf(tmp / "doc.pdf", 2);
    ingest_pdf(pdf, tmp / "a", "a", fixed_options());
    ingest_pdf(pdf, tmp / "b", "a", fixed_options());
    EXPECT_EQ(read_file(tmp / "a" / "manifest.json").size(), read_file(tmp / "b" / "manifest.json").size());
    EXPECT_EQ(read_file(tmp / "a" / "pages" / "0002.png"), read_file(tmp / "b" / "pages" / "0002.png"));
}

TEST(IngestPdf, ConflictUnlessOverwrite) {
    testkit::TempDir tmp;
    const auto pdf = write_pdf(tmp / "doc.pdf", 1);
    ingest_pdf(pdf, tmp / "p", "p", fixed_options());
    EXPECT_EQ(code_of([&] { ingest_pdf(pdf, tmp / "p", "p", fixed_options()); }), ErrorCode::conflict);
    IngestOptions o = fixed_options();
    o.overwrite = true;
    EXPECT_NO_THROW(ingest_pdf(pdf, tmp / "p", "p", o));
}

TEST(IngestPdf, DpiRangeAndEmptyDocuments) {
    testkit::TempDir tmp;
    const auto pdf = write_pdf(tmp / "doc.pdf", 1);
    IngestOptions o = fixed_options();
    o.dpi = 71;
    EXPECT_EQ(code_of([&] { ingest_pdf(pdf, tmp / "p", "p", o); }), ErrorCode::invalid_input);
    o.dpi = 1201;
    EXPECT_EQ(code_of([&] { ingest_pdf(pdf, tmp / "p", "p", o); }), ErrorCode::invalid_input);
    const auto empty = write_pdf(tmp / "empty.pdf", 0);
    EXPECT_EQ(code_of([&] { ingest_pdf(empty, tmp / "e", "e", fixed_options()); }), ErrorCode::empty_document);
    write_file_atomic(tmp / "bad.pdf", std::string("garbage"));
    EXPECT_EQ(code_of([&] { ingest_pdf(tmp / "bad.pdf", tmp / "g", "g", fixed_options()); }), ErrorCode::ingest);
}

TEST(IngestPdf, CommandRenderer) {
    testkit::TempDir tmp;
    const auto pdf = write_pdf(tmp / "doc.pdf", 2);
    RasterImage stamp(5, 4, 3, 77);
    write_png(tmp / "stamp.png", stamp);
    const CommandPdfRenderer renderer("cp " + (tmp / "stamp.png").string() + " {output}");
    IngestOptions o = fixed_options();
    o.renderer = &renderer;
    const Project p = ingest_pdf(pdf, tmp / "c", "c", o);
    ASSERT_EQ(p.pages.size(), 2u);
    EXPECT_EQ(read_png(tmp / "c" / "pages" / "0002.png"), stamp);

    const CommandPdfRenderer failing("false");
    o.renderer = &failing;
    o.overwrite = true;
    try {
        ingest_pdf(pdf, tmp / "c", "c", o);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::ingest);
        EXPECT_NE(std::string(e.what()).find("page 1"), std::string::npos);
    }
}

TEST(IngestImages, LexicographicOrderAndSkippedFiles) {
    testkit::TempDir tmp;
    const auto src = tmp / "scans";
    fs::create_directories(src);
    std::mt19937_64 rng(4);
    const RasterImage b = testkit::random_image(10, 6, 3, rng);
    const RasterImage a = testkit::random_image(7, 9, 3, rng);
    write_png(src / "b.png", b);
    write_png(src / "a.png", a);
    write_file_atomic(src / "notes.txt", std::string("x"));
    std::vector<std::string> warnings;
    IngestOptions o = fixed_options();
    o.warn = [&](const std::string& w) { warnings.push_back(w); };
    const Project p = ingest_images(src, tmp / "p", "p", o);
    ASSERT_EQ(p.pages.size(), 2u);
    EXPECT_EQ(p.source_kind, SourceKind::image_dir);
    EXPECT_EQ(read_png(tmp / "p" / "pages" / "0001.png"), a);
    EXPECT_EQ(p.pages[1].width, 10);
    ASSERT_EQ(warnings.size(), 1u);
    EXPECT_NE(warnings[0].find("notes.txt"), std::string::npos);
}

TEST(IngestImages, EmptyDirectory) {
    testkit::TempDir tmp;
    fs::create_directories(tmp / "none");
    EXPECT_EQ(code_of([&] { ingest_images(tmp / "none", tmp / "p", "p", fixed_options()); }), ErrorCode::empty_document);
    EXPECT_EQ(code_of([&] { ingest_source(tmp / "missing", tmp / "p", "p", fixed_options()); }), ErrorCode::ingest);
}

TEST(Validate, DetectsTamperingAndGaps) {
    testkit::TempDir tmp;
    const auto pdf = write_pdf(tmp / "doc.pdf", 3);
    Project p = ingest_pdf(pdf, tmp / "p", "p", fixed_options());
    write_png(tmp / "p" / "pages" / "0002.png", RasterImage(3, 3, 3, 1));
    fs::remove(tmp / "p" / "pages" / "0003.png");
    const auto issues = validate_project(p);
    std::set<std::string> kinds;
    for (const auto& i : issues) kinds.insert(to_string(i.kind));
    EXPECT_TRUE(kinds.count("checksum_mismatch"));
    EXPECT_TRUE(kinds.count("dimension_mismatch"));
    EXPECT_TRUE(kinds.count("missing_file"));
    p.pages.erase(p.pages.begin());
    bool gap = false;
    for (const auto& i : validate_project(p)) gap = gap || i.kind == ValidationIssue::Kind::numbering_gap;
    EXPECT_TRUE(gap);
}

TEST(LoadProject, MissingAndMalformed) {
    testkit::TempDir tmp;
    EXPECT_EQ(code_of([&] { load_project(tmp / "nope"); }), ErrorCode::not_found);
    fs::create_directories(tmp / "bad");
    write_file_atomic(tmp / "bad" / "manifest.json", std::string("{\"id\": 3"));
    EXPECT_EQ(code_of([&] { load_project(tmp / "bad"); }), ErrorCode::parse);
    const Project p = ingest_pdf(write_pdf(tmp / "d.pdf", 1), tmp / "ok", "ok", fixed_options());
    EXPECT_EQ(code_of([&] { p.page(2); }), ErrorCode::not_found);
}
