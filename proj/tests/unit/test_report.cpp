#include "lens/cards.hpp"
#include "lens/error.hpp"
#include "lens/pdf.hpp"
#include "lens/report.hpp"

#include "../support/testkit.hpp"

#include <json.hpp>

#include <gtest/gtest.h>

#include <random>

using namespace lens;

namespace {

PageSpec small_page() {
    PageSpec s;
    s.page_width = 100;
    s.page_height = 80;
    s.margin = 10;
    s.gutter = 2;
    s.caption_height = 4;
    return s;
}

} // namespace

TEST(PageSpec, NamedSizesAndValidation) {
    EXPECT_DOUBLE_EQ(page_spec_for("A4").page_height, 297.0);
    EXPECT_DOUBLE_EQ(page_spec_for("letter").page_width, 215.9);
    EXPECT_THROW(page_spec_for("tabloid"), Error);
    PageSpec s;
    s.margin = 120;
    EXPECT_THROW(s.validate(), Error);
}

TEST(Pack, ShelvesFillLeftToRightThenDown) {
    // Printable 80 x 60. Items with captions are 34 tall, so one shelf per page row.
    const std::vector<PackItem> items{{"a", 30, 30, ""}, {"b", 30, 20, ""}, {"c", 30, 30, ""}, {"d", 50, 10, ""}};
    const PackedLayout l = pack(items, small_page());
    ASSERT_EQ(l.placements.size(), 4u);
    std::map<std::string, Placement> at;
    for (const auto& p : l.placements) at[p.card_id] = p;
    // Sorted by height: a, c (30), b (20), d (10).
    EXPECT_DOUBLE_EQ(at["a"].x, 10);
    EXPECT_DOUBLE_EQ(at["a"].y, 10);
    EXPECT_DOUBLE_EQ(at["c"].x, 42);
    EXPECT_DOUBLE_EQ(at["c"].y, 10);
    // b fits no existing shelf width (42+30+2+30 > 80), opens the second shelf at y = 34 + 2.
    EXPECT_DOUBLE_EQ(at["b"].y, 10 + 36);
    EXPECT_DOUBLE_EQ(at["b"].x, 10);
    EXPECT_EQ(at["b"].page_index, 0);
    // d is 14 tall with its caption; the b shelf (24) has 80-30-2 = 48 < 50 left, page 1 has 60-60 = 0 left.
    EXPECT_EQ(at["d"].page_index, 1);
    EXPECT_EQ(l.page_count, 2);
}

TEST(Pack, FirstFitReusesEarlierPages) {
    const PageSpec s = small_page();
    // Two tall items fill page 0 width; a third tall item opens page 1; a small one fills page 0's remaining height.
    const std::vector<PackItem> items{{"t1", 39, 48, ""}, {"t2", 39, 48, ""}, {"t3", 39, 48, ""}, {"s", 70, 1, ""}};
    const PackedLayout l = pack(items, s);
    std::map<std::string, Placement> at;
    for (const auto& p : l.placements) at[p.card_id] = p;
    EXPECT_EQ(at["t3"].page_index, 1);
    EXPECT_EQ(at["s"].page_index, 0);
    EXPECT_DOUBLE_EQ(at["s"].y, 10 + 52 + 2);
}

TEST(Pack, HalfHeightFullWidthItemsTakeTwoPages) {
    PageSpec s = page_spec_for("a4");
    s.caption_height = 0;
    const double w = s.printable_width();
    const double h = s.printable_height() / 2 - s.gutter;
    const PackedLayout l = pack({{"a", w, h, ""}, {"b", w, h, ""}, {"c", w, h, ""}, {"d", w, h, ""}}, s);
    EXPECT_EQ(l.page_count, 2);
    int per_page[2] = {0, 0};
    for (const auto& p : l.placements) ++per_page[p.page_index];
    EXPECT_EQ(per_page[0], 2);
    EXPECT_EQ(per_page[1], 2);
    // With a caption strip taller than half the gutter the pair no longer fits on one page.
    s.caption_height = s.gutter;
    EXPECT_EQ(pack({{"a", w, h, ""}, {"b", w, h, ""}}, s).page_count, 2);
}

TEST(Pack, OversizeAndDegenerateItems) {
    try {
        pack({{"big", 81, 5, ""}}, small_page());
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::pack);
        EXPECT_NE(std::string(e.what()).find("big"), std::string::npos);
    }
    EXPECT_THROW(pack({{"tall", 10, 57, ""}}, small_page()), Error);
    EXPECT_THROW(pack({{"flat", 10, 0, ""}}, small_page()), Error);
    EXPECT_EQ(pack({}, small_page()).page_count, 0);
}

TEST(Pack, LayoutJson) {
    const PackedLayout l = pack({{"a", 10, 10, ""}}, small_page());
    const auto j = nlohmann::json::parse(layout_to_json(l));
    EXPECT_EQ(j["unit"], "mm");
    EXPECT_EQ(j["page_count"], 1);
    EXPECT_EQ(j["index_pages"], 1);
    EXPECT_EQ(j["placements"][0]["card_id"], "a");
    EXPECT_DOUBLE_EQ(j["page"]["gutter"].get<double>(), 2.0);
}

TEST(Index, PageCountGrowsWithItems) {
    const PageSpec a4;
    EXPECT_EQ(index_page_count(0, a4), 1);
    EXPECT_EQ(index_page_count(1, a4), 1);
    const int per_page = [&] {
        int n = 1;
        while (index_page_count(static_cast<std::size_t>(n + 1), a4) == 1) ++n;
        return n;
    }();
    EXPECT_GT(per_page, 10);
    EXPECT_EQ(index_page_count(static_cast<std::size_t>(2 * per_page), a4), 2);
    EXPECT_EQ(index_page_count(static_cast<std::size_t>(2 * per_page + 1), a4), 3);
}

TEST(RenderPdf, PageCountAndMissingImages) {
    testkit::TempDir tmp;
    std::mt19937_64 rng(1);
    write_png(tmp / "a.png", testkit::random_image(20, 10, 4, rng));
    const PackedLayout l = pack({{"a", 50, 50, ""}, {"b", 50, 50, ""}}, small_page());
    ASSERT_EQ(l.page_count, 2);
    ReportOptions o;
    const std::vector<RenderItem> items{{"a", tmp / "a.png", "C00001 a"}, {"b", tmp / "a.png", "C00002 b"}};
    const Bytes pdf = render_pdf(l, items, o);
    EXPECT_EQ(pdf::Document::load(pdf).page_count(), 3u);
    EXPECT_EQ(render_pdf(l, items, o), pdf);
    try {
        render_pdf(l, {{"a", tmp / "a.png", ""}, {"b", tmp / "missing.png", ""}}, o);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::render);
    }
    EXPECT_EQ(pdf::Document::load(render_pdf(PackedLayout{small_page(), {}, 0}, {}, o)).page_count(), 1u);
}

TEST(BuildReport, TrueScaleFromDpi) {
    testkit::TempDir tmp;
    std::mt19937_64 rng(2);
    const Project project = testkit::make_project(tmp / "p", 3, rng);
    extract_cards(project, {});
    sync_catalog(project.dir);
    ReportOptions o;
    o.scale = 2.0;
    const ReportResult r = build_report(project, page_spec_for("a4"), o);
    ASSERT_EQ(r.layout.placements.size(), 3u);
    // A 30 px card at 150 dpi is 5.08 mm, doubled.
    EXPECT_NEAR(r.layout.placements[0].width, 30 * 25.4 / 150 * 2, 1e-9);
    EXPECT_TRUE(fs::exists(r.pdf));
    EXPECT_TRUE(fs::exists(r.sidecar));
    EXPECT_EQ(static_cast<int>(pdf::Document::load(read_file(r.pdf)).page_count()), r.pdf_pages);
    o.scale = 0;
    EXPECT_THROW(build_report(project, page_spec_for("a4"), o), Error);
}
