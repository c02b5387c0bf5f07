#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>
#include <set>

#include "smartflow/core.hpp"
#include "smartflow/csv.hpp"

using namespace smartflow;

namespace {

// Box of the given size centred on (cx, cy).
BBox centred(double cx, double cy, double w = 10, double h = 10) {
    return {cx - w / 2, cy - h / 2, w, h};
}

GridCell floor_oracle(double cx, double cy, double cell) {
    return {static_cast<int>(std::floor(cx / cell)), static_cast<int>(std::floor(cy / cell))};
}

}  // namespace

TEST_CASE("grid_of maps the box centre by floor division") {
    CHECK(grid_of(centred(340, 220), 40) == GridCell{8, 5});
    CHECK(grid_of(centred(0, 0), 40) == GridCell{0, 0});
    CHECK(grid_of(centred(0, 0), 7) == GridCell{0, 0});
    CHECK(grid_of(centred(39.9, 39.9, 2, 2), 40) == GridCell{0, 0});
    CHECK_THROWS_AS(grid_of(centred(1, 1), 0), Error);
    try {
        grid_of(centred(1, 1), -3);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::InvalidParameter);
    }
}

TEST_CASE("grid_of agrees with the floor oracle and shifts by whole cells") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> pos(0, 1900), size(1, 300), cell(5, 90);
    std::uniform_int_distribution<int> shift(0, 20);
    for (int i = 0; i < 2000; ++i) {
        const double cs = cell(rng);
        const BBox b = centred(pos(rng) + 150, pos(rng) + 150, size(rng), size(rng));
        CHECK(grid_of(b, cs) == floor_oracle(b.center().x, b.center().y, cs));
        const int k = shift(rng);
        const GridCell base = grid_of(b, cs);
        CHECK(grid_of(b.translated(k * cs, k * cs), cs) == GridCell{base.col + k, base.row + k});
    }
}

TEST_CASE("neighbors8 clips at the grid border") {
    const auto corner = neighbors8({0, 0}, 10, 10);
    CHECK(std::set<GridCell>(corner.begin(), corner.end()) ==
          std::set<GridCell>{{1, 0}, {0, 1}, {1, 1}});
    CHECK(neighbors8({5, 5}, 10, 10).size() == 8);
    CHECK(neighbors8({0, 0}, 1, 1).empty());
    CHECK_THROWS_AS(neighbors8({10, 0}, 10, 10), Error);
    CHECK_THROWS_AS(neighbors8({-1, 0}, 10, 10), Error);
}

TEST_CASE("neighbors8 sizes depend on corner, edge or interior position") {
    for (int cols = 2; cols <= 6; ++cols)
        for (int rows = 2; rows <= 6; ++rows)
            for (int c = 0; c < cols; ++c)
                for (int r = 0; r < rows; ++r) {
                    const auto n = neighbors8({c, r}, cols, rows);
                    const bool edge_c = c == 0 || c == cols - 1;
                    const bool edge_r = r == 0 || r == rows - 1;
                    const std::size_t expect = edge_c && edge_r ? 3 : (edge_c || edge_r ? 5 : 8);
                    CHECK(n.size() == expect);
                    for (const auto& x : n) {
                        CHECK(x != GridCell{c, r});
                        CHECK(std::abs(x.col - c) <= 1);
                        CHECK(std::abs(x.row - r) <= 1);
                    }
                }
}

TEST_CASE("axis_overlap") {
    const BBox a{0, 0, 100, 20};
    CHECK(axis_overlap(a, a, Axis::Horizontal) == 1.0);
    CHECK(axis_overlap(a, a, Axis::Vertical) == 1.0);
    CHECK(axis_overlap(a, BBox{200, 0, 50, 20}, Axis::Horizontal) == 0.0);
    CHECK(axis_overlap(a, BBox{50, 0, 100, 20}, Axis::Horizontal) == doctest::Approx(0.5));

    std::mt19937 rng(3);
    std::uniform_real_distribution<double> pos(0, 500), size(1, 200);
    for (int i = 0; i < 1000; ++i) {
        const BBox p{pos(rng), pos(rng), size(rng), size(rng)};
        const BBox q{pos(rng), pos(rng), size(rng), size(rng)};
        for (Axis ax : {Axis::Horizontal, Axis::Vertical}) {
            const double v = axis_overlap(p, q, ax);
            CHECK(v == axis_overlap(q, p, ax));
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("bbox and text region invariants") {
    CHECK_THROWS_AS(BBox(0, 0, 0, 5), Error);
    CHECK_THROWS_AS(BBox(0, 0, 5, -1), Error);
    const BBox b{10, 20, 30, 40};
    CHECK(b.contains(b.center()));
    CHECK(iou(b, b) == doctest::Approx(1.0));
    CHECK(iou(b, BBox{100, 100, 5, 5}) == 0.0);

    const TextRegion r("  First Name \n", b, 0.9);
    CHECK(r.text() == "First Name");
    CHECK_THROWS_AS(TextRegion("   ", b), Error);
    CHECK_THROWS_AS(TextRegion("x", b, 1.5), Error);
}

TEST_CASE("field kinds degrade to TextInput") {
    CHECK(field_kind_from_string("Dropdown") == FieldKind::Dropdown);
    CHECK(field_kind_from_string("color-picker") == FieldKind::TextInput);
    CHECK(to_string(FieldKind::DatePicker) == "DatePicker");
}

TEST_CASE("label normalization") {
    CHECK(normalize_label("E-mail") == normalize_label("Email"));
    CHECK(normalize_label("Date of Birth:") == "dateofbirth");
}

TEST_CASE("edge_gap and reading order") {
    CHECK(edge_gap(BBox{10, 100, 80, 20}, BBox{100, 98, 200, 24}) == doctest::Approx(10));
    CHECK(edge_gap(BBox{0, 0, 10, 10}, BBox{13, 14, 5, 5}) == doctest::Approx(5));
    std::vector<BBox> boxes = {{300, 102, 50, 16}, {10, 100, 50, 20}, {10, 40, 50, 20}};
    sort_reading_order(boxes, [](const BBox& b) -> const BBox& { return b; });
    CHECK(boxes[0].y() == 40);
    CHECK(boxes[1].x() == 10);
    CHECK(boxes[2].x() == 300);
}

TEST_CASE("cells_covered spans the box interior") {
    const auto one = cells_covered(BBox{330, 210, 20, 20}, 40);
    REQUIRE(one.size() == 1);
    CHECK(one[0] == GridCell{8, 5});
    const auto wide = cells_covered(BBox{0, 0, 80, 40}, 40);
    CHECK(wide.size() == 2);
}

TEST_CASE("csv quoting round-trips") {
    const csv::Row row = {"a", "b,c", "say \"hi\"", "line\nbreak", ""};
    const auto parsed = csv::parse(csv::format_row(row));
    REQUIRE(parsed.size() == 1);
    CHECK(parsed[0] == row);
    CHECK_THROWS_AS(csv::parse("\"open"), Error);
    const auto t = csv::parse_table("x,y\r\n1,2\r\n");
    CHECK(t.column("y") == 1);
    CHECK(t.rows.at(0).at(1) == "2");
}
