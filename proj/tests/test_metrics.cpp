#include <doctest.h>

#include "msseg/metrics.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace msseg;
using namespace testsupport;

namespace {

BinaryMask from_rows(const std::vector<std::string>& rows) {
    std::vector<std::uint8_t> v;
    for (const auto& r : rows)
        for (char c : r) v.push_back(c == '#');
    return BinaryMask(rows.size(), rows[0].size(), v);
}

}  // namespace

TEST_CASE("accuracy examples") {
    const BinaryMask a = from_rows({"##..", "#...", "....", "..##"});
    CHECK(accuracy(a, a) == 1.0);
    std::vector<std::uint8_t> comp;
    for (auto e : a.values()) comp.push_back(!e);
    CHECK(accuracy(a, BinaryMask(4, 4, comp)) == 0.0);
    const BinaryMask b = from_rows({"#...", "##..", "....", "...#"});
    CHECK(accuracy(a, b) == 13.0 / 16.0);
    CHECK_THROWS_AS(accuracy(a, BinaryMask(2, 8, std::vector<std::uint8_t>(16))), std::invalid_argument);
}

TEST_CASE("IoU and DSC examples") {
    const BinaryMask a = from_rows({"####.", "####.", ".....", ".....", "....."});
    const BinaryMask b = from_rows({"###..", "###..", "##...", ".....", "....."});
    // intersection 6, union 8 + 8 - 6 = 10
    CHECK(iou(a, b) == 0.6);
    CHECK(dsc(a, b) == 12.0 / 16.0);
    CHECK(iou(a, a) == 1.0);
    CHECK(dsc(a, a) == 1.0);
    const BinaryMask c = from_rows({".....", ".....", ".....", "###..", "....."});
    CHECK(iou(a, c) == 0.0);
    CHECK(dsc(a, c) == 0.0);
    const BinaryMask empty(3, 3, std::vector<std::uint8_t>(9, 0));
    CHECK(iou(empty, empty) == 1.0);
    CHECK(dsc(empty, empty) == 1.0);
}

TEST_CASE("DSC and IoU identities on random pairs") {
    std::mt19937_64 rng(91);
    for (int k = 0; k < 50; ++k) {
        const BinaryMask a = random_mask(9, 11, 0.4, rng), b = random_mask(9, 11, 0.4, rng);
        const double i = iou(a, b), d = dsc(a, b);
        CHECK(std::abs(d - 2.0 * i / (1.0 + i)) < 1e-12);
        CHECK(d >= i);
        CHECK(i == iou(b, a));
        CHECK(d == dsc(b, a));
        CHECK(accuracy(a, b) == accuracy(b, a));
    }
}

TEST_CASE("mask construction") {
    CHECK_THROWS_AS(BinaryMask(2, 2, std::vector<std::uint8_t>{0, 1, 2, 0}), std::invalid_argument);
    CHECK_THROWS_AS(BinaryMask(2, 2, std::vector<std::uint8_t>{0, 1, 0}), std::invalid_argument);
    CHECK_THROWS_AS(BinaryMask::from_tensor(Tensor({1, 2, 2}, 0.5)), std::invalid_argument);
    CHECK(BinaryMask::from_tensor(Tensor({1, 2, 2}, 1.0)).count() == 4);
    CHECK(BinaryMask::from_labels({0, 2, 2, 1}, 2, 2, 2).count() == 2);
}

TEST_CASE("boundary pixels") {
    const BinaryMask sq = from_rows({".....", ".###.", ".###.", ".###.", "....."});
    const auto b = boundary_pixels(sq);
    CHECK(b.size() == 8);
    CHECK(std::find(b.begin(), b.end(), std::pair<std::size_t, std::size_t>{2, 2}) == b.end());
    // the image edge counts as outside
    const BinaryMask full(3, 3, std::vector<std::uint8_t>(9, 1));
    CHECK(boundary_pixels(full).size() == 8);
}

TEST_CASE("ASD examples") {
    const BinaryMask a = from_rows({".......", ".#.....", "......."});
    const BinaryMask b = from_rows({".......", "....#..", "......."});
    CHECK(asd(a, b) == 3.0);
    CHECK(asd(a, a) == 0.0);

    const BinaryMask s1 = from_rows({"..........", ".####.....", ".####.....", ".####.....", ".####.....", ".........."});
    const BinaryMask s2 = from_rows({"..........", "...####...", "...####...", "...####...", "...####...", ".........."});
    CHECK(std::abs(asd(s1, s2) - brute_asd(s1, s2)) < 1e-12);
    CHECK(asd(s1, s2) > 0.0);

    const BinaryMask empty(3, 7, std::vector<std::uint8_t>(21, 0));
    CHECK_THROWS_WITH_AS(asd(a, empty), doctest::Contains("undefined surface distance"), std::invalid_argument);
}

TEST_CASE("ASD matches the exhaustive oracle on random pairs") {
    std::mt19937_64 rng(92);
    std::uniform_int_distribution<std::size_t> dim(1, 16);
    int checked = 0;
    while (checked < 100) {
        const std::size_t h = dim(rng), w = dim(rng);
        const BinaryMask a = random_mask(h, w, 0.3, rng), b = random_mask(h, w, 0.3, rng);
        if (a.count() == 0 || b.count() == 0) continue;
        ++checked;
        const double got = asd(a, b);
        CHECK(std::abs(got - brute_asd(a, b)) < 1e-12);
        CHECK(got == asd(b, a));
        CHECK(got >= 0.0);
    }
}

TEST_CASE("per-class evaluation") {
    // 3 classes on 8x8: a row-band layout and a shifted prediction
    std::vector<int> gt(64), pred(64);
    for (std::size_t y = 0; y < 8; ++y)
        for (std::size_t x = 0; x < 8; ++x) {
            gt[y * 8 + x] = y < 3 ? 0 : (y < 6 ? 1 : 2);
            pred[y * 8 + x] = y < 4 ? 0 : (y < 6 ? 1 : 2);
        }
    const EvaluationReport r = evaluate(pred, gt, 3, 8, 8);
    REQUIRE(r.classes.size() == 3);
    // class 0: pred rows 0-3 (32), gt rows 0-2 (24), overlap 24
    CHECK(r.classes[0].iou == 24.0 / 32.0);
    CHECK(r.classes[0].dsc == 48.0 / 56.0);
    CHECK(r.classes[0].accuracy == 56.0 / 64.0);
    // class 1: pred rows 4-5 (16), gt rows 3-5 (24), overlap 16
    CHECK(r.classes[1].iou == 16.0 / 24.0);
    CHECK(r.classes[1].dsc == 32.0 / 40.0);
    CHECK(r.classes[2].iou == 1.0);
    CHECK(r.classes[2].asd == 0.0);
    CHECK(r.iou == doctest::Approx((0.75 + 2.0 / 3.0 + 1.0) / 3.0).epsilon(1e-15));
    CHECK(r.asd_classes == 3);
    for (int c = 0; c < 3; ++c) {
        const BinaryMask p = BinaryMask::from_labels(pred, 8, 8, c), g = BinaryMask::from_labels(gt, 8, 8, c);
        CHECK(r.classes[c].asd == brute_asd(p, g));
    }

    const EvaluationReport perfect = evaluate(gt, gt, 3, 8, 8);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.iou == 1.0);
    CHECK(perfect.dsc == 1.0);
    CHECK(perfect.asd == 0.0);

    // a class absent from both maps is skipped for ASD and scores 1 elsewhere
    const EvaluationReport four = evaluate(gt, gt, 4, 8, 8);
    CHECK(four.classes[3].iou == 1.0);
    CHECK_FALSE(four.classes[3].asd_defined);
    CHECK(four.asd_classes == 3);
    CHECK_THROWS_AS(evaluate(pred, gt, 2, 8, 8), std::invalid_argument);
}

TEST_CASE("two-class symmetric maps") {
    std::vector<int> gt(36), pred(36);
    for (std::size_t p = 0; p < 36; ++p) {
        gt[p] = p % 6 < 3;
        pred[p] = p % 6 < 2;
    }
    const EvaluationReport r = evaluate(pred, gt, 2, 6, 6);
    CHECK(r.classes[0].accuracy == r.classes[1].accuracy);
    CHECK(r.accuracy == r.classes[0].accuracy);
}

TEST_CASE("tensor evaluation argmaxes with low-index ties") {
    Tensor a({2, 1, 2}, std::vector<double>{0.5, 0.9, 0.5, 0.1});
    Tensor g({2, 1, 2}, std::vector<double>{1.0, 1.0, 0.0, 0.0});
    CHECK(macro_average(Metric::Accuracy, a, g) == 1.0);
    CHECK(macro_average(Metric::DSC, g, g) == 1.0);
    CHECK(metric_name(Metric::IoU) == "IoU");
}
