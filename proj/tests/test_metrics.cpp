#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "mogen/metrics.hpp"
#include "mogen/rng.hpp"

using namespace mogen;

TEST_CASE("numerical accuracy: oracle consistency and boundary fixtures") {
    DataConfig cfg;
    std::vector<Image> renders;
    std::vector<SceneSpec> specs;
    for (uint64_t s = 0; s < 40; ++s) {
        specs.push_back(gen_scene(s, cfg));
        renders.push_back(render(specs.back()));
    }
    CHECK(numerical_accuracy(renders, specs) == 100.0);

    SUBCASE("all-white generations score zero") {
        std::vector<Image> white(specs.size(), Image(32, 32, 1.0, 1.0, 1.0));
        CHECK(numerical_accuracy(white, specs) == 0.0);
    }

    SUBCASE("a half-correct fixture scores 50") {
        std::vector<Image> mixed = renders;
        for (size_t i = 0; i < mixed.size(); i += 2) mixed[i] = Image(32, 32, 1.0, 1.0, 1.0);
        CHECK(numerical_accuracy(mixed, specs) == 50.0);
    }

    SUBCASE("length mismatch is an error") {
        std::vector<Image> shorter(renders.begin(), renders.end() - 1);
        CHECK_THROWS_AS(numerical_accuracy(shorter, specs), ContractError);
    }
}

TEST_CASE("detector: color threshold and area floor") {
    Image img(32, 32, 1.0, 1.0, 1.0);
    // a 3-pixel blob is below the area floor
    img.at(4, 4, 0) = 1.0; img.at(4, 4, 1) = 0.0; img.at(4, 4, 2) = 0.0;
    img.at(4, 5, 0) = 1.0; img.at(4, 5, 1) = 0.0; img.at(4, 5, 2) = 0.0;
    img.at(5, 4, 0) = 1.0; img.at(5, 4, 1) = 0.0; img.at(5, 4, 2) = 0.0;
    CHECK(detect_objects(img).empty());
    // the fourth pixel crosses the floor
    img.at(5, 5, 0) = 1.0; img.at(5, 5, 1) = 0.0; img.at(5, 5, 2) = 0.0;
    auto det = detect_objects(img);
    REQUIRE(det.size() == 1);
    CHECK(det[0].color == ColorKind::red);
    CHECK(det[0].area == 4);

    SUBCASE("near-palette colors within the threshold are detected") {
        Image tinted(16, 16, 1.0, 1.0, 1.0);
        for (size_t y = 2; y < 6; ++y)
            for (size_t x = 2; x < 6; ++x) {
                tinted.at(y, x, 0) = 0.9;   // slightly off pure red
                tinted.at(y, x, 1) = 0.08;
                tinted.at(y, x, 2) = 0.05;
            }
        CHECK(detect_objects(tinted).size() == 1);
    }

    SUBCASE("diagonally touching same-color blobs stay separate under 4-connectivity") {
        Image diag(16, 16, 1.0, 1.0, 1.0);
        auto paint = [&](size_t y0, size_t x0) {
            for (size_t y = y0; y < y0 + 2; ++y)
                for (size_t x = x0; x < x0 + 2; ++x) {
                    diag.at(y, x, 0) = 0.0;
                    diag.at(y, x, 1) = 1.0;
                    diag.at(y, x, 2) = 0.0;
                }
        };
        paint(2, 2);
        paint(4, 4);  // touches only at the corner
        CHECK(detect_objects(diag).size() == 2);
    }
}

TEST_CASE("spatial similarity: self-match, disjoint, analytic IoU") {
    DataConfig cfg;
    SceneSpec spec = gen_scene(12, cfg);
    Image img = render(spec);
    AnnotationBundle ann = annotate(spec, img);

    SUBCASE("ground truth against its own boxes is a perfect match") {
        const double sim = spatial_sim({img}, {ann.boxes});
        CHECK(sim >= 1.0 - 0.02);
    }

    SUBCASE("fully disjoint detections score zero") {
        std::vector<NormBox> far = {{0.9, 0.9, 0.99, 0.99}};
        Image empty(32, 32, 1.0, 1.0, 1.0);
        CHECK(spatial_sim({empty}, {far}) == 0.0);
    }

    SUBCASE("squares offset by half their side overlap at one third") {
        NormBox a{0.0, 0.0, 0.5, 0.5};
        NormBox b{0.25, 0.0, 0.75, 0.5};
        CHECK(std::fabs(a.iou(b) - 1.0 / 3.0) < 1e-12);
    }
}

TEST_CASE("appearance similarity: identity, disjoint palettes, derived mixture") {
    Image red(8, 8, 1.0, 0.0, 0.0);
    Image blue(8, 8, 0.0, 0.0, 1.0);
    Image mix(8, 8, 1.0, 0.0, 0.0);
    for (size_t y = 0; y < 8; ++y)
        for (size_t x = 4; x < 8; ++x) {
            mix.at(y, x, 0) = 1.0;
            mix.at(y, x, 1) = 1.0;
            mix.at(y, x, 2) = 1.0;
        }

    CHECK(histogram_cosine(color_histogram(red), color_histogram(red)) ==
          doctest::Approx(1.0).epsilon(1e-12));
    CHECK(histogram_cosine(color_histogram(red), color_histogram(blue)) == 0.0);
    // half red / half white against pure red: cosine is 1/sqrt(2)
    CHECK(histogram_cosine(color_histogram(red), color_histogram(mix)) ==
          doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-12));
}

TEST_CASE("image similarity: identity, extremes, monotone noise response") {
    Image img(16, 16, 0.3, 0.6, 0.9);
    CHECK(img_sim(img, img) == 1.0);

    Image black(16, 16, 0.0, 0.0, 0.0);
    Image white(16, 16, 1.0, 1.0, 1.0);
    CHECK(img_sim(black, white) == 0.0);

    Rng rng(5);
    auto noised = [&](double level) {
        Image out = img;
        Rng local(9);
        for (double& v : out.px) v = std::min(1.0, std::max(0.0, v + level * local.normal()));
        return out;
    };
    const double s1 = img_sim(img, noised(0.05));
    const double s2 = img_sim(img, noised(0.10));
    const double s3 = img_sim(img, noised(0.20));
    CHECK(s1 > s2);
    CHECK(s2 > s3);
    CHECK(s3 > 0.0);
}

TEST_CASE("evaluate_set produces per-item rows consistent with aggregates") {
    DataConfig cfg;
    auto items = make_dataset(31, 12, cfg);
    std::vector<const DatasetItem*> refs;
    std::vector<Image> gens;
    for (const auto& it : items) {
        refs.push_back(&it);
        gens.push_back(it.image);  // ground truth as generation
    }
    MetricReport rep = evaluate_set(gens, refs);
    CHECK(rep.items == 12);
    CHECK(rep.numerical == 100.0);
    CHECK(rep.spatial >= 1.0 - 0.02);
    CHECK(rep.image_similarity == 1.0);
    REQUIRE(rep.rows.size() == 12);
    for (const auto& r : rep.rows) CHECK(r.detected == r.expected);
}
