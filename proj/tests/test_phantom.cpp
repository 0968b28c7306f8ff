#include <gtest/gtest.h>

#include "lesioneval/phantom.hpp"
#include "oracles.hpp"

using namespace lesioneval;

namespace {

oracle::Dims3 dims3(const Grid& g) {
    return {static_cast<int>(g.dims[0]), static_cast<int>(g.dims[1]), static_cast<int>(g.dims[2])};
}

}  // namespace

TEST(Presets, B1AndB2) {
    const auto b1 = generate(preset("b1"));
    const auto b2 = generate(preset("b2"));
    for (const auto* c : {&b1, &b2}) {
        EXPECT_EQ(c->gt.count_foreground(), 16U);
        EXPECT_EQ(c->pred.count_foreground(), 16U);
        EXPECT_EQ(oracle::dice(dims3(c->gt.grid()), c->pred.mask(), c->gt.mask()), 0.5);
        EXPECT_EQ(*dsc(c->pred, c->gt), 0.5);
    }
    const auto g2 = LesionSet::from_labeling(label_components(b2.gt));
    const auto p2 = LesionSet::from_labeling(label_components(b2.pred));
    EXPECT_EQ(score_gt(p2, g2), (std::vector<double>{0.5, 0.5}));
    EXPECT_EQ(*evaluate_case(b1, 0.5).gt_summary.recall, 0.5);
    EXPECT_EQ(*evaluate_case(b2, 0.5).gt_summary.recall, 1.0);
}

TEST(Presets, A1A2DisplacementOnlyMovesHd95) {
    for (std::int64_t offset : {3, 5, 8}) {
        const auto a1 = generate(preset("a1", offset));
        const auto a2 = generate(preset("a2", offset));
        const auto d1 = dsc(a1.pred, a1.gt);
        const auto d2 = dsc(a2.pred, a2.gt);
        EXPECT_EQ(*d1, *d2);
        const double h1 = *hd95(a1.pred, a1.gt);
        const double h2 = *hd95(a2.pred, a2.gt);
        EXPECT_GT(h2, h1);
        const auto& g = a1.gt.grid();
        EXPECT_NEAR(h1, oracle::hd95(dims3(g), g.spacing, a1.pred.mask(), a1.gt.mask()), 1e-6);
        EXPECT_NEAR(h2, oracle::hd95(dims3(g), g.spacing, a2.pred.mask(), a2.gt.mask()), 1e-6);
    }
    EXPECT_THROW(preset("a1", 2), SpecError);
}

TEST(Presets, B3B4ShapeRoles) {
    const auto b3 = evaluate_case(generate(preset("b3")), 0.5);
    EXPECT_EQ(b3.n_gt_lesions, 1U);
    EXPECT_EQ(b3.n_pred_lesions, 2U);
    EXPECT_EQ(*b3.pred_summary.precision, 1.0);
    EXPECT_EQ(*b3.iou_summary.precision, 0.5);
    const auto b4 = evaluate_case(generate(preset("b4")), 0.5);
    EXPECT_EQ(b4.n_gt_lesions, 2U);
    EXPECT_EQ(b4.n_pred_lesions, 1U);
    EXPECT_EQ(*b4.gt_summary.recall, 1.0);
    EXPECT_EQ(*b4.iou_summary.recall, 0.0);
}

TEST(Presets, UnknownAndOutOfBounds) {
    EXPECT_THROW(preset("zz"), SpecError);
    auto s = preset("b1");
    s.pred.push_back(Cuboid{{30, 30, 14}, {4, 4, 4}});
    EXPECT_THROW(generate(s), SpecError);
    auto touching = preset("b1");
    touching.gt.push_back(Cuboid{{6, 6, 6}, {2, 2, 2}});
    EXPECT_THROW(generate(touching), SpecError);
}

TEST(Corpus, DeterministicAndWellFormed) {
    CorpusParams p;
    p.n_cases = 8;
    p.seed = 7;
    p.noise.max_shift = 1;
    p.noise.blur_radius = 1;
    p.noise.max_spurious = 1;
    const auto a = random_corpus(p);
    const auto b = random_corpus(p);
    ASSERT_EQ(a.size(), 8U);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_EQ(a[i].gt, b[i].gt);
        EXPECT_EQ(a[i].pred, b[i].pred);
        EXPECT_EQ(a[i].pred.kind(), VolumeKind::probability);
        const auto lab = label_components(a[i].gt);
        EXPECT_GE(lab.count(), 1U);
        EXPECT_LE(lab.count(), 3U);
        for (auto sz : lab.sizes) EXPECT_GE(sz, 8U);
    }
    p.seed = 8;
    EXPECT_FALSE(random_corpus(p)[0].gt == a[0].gt);
}

TEST(Corpus, ZeroNoiseIsPerfect) {
    CorpusParams p;
    p.n_cases = 5;
    p.seed = 3;
    for (const auto& c : random_corpus(p)) {
        for (std::size_t i = 0; i < c.gt.size(); ++i) ASSERT_EQ(c.gt[i], c.pred[i]);
        for (double cutoff : {0.01, 0.5, 1.0}) EXPECT_EQ(evaluate_case(c, cutoff).voxel.dsc.value, 1.0);
    }
}

TEST(ScenarioJson, PresetShapesAndRandom) {
    const auto s = scenario_from_json(nlohmann::json::parse(R"({"id":"b2"})"));
    EXPECT_EQ(*dsc(generate(s).pred, generate(s).gt), 0.5);
    const auto custom = scenario_from_json(nlohmann::json::parse(
        R"({"id":"x","dims":[8,8,8],"spacing_mm":[1,1,1],
            "gt":[{"cuboid":{"corner":[1,1,1],"size":[2,2,2]}}],
            "pred":[{"cuboid":{"corner":[1,1,1],"size":[2,2,2]}}]})"));
    EXPECT_EQ(*dsc(generate(custom).pred, generate(custom).gt), 1.0);
    EXPECT_THROW(scenario_from_json(nlohmann::json::parse(R"({"id":"nope"})")), SpecError);
}
