#include <gtest/gtest.h>

#include "cds/json_io.hpp"

using namespace cds;

TEST(AnnotationJson, RoundTrips) {
  const std::vector<Annotation> cases{
      Scribble{{{1, 2}, {3, 4}}, {{5, 6}}},
      Scribble{{{0, 0}}, {}},
      Box{1, 2, 30, 40},
      LooseBox{Box{0, 0, 9, 9}, 120.0},
  };
  for (const auto& a : cases) {
    const auto j = annotation_to_json(a);
    const auto back = annotation_from_json(Json::parse(j.dump()));
    EXPECT_EQ(annotation_to_json(back), j);
  }
}

TEST(AnnotationJson, ParsesDocumentedShapes) {
  const auto s = annotation_from_json(Json::parse(R"({"type":"scribble","fg":[[10,12]],"bg":[[0,0],[1,1]]})"));
  ASSERT_TRUE(std::holds_alternative<Scribble>(s));
  EXPECT_EQ(std::get<Scribble>(s).fg.front(), cv::Point(10, 12));
  EXPECT_EQ(std::get<Scribble>(s).bg.size(), 2u);

  const auto b = annotation_from_json(Json::parse(R"({"type":"box","box":[1,2,3,4]})"));
  EXPECT_EQ(std::get<Box>(b).x1, 3);

  const auto l = annotation_from_json(Json::parse(R"({"type":"loose-box","box":[1,2,3,4],"looseness":240})"));
  EXPECT_DOUBLE_EQ(std::get<LooseBox>(l).looseness, 240.0);
}

TEST(AnnotationJson, RejectsMalformed) {
  for (const char* text : {
           R"([])",
           R"({})",
           R"({"type":"lasso"})",
           R"({"type":7})",
           R"({"type":"scribble"})",
           R"({"type":"scribble","fg":[]})",
           R"({"type":"scribble","fg":[[1]]})",
           R"({"type":"scribble","fg":[[1.5,2]]})",
           R"({"type":"scribble","fg":"x"})",
           R"({"type":"box"})",
           R"({"type":"box","box":[1,2,3]})",
           R"({"type":"box","box":[5,2,3,4]})",
           R"({"type":"box","box":[1,2,"3",4]})",
           R"({"type":"loose-box","box":[1,2,3,4]})",
           R"({"type":"loose-box","box":[1,2,3,4],"looseness":-1})",
           R"({"type":"loose-box","box":[1,2,3,4],"looseness":"a"})",
       }) {
    EXPECT_THROW(annotation_from_json(Json::parse(text)), ParseError) << text;
  }
}

TEST(StrategyJson, RoundTrips) {
  const std::vector<SigmaStrategy> cases{SingleSigma{0.25}, BestSigma{{0.05, 0.1, 0.2}}, SelfTuning{5}};
  for (const auto& s : cases) {
    const auto j = strategy_to_json(s);
    EXPECT_EQ(strategy_to_json(strategy_from_json(j)), j);
  }
}

TEST(StrategyJson, Defaults) {
  EXPECT_DOUBLE_EQ(std::get<SingleSigma>(strategy_from_json({{"kind", "single"}})).value, SingleSigma{}.value);
  EXPECT_EQ(std::get<SelfTuning>(strategy_from_json({{"kind", "self-tuning"}})).k, SelfTuning{}.k);
  EXPECT_EQ(std::get<BestSigma>(strategy_from_json({{"kind", "best"}})).grid, BestSigma{}.grid);
}

TEST(StrategyJson, RejectsMalformed) {
  for (const char* text : {
           R"("single")",
           R"({"kind":"median"})",
           R"({"kind":"single","sigma":0})",
           R"({"kind":"single","sigma":"0.1"})",
           R"({"kind":"best","grid":[]})",
           R"({"kind":"best","grid":[0.1,-1]})",
           R"({"kind":"self-tuning","k":0})",
       }) {
    EXPECT_THROW(strategy_from_json(Json::parse(text)), ParseError) << text;
  }
}

TEST(MaskJson, RoundTrip) {
  SegmentationMask m(7, 3);
  for (std::size_t k = 0; k < m.fg.size(); ++k) m.fg[k] = (k * 5 % 3) == 0;
  const auto j = mask_to_json(m);
  EXPECT_EQ(j["foreground_pixels"], m.count());
  EXPECT_EQ(mask_from_json(j), m);
}

TEST(MaskJson, RejectsInconsistentRuns) {
  EXPECT_THROW(mask_from_json({{"width", 2}, {"height", 2}, {"rle", {1, 1}}}), ParseError);
  EXPECT_THROW(mask_from_json({{"width", 2}, {"rle", {4}}}), ParseError);
  EXPECT_THROW(mask_from_json({{"width", 2}, {"height", 2}, {"rle", "4"}}), ParseError);
}

TEST(CosegJson, Options) {
  CosegConfig cfg;
  apply_coseg_options(cfg, {{"objectness", "geodesic"}, {"run_output", "union"}});
  EXPECT_EQ(cfg.objectness_provider, ObjectnessProvider::BoundaryConnectivity);
  EXPECT_EQ(cfg.run_output, RunOutput::Union);
  apply_coseg_options(cfg, {{"objectness", "builtin"}, {"run_output", "first"}});
  EXPECT_EQ(cfg.objectness_provider, ObjectnessProvider::BorderContact);
  EXPECT_EQ(cfg.run_output, RunOutput::FirstCluster);
  EXPECT_THROW(apply_coseg_options(cfg, {{"objectness", "saliency"}}), ParseError);
  EXPECT_THROW(apply_coseg_options(cfg, {{"run_output", 1}}), ParseError);
  EXPECT_THROW(apply_coseg_options(cfg, Json::array()), ParseError);
}

TEST(CosegJson, Scribbles) {
  const auto s = coseg_scribbles_from_json(Json::parse(R"([{"fg":[[1,2]]}, null])"), 2);
  ASSERT_EQ(s.size(), 2u);
  ASSERT_TRUE(s[0].has_value());
  EXPECT_EQ(s[0]->fg.size(), 1u);
  EXPECT_FALSE(s[1].has_value());
  EXPECT_THROW(coseg_scribbles_from_json(Json::parse(R"([null])"), 2), ParseError);
  EXPECT_THROW(coseg_scribbles_from_json(Json::parse(R"([1, null])"), 2), ParseError);
}
