#include <gtest/gtest.h>

#include <cmath>

#include "plabel/detector.hpp"
#include "plabel/error.hpp"
#include "plabel/scenario.hpp"
#include "support/builders.hpp"
#include "support/oracles.hpp"

namespace plabel {
namespace {

using testing::image;
using testing::manual;

ScenarioConfig small_scenario(std::uint64_t seed = 3) {
  ScenarioConfig sc;
  sc.seed = seed;
  sc.scale = 0.02;
  return sc;
}

SyntheticModel perfect() {
  SyntheticModel m;
  m.recall_base = 1.0;
  m.recall_gain = 0.0;
  m.fp_rate = 0.0;
  m.localization_jitter = 0.0;
  return m;
}

TEST(SyntheticDetector, EmptyTrainSetGivesBaseRecall) {
  SyntheticModel m;
  m.recall_base = 0.2;
  const auto s = fit_synthetic(m, DatasetSnapshot({image("a", 100, 100)}));
  for (double r : s.recall) EXPECT_DOUBLE_EQ(r, 0.2);
}

TEST(SyntheticDetector, RecallGrowsWithCounts) {
  const SyntheticModel m;
  std::vector<Annotation> one, two;
  for (int i = 0; i < 10; ++i) {
    one.push_back(manual(10.0 * i, 0, 5, 5, 2));
    two.push_back(manual(10.0 * i, 0, 5, 5, 2));
    two.push_back(manual(10.0 * i, 50, 5, 5, 2));
  }
  const auto a = fit_synthetic(m, DatasetSnapshot({image("a", 200, 200, one)}));
  const auto b = fit_synthetic(m, DatasetSnapshot({image("a", 200, 200, two)}));
  EXPECT_GT(b.recall[1], a.recall[1]);
  EXPECT_DOUBLE_EQ(a.recall[1], m.recall_gain * std::log1p(10.0));
}

TEST(SyntheticDetector, PenaltiesReduceEffectiveCount) {
  ImageRecord r = image("a", 200, 200, {manual(0, 0, 10, 10, 1), manual(100, 100, 10, 10, 1)});
  r.hidden_truth = std::vector<Annotation>{manual(0, 0, 10, 10, 1), manual(50, 50, 10, 10, 1),
                                           manual(150, 150, 10, 10, 1)};
  SyntheticModel m;
  m.missing_label_penalty = 0.5;
  m.false_label_penalty = 0.25;
  const auto s = fit_synthetic(m, DatasetSnapshot({r}));
  EXPECT_EQ(s.n_true[0], 1.0);
  EXPECT_EQ(s.n_false[0], 1.0);
  EXPECT_EQ(s.n_missing[0], 2.0);
  EXPECT_DOUBLE_EQ(s.n_effective[0], 0.0);  // 1 - 0.5 * 2 - 0.25 * 1 < 0
}

TEST(SyntheticDetector, PerfectOracleReturnsHiddenTruth) {
  const auto sc = generate_scenario(small_scenario());
  auto h = train(DetectorHandle::synthetic(perfect()), sc.train);
  const auto dets = infer(h, sc.train);
  std::size_t hidden = 0;
  for (const auto& img : sc.train.images()) hidden += img.hidden_truth->size();
  ASSERT_EQ(dets.size(), hidden);
  for (const auto& d : dets) {
    const auto& truth = *sc.train.find(d.image_id)->hidden_truth;
    EXPECT_TRUE(std::any_of(truth.begin(), truth.end(), [&](const Annotation& a) {
      return a.box == d.box && a.category == d.category;
    }));
  }
}

TEST(SyntheticDetector, ZeroRecallZeroFpIsEmpty) {
  SyntheticModel m;
  m.recall_gain = 0.0;
  m.fp_rate = 0.0;
  const auto sc = generate_scenario(small_scenario());
  EXPECT_TRUE(infer(train(DetectorHandle::synthetic(m), sc.train), sc.train).empty());
}

TEST(SyntheticDetector, DeterministicAndThreadInvariant) {
  const auto sc = generate_scenario(small_scenario());
  SyntheticModel m;
  m.seed = 8;
  const auto h = train(DetectorHandle::synthetic(m), sc.train);
  const auto a = infer(h, sc.train, 1);
  EXPECT_EQ(a, infer(h, sc.train, 1));
  EXPECT_EQ(a, infer(h, sc.train, 6));
  EXPECT_FALSE(a.empty());
  for (const auto& d : a) {
    EXPECT_GT(d.score, 0.0);
    EXPECT_LT(d.score, 1.0);
  }
}

TEST(SyntheticDetector, JitteredTruePositivesStillMatch) {
  SyntheticModel m = perfect();
  m.localization_jitter = 2.0;
  const auto sc = generate_scenario(small_scenario(5));
  const auto dets = infer(train(DetectorHandle::synthetic(m), sc.train), sc.train);
  for (const auto& d : dets) {
    const auto& truth = *sc.train.find(d.image_id)->hidden_truth;
    EXPECT_TRUE(std::any_of(truth.begin(), truth.end(), [&](const Annotation& a) {
      return a.category == d.category && oracle::cf(d.box, a.box);
    }));
  }
}

TEST(SyntheticDetector, TagChangesPerGeneration) {
  const auto sc = generate_scenario(small_scenario());
  const auto h1 = train(DetectorHandle::synthetic({}), sc.train);
  const auto h2 = train(h1, sc.train);
  EXPECT_EQ(h2.generation, 2);
  EXPECT_NE(h1.artifact_tag, h2.artifact_tag);
}

TEST(SyntheticDetector, Contracts) {
  EXPECT_THROW(infer(DetectorHandle::synthetic({}), DatasetSnapshot({})), Error);
  const DatasetSnapshot val({image("a", 10, 10)}, Split::Validation);
  EXPECT_THROW(train(DetectorHandle::synthetic({}), val), Error);
  SyntheticModel bad;
  bad.fp_rate = -1;
  EXPECT_THROW(DetectorHandle::synthetic(bad), Error);
}

class ExternalDetector : public ::testing::Test {
 protected:
  ExternalSpec spec(const std::string& mode) {
    ::setenv("FAKE_ADAPTER_MODE", mode.c_str(), 1);
    ::setenv("FAKE_SECRET", "1", 1);
    ExternalSpec s;
    s.command = {FAKE_ADAPTER_PATH};
    s.workdir = dir_.path() / mode;
    s.timeout = std::chrono::seconds(20);
    s.env_allowlist.push_back("FAKE_ADAPTER_MODE");
    return s;
  }

  DatasetSnapshot data() const {
    ImageRecord r = image("img-1", 100, 100, {manual(10, 10, 5, 5, 2)});
    r.hidden_truth = std::vector<Annotation>{manual(10, 10, 5, 5, 2), manual(60, 60, 5, 5, 1)};
    return DatasetSnapshot({r});
  }

  static ErrorKind kind_of(const std::function<void()>& fn, std::string* what = nullptr) {
    try {
      fn();
    } catch (const Error& e) {
      if (what) *what = e.what();
      return e.kind();
    }
    ADD_FAILURE() << "no error raised";
    return ErrorKind::Io;
  }

  testing::TempDir dir_;
};

TEST_F(ExternalDetector, TrainInferRoundTrip) {
  const auto h = train(DetectorHandle::external_adapter(spec("echo")), data());
  EXPECT_EQ(h.generation, 1);
  EXPECT_EQ(h.artifact_tag.size(), 64u);
  const auto dets = infer(h, data());
  ASSERT_EQ(dets.size(), 1u);
  EXPECT_EQ(dets[0].box, (BBox{10, 10, 5, 5}));
  EXPECT_EQ(dets[0].score, 0.9);

  const std::string env = testing::slurp(h.model_dir / "env.txt");
  EXPECT_NE(env.find("FAKE_SECRET=unset"), std::string::npos);
  // First train call: no previous model.
  EXPECT_NE(env.find("PLABEL_MODEL_DIR=\n"), std::string::npos);
  const auto h2 = train(h, data());
  EXPECT_NE(testing::slurp(h2.model_dir / "env.txt")
                .find("PLABEL_MODEL_DIR=" + h.model_dir.string()),
            std::string::npos);
}

TEST_F(ExternalDetector, ExportedFilesCarryNoHiddenTruth) {
  const auto h = train(DetectorHandle::external_adapter(spec("echo")), data());
  infer(h, data());
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir_.path())) {
    if (e.path().filename() == "dataset.json") {
      EXPECT_EQ(testing::slurp(e.path()).find("hidden_truth"), std::string::npos);
    }
  }
}

TEST_F(ExternalDetector, NonzeroExitCarriesStderr) {
  std::string what;
  EXPECT_EQ(kind_of([&] { train(DetectorHandle::external_adapter(spec("fail")), data()); },
                    &what),
            ErrorKind::Detector);
  EXPECT_NE(what.find("boom: training diverged"), std::string::npos);
}

TEST_F(ExternalDetector, Timeout) {
  auto s = spec("sleep");
  s.timeout = std::chrono::milliseconds(300);
  const auto t0 = std::chrono::steady_clock::now();
  EXPECT_EQ(kind_of([&] { train(DetectorHandle::external_adapter(s), data()); }),
            ErrorKind::Timeout);
  EXPECT_LT(std::chrono::steady_clock::now() - t0, std::chrono::seconds(10));
}

TEST_F(ExternalDetector, ProtocolViolations) {
  const auto bad = train(DetectorHandle::external_adapter(spec("bad_score")), data());
  EXPECT_EQ(kind_of([&] { infer(bad, data()); }), ErrorKind::Protocol);
  const auto none = train(DetectorHandle::external_adapter(spec("no_output")), data());
  EXPECT_EQ(kind_of([&] { infer(none, data()); }), ErrorKind::Protocol);
}

TEST_F(ExternalDetector, MissingBinary) {
  auto s = spec("echo");
  s.command = {"/nonexistent/detector"};
  EXPECT_EQ(kind_of([&] { train(DetectorHandle::external_adapter(s), data()); }),
            ErrorKind::Detector);
}

}  // namespace
}  // namespace plabel
