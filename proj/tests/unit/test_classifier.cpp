#include <doctest.h>

#include <fstream>
#include <map>

#include "test_support.hpp"
#include "uda/metrics.hpp"

using namespace uda;
using namespace uda::classifier;
using data::Label;

namespace {

data::DomainDataset domain(const std::string& name, int per_class, int size = 16) {
  auto g = testing::small_gen(per_class, size);
  return data::generate_domain(g, name, data::StyleConfig::identity());
}

data::DomainDataset synthesized_copy(const data::DomainDataset& src) {
  auto out = src;
  out.domain = "A_to_B";
  for (auto& s : out.samples) {
    s.id += data::kSynthSuffix;
    s.provenance.synthesized_from = src.domain;
    for (float& p : s.image.pixels) p = data::quantize(1.0f - p);
  }
  return out;
}

// Constant dark negatives and constant bright positives.
data::DomainDataset blank_vs_bright(int per_class, int size = 16) {
  data::DomainDataset ds{"toy", size, {}};
  for (int i = 0; i < 2 * per_class; ++i) {
    const bool pos = i % 2 == 0;
    ds.samples.push_back({data::Image(size, pos ? data::quantize(0.9f) : data::quantize(0.1f)),
                          pos ? Label::positive : Label::negative, "t" + std::to_string(100 + i), {}});
  }
  return ds;
}

TrainSpec quick(int epochs = 2, std::uint64_t seed = 3) {
  TrainSpec s;
  s.epochs = epochs;
  s.batch_size = 8;
  s.width = 4;
  s.seed = seed;
  return s;
}

}  // namespace

TEST_CASE("mix_datasets bookkeeping") {
  const auto src = domain("A", 10);
  const auto syn = synthesized_copy(src);
  const auto mixed = mix_datasets(src, syn);
  CHECK(mixed.size() == 40);
  CHECK(mixed.count(Label::positive) == 20);
  mixed.validate();
  std::map<std::string, Label> by_id;
  for (const auto& s : mixed.samples) by_id[s.id] = s.label;
  for (const auto& s : src.samples) {
    REQUIRE(by_id.count(s.id) == 1);
    REQUIRE(by_id.count(s.id + data::kSynthSuffix) == 1);
    CHECK(by_id[s.id] == by_id[s.id + data::kSynthSuffix]);
  }
  CHECK(mix_datasets(src, syn) == mixed);

  data::DomainDataset empty{"A_to_B", 16, {}};
  const auto alone = mix_datasets(src, empty);
  CHECK(alone.size() == src.size());
  auto sorted_ids = [](const data::DomainDataset& d) {
    std::vector<std::string> v;
    for (const auto& s : d.samples) v.push_back(s.id);
    std::sort(v.begin(), v.end());
    return v;
  };
  CHECK(sorted_ids(alone) == sorted_ids(src));

  const auto half = mix_datasets(src, syn, 0.5);
  CHECK(half.size() == 30);
}

TEST_CASE("mix_datasets preconditions") {
  const auto src = domain("A", 3);
  CHECK_THROWS_AS(mix_datasets(src, domain("B", 3)), ValidationError);
  CHECK_THROWS_AS(mix_datasets(src, synthesized_copy(domain("A", 3, 24))), ValidationError);
  CHECK_THROWS_AS(mix_datasets(src, synthesized_copy(src), 1.5), ValidationError);
}

TEST_CASE("init_classifier and spec validation") {
  CHECK_THROWS_AS(init_classifier(Arch::mini_alexnet, 20, quick()), ValidationError);
  auto bad = quick();
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(init_classifier(Arch::mini_resnet, 16, bad), ValidationError);
  CHECK(parse_arch("mini_resnet") == Arch::mini_resnet);
  CHECK_THROWS_AS(parse_arch("vgg"), ValidationError);
  nlohmann::json j = quick(7, 9);
  CHECK(j.get<TrainSpec>() == quick(7, 9));
}

TEST_CASE("zero epochs returns the initialized model") {
  const auto train = domain("A", 4);
  for (Arch arch : {Arch::mini_alexnet, Arch::mini_resnet}) {
    const auto model = train_classifier(train, arch, quick(0));
    CHECK(model.epochs_trained == 0);
    CHECK(model.parameters_equal(init_classifier(arch, 16, quick(0))));
    const auto scores = predict_scores(model, train);
    CHECK(scores.rows.size() == train.size());
  }
}

TEST_CASE("a separable toy set is learned perfectly") {
  const auto toy = blank_vs_bright(12);
  for (Arch arch : {Arch::mini_alexnet, Arch::mini_resnet}) {
    const auto model = train_classifier(toy, arch, quick(5));
    CHECK(model.epochs_trained == 5);
    CHECK(metrics::roc_auc(predict_scores(model, toy)) == 1.0);
  }
}

TEST_CASE("training is deterministic given the seed") {
  const auto train = domain("A", 6);
  for (Arch arch : {Arch::mini_alexnet, Arch::mini_resnet}) {
    const auto a = train_classifier(train, arch, quick(2, 5));
    const auto b = train_classifier(train, arch, quick(2, 5));
    CHECK(a.parameters_equal(b));
    CHECK_FALSE(train_classifier(train, arch, quick(2, 6)).parameters_equal(a));
  }
}

TEST_CASE("training preconditions and failures") {
  auto train = domain("A", 4);
  for (auto& s : train.samples) s.label = Label::positive;
  CHECK_THROWS_AS(train_classifier(train, Arch::mini_alexnet, quick()), ValidationError);
  data::DomainDataset empty{"A", 16, {}};
  CHECK_THROWS_AS(train_classifier(empty, Arch::mini_alexnet, quick()), ValidationError);

  auto wild = quick(3);
  wild.learning_rate = 1e30;
  try {
    train_classifier(domain("A", 4), Arch::mini_alexnet, wild);
    FAIL("expected TrainingError");
  } catch (const TrainingError& e) {
    CHECK(e.step() >= 0);
    CHECK(e.step() < 3);
  }
}

TEST_CASE("scoring contract") {
  const auto train = domain("A", 6);
  const auto test = domain("B", 5);
  const auto model = train_classifier(train, Arch::mini_resnet, quick(1));
  const auto s = predict_scores(model, test);
  REQUIRE(s.rows.size() == test.size());
  CHECK(s.test_domain == "B");
  CHECK(s.arch == "mini_resnet");
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    CHECK(s.rows[i].id == test.samples[i].id);
    CHECK(s.rows[i].true_label == test.samples[i].label);
    CHECK(s.rows[i].score >= 0.0);
    CHECK(s.rows[i].score <= 1.0);
  }
  CHECK(predict_scores(model, test) == s);
  CHECK_THROWS_AS(predict_scores(model, domain("B", 2, 24)), ValidationError);
}

TEST_CASE("scores do not depend on test-set order") {
  const auto model = train_classifier(domain("A", 6), Arch::mini_alexnet, quick(1));
  const auto test = domain("B", 8);
  auto shuffled = test;
  std::mt19937_64 rng(4);
  std::shuffle(shuffled.samples.begin(), shuffled.samples.end(), rng);
  std::map<std::string, double> a, b;
  for (const auto& r : predict_scores(model, test).rows) a[r.id] = r.score;
  for (const auto& r : predict_scores(model, shuffled).rows) b[r.id] = r.score;
  CHECK(a == b);
}

TEST_CASE("scores CSV round trip") {
  testing::TempDir dir;
  const auto model = train_classifier(domain("A", 4), Arch::mini_alexnet, quick(1));
  auto s = predict_scores(model, domain("B", 4));
  write_scores_csv(s, dir.path() / "s.csv");
  const auto back = read_scores_csv(dir.path() / "s.csv");
  REQUIRE(back.rows.size() == s.rows.size());
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    CHECK(back.rows[i].id == s.rows[i].id);
    CHECK(back.rows[i].true_label == s.rows[i].true_label);
    CHECK(back.rows[i].score == std::strtod(fixed9(s.rows[i].score).c_str(), nullptr));
  }
  std::ofstream(dir.path() / "bad.csv") << "id,score\nx,0.5\n";
  CHECK_THROWS_AS(read_scores_csv(dir.path() / "bad.csv"), IoError);
  std::ofstream(dir.path() / "bad2.csv") << "id,true_label,score\nx,2,0.5\n";
  CHECK_THROWS_AS(read_scores_csv(dir.path() / "bad2.csv"), IoError);
}

TEST_CASE("classifier save/load round trip") {
  testing::TempDir dir;
  const auto train = domain("A", 4);
  for (Arch arch : {Arch::mini_alexnet, Arch::mini_resnet}) {
    const auto model = train_classifier(train, arch, quick(1));
    save_classifier(model, dir.path() / arch_name(arch));
    const auto back = load_classifier(dir.path() / arch_name(arch));
    CHECK(back.arch == arch);
    CHECK(back.spec == model.spec);
    CHECK(back.epochs_trained == 1);
    CHECK(back.parameters_equal(model));
    CHECK(predict_scores(back, train) == predict_scores(model, train));
  }
  CHECK_THROWS_AS(load_classifier(dir.path() / "missing"), IoError);
}
