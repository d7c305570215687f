#include <doctest.h>

#include <fstream>
#include <set>

#include "test_support.hpp"
#include "uda/dataset_io.hpp"
#include "uda/split.hpp"
#include "uda/style.hpp"
#include "uda/synthetic.hpp"

using namespace uda;
using namespace uda::data;

namespace {

Image constant(int n, float v) { return Image(n, v); }

bool all_equal(const Image& img, float v, float tol = 1e-6f) {
  for (float p : img.pixels) {
    if (std::abs(p - v) > tol) return false;
  }
  return true;
}

std::set<std::string> ids(const DomainDataset& ds) {
  std::set<std::string> out;
  for (const auto& s : ds.samples) out.insert(s.id);
  return out;
}

DomainDataset balanced(int per_class, int size = 16) {
  auto g = testing::small_gen(per_class, size);
  return generate_domain(g, "A", StyleConfig::identity());
}

}  // namespace

TEST_CASE("apply_style examples") {
  const StyleConfig id = StyleConfig::identity();
  CHECK(id.is_identity());

  auto ds = balanced(4);
  for (const auto& s : ds.samples) CHECK(apply_style(s.image, id, 1) == s.image);

  StyleConfig inv;
  inv.invert = true;
  CHECK(all_equal(apply_style(constant(8, 0.5f), inv, 1), 0.5f));

  StyleConfig g;
  g.gamma = 0.5;
  CHECK(all_equal(apply_style(constant(8, 0.25f), g, 1), 0.5f));
}

TEST_CASE("apply_style stays in range and is seed-deterministic") {
  StyleConfig harsh{0.3, 3.0, 0.4, 0.5, 1.2, true};
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(16);
  for (float& p : img.pixels) p = u(rng);
  const auto a = apply_style(img, harsh, 9);
  const auto b = apply_style(img, harsh, 9);
  CHECK(a == b);
  for (float p : a.pixels) {
    CHECK(p >= 0.0f);
    CHECK(p <= 1.0f);
  }
  CHECK(apply_style(img, harsh, 10) != a);
}

TEST_CASE("gaussian blur preserves constants") {
  CHECK(all_equal(gaussian_blur(constant(9, 0.3f), 1.5), 0.3f));
}

TEST_CASE("generator counts and determinism") {
  GenConfig cfg;
  cfg.n_pos = 200;
  cfg.n_neg = 200;
  cfg.image_size = 64;
  cfg.seed = 7;
  const auto [a, b] = generate_synthetic_pair(cfg);
  CHECK(a.size() == 400);
  CHECK(b.size() == 400);
  CHECK(a.count(Label::positive) == 200);
  CHECK(b.count(Label::negative) == 200);
  a.validate();
  b.validate();
  const auto [a2, b2] = generate_synthetic_pair(cfg);
  CHECK(a == a2);
  CHECK(b == b2);
  cfg.seed = 8;
  CHECK(generate_synthetic_pair(cfg).first != a);
}

TEST_CASE("each domain follows one generator path") {
  auto cfg = testing::small_gen(6);
  cfg.style_b = StyleConfig::identity();
  const auto [a, b] = generate_synthetic_pair(cfg);
  CHECK(generate_domain(cfg, "A", StyleConfig::identity()) == a);
  CHECK(generate_domain(cfg, "B", StyleConfig::identity()) == b);
  for (const auto& s : b.samples) {
    const int index = std::stoi(s.id.substr(s.id.find_last_of('_') + 1));
    auto content = render_content(cfg, "B", index, s.label);
    quantize(content);
    CHECK(content == s.image);
  }
}

TEST_CASE("default shift separates the domain means") {
  const auto [a, b] = generate_synthetic_pair(GenConfig{});
  const double ma = mean_intensity(a);
  const double mb = mean_intensity(b);
  CHECK(std::abs(mb - ma) > 0.05);
  // Regression values for the default generator.
  CHECK(ma == doctest::Approx(0.304081).epsilon(1e-5));
  CHECK(mb == doctest::Approx(0.492219).epsilon(1e-5));
}

TEST_CASE("positives carry a brighter blob than negatives") {
  auto cfg = testing::small_gen(30, 32);
  const auto ds = generate_domain(cfg, "A", StyleConfig::identity());
  double pos_max = 0.0, neg_max = 0.0;
  for (const auto& s : ds.samples) {
    const float m = *std::max_element(s.image.pixels.begin(), s.image.pixels.end());
    (s.label == Label::positive ? pos_max : neg_max) += m / 30.0;
  }
  CHECK(pos_max > neg_max);
}

TEST_CASE("generator validation names the field") {
  GenConfig cfg;
  cfg.n_pos = 0;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("n_pos"), ValidationError);
  cfg = GenConfig{};
  cfg.style_b.gamma = -1.0;
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("style_b.gamma"), ValidationError);
  cfg = GenConfig{};
  cfg.lesion_radius_range = {5.0, 2.0};
  CHECK_THROWS_WITH_AS(cfg.validate(), doctest::Contains("lesion_radius_range"), ValidationError);
  cfg = GenConfig{};
  cfg.domain_b = cfg.domain_a;
  CHECK_THROWS_AS(generate_synthetic_pair(cfg), ValidationError);
}

TEST_CASE("generator config JSON round trip") {
  GenConfig cfg;
  cfg.style_a.noise_sigma = 0.01;
  cfg.seed = 99;
  nlohmann::json j = cfg;
  CHECK(j.get<GenConfig>() == cfg);
  CHECK(j.get<GenConfig>().hash() == cfg.hash());
  cfg.seed = 100;
  CHECK(j.get<GenConfig>().hash() != cfg.hash());
}

TEST_CASE("split examples") {
  GenConfig cfg;
  cfg.n_pos = 200;
  cfg.n_neg = 200;
  cfg.image_size = 16;
  const auto ds = generate_domain(cfg, "A", StyleConfig::identity());
  const auto [train, test] = split_dataset(ds, 0.8, 1);
  CHECK(train.size() == 320);
  CHECK(test.size() == 80);
  CHECK(train.count(Label::positive) == 160);
  CHECK(train.count(Label::negative) == 160);
  const auto [train2, test2] = split_dataset(ds, 0.8, 1);
  CHECK(ids(train) == ids(train2));
  CHECK(ids(test) == ids(test2));

  const auto small = balanced(5);
  const auto [st, se] = split_dataset(small, 0.8, 3);
  CHECK(st.size() == 8);
  CHECK(st.count(Label::positive) == 4);
  CHECK(se.size() == 2);
  CHECK(se.count(Label::negative) == 1);
}

TEST_CASE("split is a stratified partition for any fraction and seed") {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 40; ++t) {
    auto cfg = testing::small_gen(2 + static_cast<int>(rng() % 15));
    cfg.n_neg = 2 + static_cast<int>(rng() % 15);
    const auto ds = generate_domain(cfg, "A", StyleConfig::identity());
    const double frac = 0.05 + 0.9 * std::uniform_real_distribution<double>(0, 1)(rng);
    const auto [train, test] = split_dataset(ds, frac, rng());
    CHECK(train.size() + test.size() == ds.size());
    std::set<std::string> tr = ids(train), te = ids(test), all = ids(ds);
    std::set<std::string> joined = tr;
    joined.insert(te.begin(), te.end());
    CHECK(joined == all);
    CHECK(tr.size() + te.size() == all.size());
    for (Label l : {Label::positive, Label::negative}) {
      const double target = frac * static_cast<double>(ds.count(l));
      CHECK(std::abs(static_cast<double>(train.count(l)) - target) <= 1.0);
    }
  }
}

TEST_CASE("split preconditions") {
  const auto ds = balanced(5);
  CHECK_THROWS_AS(split_dataset(ds, 0.0, 1), ValidationError);
  CHECK_THROWS_AS(split_dataset(ds, 1.0, 1), ValidationError);
  auto cfg = testing::small_gen(5);
  cfg.n_pos = 1;
  CHECK_THROWS_WITH_AS(split_dataset(generate_domain(cfg, "A", StyleConfig::identity()), 0.8, 1),
                       doctest::Contains("cannot stratify"), ValidationError);
}

TEST_CASE("quantization grid") {
  CHECK(quantize(0.0f) == 0.0f);
  CHECK(quantize(1.0f) == 1.0f);
  CHECK(quantize(1.7f) == 1.0f);
  CHECK(quantize(-0.2f) == 0.0f);
  CHECK(quantize(0.5f) == 128.0f / 255.0f);
  const auto ds = balanced(3);
  for (const auto& s : ds.samples) {
    for (float p : s.image.pixels) CHECK(quantize(p) == p);
  }
}

TEST_CASE("dataset save/load round trip") {
  testing::TempDir dir;
  auto ds = balanced(6);
  save_dataset(ds, dir.path(), Partition::train, 123u);
  const auto back = load_dataset(dir.path(), "A", Partition::train);
  CHECK(back == ds);
  for (std::size_t i = 1; i < back.size(); ++i) CHECK(back.samples[i - 1].id < back.samples[i].id);
  const auto manifest = read_manifest(dir.path());
  CHECK(manifest.at("format_version") == kDatasetFormatVersion);
}

TEST_CASE("unquantized pixels are snapped on save") {
  testing::TempDir dir;
  auto ds = balanced(2);
  ds.samples[0].image.pixels[0] = 0.123456f;
  save_dataset(ds, dir.path(), Partition::test);
  const auto back = load_dataset(dir.path(), "A", Partition::test);
  const auto* s = &back.samples[0];
  for (const auto& r : back.samples) {
    if (r.id == ds.samples[0].id) s = &r;
  }
  CHECK(s->image.pixels[0] == quantize(0.123456f));
}

TEST_CASE("translated samples keep their provenance through IO") {
  testing::TempDir dir;
  auto ds = balanced(2);
  for (auto& s : ds.samples) {
    s.id += kSynthSuffix;
    s.provenance.synthesized_from = "B";
  }
  ds.domain = "A";
  save_dataset(ds, dir.path(), Partition::train);
  const auto back = load_dataset(dir.path(), "A", Partition::train);
  CHECK(back == ds);
  CHECK(Provenance::parse("synthesized_from:B") == ds.samples[0].provenance);
  CHECK(Provenance::parse("real").is_real());
  CHECK_THROWS_AS(Provenance::parse("bogus"), ValidationError);
}

TEST_CASE("dataset IO errors") {
  testing::TempDir dir;
  std::filesystem::create_directories(dir.path() / "empty" / "pos");
  CHECK_THROWS_WITH_AS(load_dataset_dir(dir.path() / "empty", "X"), doctest::Contains("no samples found"), IoError);
  CHECK_THROWS_AS(load_dataset_dir(dir.path() / "missing", "X"), IoError);

  std::filesystem::create_directories(dir.path() / "bad" / "neg");
  std::ofstream(dir.path() / "bad" / "neg" / "x.txt") << "hello";
  CHECK_THROWS_WITH_AS(load_dataset_dir(dir.path() / "bad", "X"), doctest::Contains("non-image"), IoError);

  std::filesystem::create_directories(dir.path() / "fake" / "neg");
  std::ofstream(dir.path() / "fake" / "neg" / "x.png") << "not a png";
  CHECK_THROWS_AS(load_dataset_dir(dir.path() / "fake", "X"), IoError);

  const auto ds = balanced(1);
  std::filesystem::create_directories(dir.path() / "dup" / "pos");
  std::filesystem::create_directories(dir.path() / "dup" / "neg");
  write_png(dir.path() / "dup" / "pos" / "s.png", ds.samples[0].image);
  write_png(dir.path() / "dup" / "neg" / "s.png", ds.samples[1].image);
  CHECK_THROWS_WITH_AS(load_dataset_dir(dir.path() / "dup", "X"), doctest::Contains("duplicate"), IoError);

  CHECK_THROWS_AS(parse_partition("val"), ValidationError);
}

TEST_CASE("dataset validation") {
  auto ds = balanced(2);
  ds.samples[1].id = ds.samples[0].id;
  CHECK_THROWS_WITH_AS(ds.validate(), doctest::Contains("duplicate"), ValidationError);
  ds = balanced(2);
  ds.samples[0].image.pixels[3] = 1.5f;
  CHECK_THROWS_AS(ds.validate(), ValidationError);
}
