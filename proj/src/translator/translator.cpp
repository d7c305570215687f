#include "uda/translator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "uda/common.hpp"
#include "uda/image_batch.hpp"
#include "uda/nn/adam.hpp"
#include "uda/nn/checkpoint.hpp"

namespace uda::translator {

using nn::Tensor;
using nn::Var;
using nlohmann::json;

void TranslatorConfig::validate() const {
  if (base_channels < 1) throw ValidationError("translator.base_channels must be >= 1");
  if (n_residual_blocks < 0) throw ValidationError("translator.n_residual_blocks must be >= 0");
  if (!(lambda_cyc >= 0.0) || !std::isfinite(lambda_cyc)) throw ValidationError("translator.lambda_cyc must be nonnegative");
  if (!(lambda_id >= 0.0) || !std::isfinite(lambda_id)) throw ValidationError("translator.lambda_id must be nonnegative");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("translator.learning_rate must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ValidationError("translator.beta1 must lie in [0,1)");
  if (steps < 0) throw ValidationError("translator.steps must be >= 0");
  if (batch_size < 1) throw ValidationError("translator.batch_size must be >= 1");
  if (image_pool_size < 0) throw ValidationError("translator.image_pool_size must be >= 0");
}

void to_json(json& j, const TranslatorConfig& c) {
  j = {{"base_channels", c.base_channels}, {"n_residual_blocks", c.n_residual_blocks},
       {"lambda_cyc", c.lambda_cyc},       {"lambda_id", c.lambda_id},
       {"learning_rate", c.learning_rate}, {"beta1", c.beta1},
       {"steps", c.steps},                 {"batch_size", c.batch_size},
       {"image_pool_size", c.image_pool_size}, {"seed", c.seed}};
}

void from_json(const json& j, TranslatorConfig& c) {
  c = TranslatorConfig{};
  c.base_channels = j.value("base_channels", c.base_channels);
  c.n_residual_blocks = j.value("n_residual_blocks", c.n_residual_blocks);
  c.lambda_cyc = j.value("lambda_cyc", c.lambda_cyc);
  c.lambda_id = j.value("lambda_id", c.lambda_id);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.beta1 = j.value("beta1", c.beta1);
  c.steps = j.value("steps", c.steps);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.image_pool_size = j.value("image_pool_size", c.image_pool_size);
  c.seed = j.value("seed", c.seed);
}

const char* direction_name(Direction d) { return d == Direction::a_to_b ? "a_to_b" : "b_to_a"; }

Direction parse_direction(const std::string& s) {
  if (s == "a_to_b") return Direction::a_to_b;
  if (s == "b_to_a") return Direction::b_to_a;
  throw ValidationError("direction must be 'a_to_b' or 'b_to_a', got '" + s + "'");
}

bool TranslatorModel::parameters_equal(const TranslatorModel& other) const {
  return nets && other.nets && nets->gen_params.values_equal(other.nets->gen_params) &&
         nets->disc_params.values_equal(other.nets->disc_params);
}

TranslatorModel init_translator(const TranslatorConfig& cfg, int image_size) {
  cfg.validate();
  if (image_size < 8 || image_size % 4 != 0) {
    throw ValidationError("configuration error: translator image_size " + std::to_string(image_size) +
                          " must be a multiple of 4 and at least 8");
  }
  TranslatorModel m;
  m.config = cfg;
  m.image_size = image_size;
  m.nets = std::make_unique<CycleGan<float>>(cfg.base_channels, cfg.n_residual_blocks);
  m.nets->initialize(cfg.seed);
  return m;
}

// ---- objectives -------------------------------------------------------------

template <typename T>
Var<T> lsgan_loss(const Var<T>& scores, bool target_is_real) {
  return nn::mean_squared_to<T>(scores, target_is_real ? T(1) : T(0));
}

namespace {

template <typename T>
void require_finite(const Var<T>& v, const char* component, long step) {
  if (v && !std::isfinite(static_cast<double>(nn::scalar(v)))) {
    throw TrainingError(std::string("non-finite ") + component +
                            (step >= 0 ? " at step " + std::to_string(step) : std::string{}),
                        step, component);
  }
}

}  // namespace

template <typename T>
GeneratorTerms<T> generator_objective(const ImageFn<T>& gen_ab, const ImageFn<T>& gen_ba,
                                      const ImageFn<T>& disc_a, const ImageFn<T>& disc_b,
                                      const Var<T>& real_a, const Var<T>& real_b,
                                      double lambda_cyc, double lambda_id, long step) {
  if (!(real_a->value.shape == real_b->value.shape)) {
    throw ValidationError("generator_objective: batches from A and B must have equal shapes");
  }
  GeneratorTerms<T> t;
  t.fake_b = gen_ab(real_a);
  t.fake_a = gen_ba(real_b);
  t.adv_ab = lsgan_loss<T>(disc_b(t.fake_b), true);
  require_finite(t.adv_ab, "adv_ab", step);
  t.adv_ba = lsgan_loss<T>(disc_a(t.fake_a), true);
  require_finite(t.adv_ba, "adv_ba", step);
  t.cycle = nn::add<T>(nn::l1_mean<T>(gen_ba(t.fake_b), real_a), nn::l1_mean<T>(gen_ab(t.fake_a), real_b));
  require_finite(t.cycle, "cycle", step);
  t.total = nn::add<T>(nn::add<T>(t.adv_ab, t.adv_ba), nn::scale<T>(t.cycle, static_cast<T>(lambda_cyc)));
  if (lambda_id > 0.0) {
    t.identity = nn::add<T>(nn::l1_mean<T>(gen_ab(real_b), real_b), nn::l1_mean<T>(gen_ba(real_a), real_a));
    require_finite(t.identity, "identity", step);
    t.total = nn::add<T>(t.total, nn::scale<T>(t.identity, static_cast<T>(lambda_id)));
  }
  require_finite(t.total, "gen_total", step);
  return t;
}

template <typename T>
GeneratorTerms<T> generator_objective(const CycleGan<T>& nets, const Var<T>& real_a,
                                      const Var<T>& real_b, double lambda_cyc, double lambda_id,
                                      long step) {
  return generator_objective<T>(
      [&](const Var<T>& x) { return nets.gen_ab(x); }, [&](const Var<T>& x) { return nets.gen_ba(x); },
      [&](const Var<T>& x) { return nets.disc_a(x); }, [&](const Var<T>& x) { return nets.disc_b(x); },
      real_a, real_b, lambda_cyc, lambda_id, step);
}

template <typename T>
Var<T> discriminator_objective(const ImageFn<T>& disc, const Var<T>& real, const Var<T>& fake,
                               const char* component, long step) {
  Var<T> loss = nn::scale<T>(
      nn::add<T>(lsgan_loss<T>(disc(real), true), lsgan_loss<T>(disc(fake), false)), T(0.5));
  require_finite(loss, component, step);
  return loss;
}

// ---- image pool -------------------------------------------------------------

ImagePool::ImagePool(int capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {}

Tensor<float> ImagePool::query(const Tensor<float>& batch) {
  if (capacity_ == 0) return batch;
  Tensor<float> out(batch.shape);
  const std::size_t per = batch.shape.sample_numel();
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  for (int i = 0; i < batch.shape.n; ++i) {
    std::vector<float> img(batch.sample(i), batch.sample(i) + per);
    if (static_cast<int>(images_.size()) < capacity_) {
      images_.push_back(img);
    } else if (coin(rng_) > 0.5) {
      const auto k = std::uniform_int_distribution<std::size_t>(0, images_.size() - 1)(rng_);
      std::swap(img, images_[k]);
    }
    std::copy(img.begin(), img.end(), out.sample(i));
  }
  return out;
}

// ---- training -----------------------------------------------------------------

namespace {

/// Endless stream of minibatches drawn from independent per-epoch shuffles.
class BatchStream {
 public:
  BatchStream(const data::DomainDataset& ds, int batch_size, std::uint64_t seed)
      : ds_(ds), batch_size_(batch_size), rng_(seed), order_(ds.size()) {
    reshuffle();
  }

  Tensor<float> next() {
    std::vector<const data::Image*> imgs;
    for (int i = 0; i < batch_size_; ++i) {
      if (pos_ == order_.size()) reshuffle();
      imgs.push_back(&ds_.samples[order_[pos_++]].image);
    }
    return stack_images<float>(imgs);
  }

 private:
  void reshuffle() {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::shuffle(order_.begin(), order_.end(), rng_);
    pos_ = 0;
  }

  const data::DomainDataset& ds_;
  int batch_size_;
  std::mt19937_64 rng_;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

}  // namespace

std::pair<TranslatorModel, TrainLog> train_translator(const data::DomainDataset& train_a,
                                                      const data::DomainDataset& train_b,
                                                      const TranslatorConfig& cfg) {
  cfg.validate();
  if (train_a.empty() || train_b.empty()) {
    throw ValidationError("train_translator: both domain datasets must be nonempty");
  }
  if (train_a.image_size != train_b.image_size) {
    throw ValidationError("train_translator: domains have different image sizes");
  }
  TranslatorModel model = init_translator(cfg, train_a.image_size);
  model.domain_a = train_a.domain;
  model.domain_b = train_b.domain;
  CycleGan<float>& nets = *model.nets;

  BatchStream stream_a(train_a, cfg.batch_size, derive_seed(cfg.seed, {"batches", "A"}));
  BatchStream stream_b(train_b, cfg.batch_size, derive_seed(cfg.seed, {"batches", "B"}));
  ImagePool pool_a(cfg.image_pool_size, derive_seed(cfg.seed, {"pool", "A"}));
  ImagePool pool_b(cfg.image_pool_size, derive_seed(cfg.seed, {"pool", "B"}));
  nn::Adam<float> gen_opt(nets.gen_params, {cfg.learning_rate, cfg.beta1});
  nn::Adam<float> disc_opt(nets.disc_params, {cfg.learning_rate, cfg.beta1});
  auto disc_a = [&](const Var<float>& x) { return nets.disc_a(x); };
  auto disc_b = [&](const Var<float>& x) { return nets.disc_b(x); };

  TrainLog log;
  log.reserve(static_cast<std::size_t>(cfg.steps));
  for (long step = 1; step <= cfg.steps; ++step) {
    auto real_a = nn::constant<float>(stream_a.next());
    auto real_b = nn::constant<float>(stream_b.next());

    // Generators first.
    nets.gen_params.zero_grad();
    auto terms = generator_objective<float>(nets, real_a, real_b, cfg.lambda_cyc, cfg.lambda_id, step);
    nn::backward(terms.total);
    gen_opt.step();

    // Then both discriminators, on pooled detached fakes.
    auto fake_a = nn::constant<float>(pool_a.query(terms.fake_a->value));
    auto fake_b = nn::constant<float>(pool_b.query(terms.fake_b->value));
    nets.disc_params.zero_grad();
    auto loss_a = discriminator_objective<float>(disc_a, real_a, fake_a, "disc_a", step);
    auto loss_b = discriminator_objective<float>(disc_b, real_b, fake_b, "disc_b", step);
    nn::backward(nn::add<float>(loss_a, loss_b));
    disc_opt.step();

    if (!nets.gen_params.all_finite() || !nets.disc_params.all_finite()) {
      throw TrainingError("non-finite parameters after step " + std::to_string(step), step, "parameters");
    }
    log.push_back({step, nn::scalar(terms.total), nn::scalar(loss_a), nn::scalar(loss_b),
                   nn::scalar(terms.cycle), terms.identity ? nn::scalar(terms.identity) : 0.0});
  }
  model.step_count = cfg.steps;
  return {std::move(model), std::move(log)};
}

data::DomainDataset translate_dataset(const TranslatorModel& model, const data::DomainDataset& ds,
                                      Direction direction) {
  if (ds.image_size != model.image_size) {
    throw ValidationError("translate_dataset: dataset image_size " + std::to_string(ds.image_size) +
                          " does not match model image_size " + std::to_string(model.image_size));
  }
  const auto& gen = direction == Direction::a_to_b ? model.nets->gen_ab : model.nets->gen_ba;
  const std::string& target = direction == Direction::a_to_b ? model.domain_b : model.domain_a;
  data::DomainDataset out;
  out.domain = ds.domain + "_to_" + target;
  out.image_size = ds.image_size;
  out.samples.reserve(ds.size());

  nn::NoGradGuard no_grad;
  constexpr std::size_t kChunk = 32;
  for (std::size_t begin = 0; begin < ds.size(); begin += kChunk) {
    const std::size_t end = std::min(ds.size(), begin + kChunk);
    std::vector<const data::Image*> imgs;
    for (std::size_t i = begin; i < end; ++i) imgs.push_back(&ds.samples[i].image);
    auto y = gen(nn::constant<float>(stack_images<float>(imgs)));
    for (std::size_t i = begin; i < end; ++i) {
      const auto& src = ds.samples[i];
      data::ImageSample s;
      s.id = src.id + data::kSynthSuffix;
      s.label = src.label;
      s.provenance.synthesized_from = ds.domain;
      s.image = data::Image(ds.image_size);
      const float* p = y->value.sample(static_cast<int>(i - begin));
      for (std::size_t k = 0; k < s.image.pixels.size(); ++k) {
        s.image.pixels[k] = std::isfinite(p[k]) ? std::clamp(p[k], 0.0f, 1.0f) : 0.0f;
      }
      out.samples.push_back(std::move(s));
    }
  }
  return out;
}

void save_translator(const TranslatorModel& model, const std::filesystem::path& dir) {
  json cfg = model.config;
  cfg["image_size"] = model.image_size;
  cfg["domain_a"] = model.domain_a;
  cfg["domain_b"] = model.domain_b;
  nn::save_checkpoint(dir, {"translator", cfg, model.step_count}, model.nets->all_params());
}

TranslatorModel load_translator(const std::filesystem::path& dir) {
  const auto header = nn::read_checkpoint_header(dir);
  if (header.kind != "translator") throw IoError("checkpoint " + dir.string() + " is not a translator");
  TranslatorModel m = init_translator(header.config.get<TranslatorConfig>(),
                                      header.config.at("image_size").get<int>());
  m.domain_a = header.config.value("domain_a", m.domain_a);
  m.domain_b = header.config.value("domain_b", m.domain_b);
  auto all = m.nets->all_params();
  m.step_count = nn::load_checkpoint(dir, all).step_count;
  return m;
}

void write_train_log_csv(const TrainLog& log, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "step,gen_total,disc_a_loss,disc_b_loss,cyc_loss,id_loss\n";
  for (const auto& r : log) {
    out << r.step << ',' << fixed9(r.gen_total) << ',' << fixed9(r.disc_a_loss) << ','
        << fixed9(r.disc_b_loss) << ',' << fixed9(r.cyc_loss) << ',' << fixed9(r.id_loss) << '\n';
  }
}

#define UDA_INSTANTIATE_TRANSLATOR(T)                                                          \
  template Var<T> lsgan_loss(const Var<T>&, bool);                                             \
  template GeneratorTerms<T> generator_objective(const ImageFn<T>&, const ImageFn<T>&,         \
                                                 const ImageFn<T>&, const ImageFn<T>&,         \
                                                 const Var<T>&, const Var<T>&, double, double, \
                                                 long);                                        \
  template GeneratorTerms<T> generator_objective(const CycleGan<T>&, const Var<T>&,            \
                                                 const Var<T>&, double, double, long);         \
  template Var<T> discriminator_objective(const ImageFn<T>&, const Var<T>&, const Var<T>&,     \
                                          const char*, long);

UDA_INSTANTIATE_TRANSLATOR(float)
UDA_INSTANTIATE_TRANSLATOR(double)

}  // namespace uda::translator
