#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uda/dataset.hpp"
#include "uda/nn/layers.hpp"

namespace uda::translator {

struct TranslatorConfig {
  int base_channels = 8;
  int n_residual_blocks = 2;
  double lambda_cyc = 10.0;
  double lambda_id = 0.0;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  int steps = 2000;
  int batch_size = 1;
  int image_pool_size = 50;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TranslatorConfig&) const = default;
};

void to_json(nlohmann::json& j, const TranslatorConfig& c);
void from_json(const nlohmann::json& j, TranslatorConfig& c);

/// Image -> image of the same shape, outputs in (0,1).
/// stem conv, two stride-2 convs, residual blocks, two stride-2 transposed
/// convs, 3x3 head and a sigmoid. Instance norm + ReLU between layers.
template <typename T>
struct Generator {
  struct Residual {
    nn::Conv2d<T> a, b;
  };
  nn::Conv2d<T> stem, down1, down2;
  std::vector<Residual> blocks;
  nn::ConvTranspose2d<T> up1, up2;
  nn::Conv2d<T> head;

  Generator() = default;
  Generator(nn::ParamSet<T>& ps, const std::string& prefix, int base_channels, int n_blocks);

  nn::Var<T> operator()(const nn::Var<T>& x) const;
};

/// Image -> (H/4 x W/4) grid of realness scores.
template <typename T>
struct Discriminator {
  nn::Conv2d<T> c1, c2, c3;

  Discriminator() = default;
  Discriminator(nn::ParamSet<T>& ps, const std::string& prefix, int base_channels);

  nn::Var<T> operator()(const nn::Var<T>& x) const;
};

/// The four Cycle-GAN networks. Generator and discriminator parameters live
/// in separate sets so each side gets its own optimizer.
template <typename T>
struct CycleGan {
  nn::ParamSet<T> gen_params, disc_params;
  Generator<T> gen_ab, gen_ba;
  Discriminator<T> disc_a, disc_b;

  CycleGan(int base_channels, int n_blocks);
  CycleGan(const CycleGan&) = delete;
  CycleGan& operator=(const CycleGan&) = delete;

  /// Deterministic N(0, 0.02) weights, zero biases.
  void initialize(std::uint64_t seed);
  /// All parameters in checkpoint order (gen_ab, gen_ba, disc_a, disc_b).
  nn::ParamSet<T> all_params() const;
};

enum class Direction { a_to_b, b_to_a };
const char* direction_name(Direction d);
Direction parse_direction(const std::string& s);

struct TranslatorModel {
  TranslatorConfig config;
  int image_size = 0;
  long step_count = 0;
  std::string domain_a = "A";
  std::string domain_b = "B";
  std::unique_ptr<CycleGan<float>> nets;

  bool parameters_equal(const TranslatorModel& other) const;
};

/// Errors with ValidationError unless image_size is a multiple of 4 (>= 8).
TranslatorModel init_translator(const TranslatorConfig& cfg, int image_size);

// ---- objectives -----------------------------------------------------------

template <typename T>
using ImageFn = std::function<nn::Var<T>(const nn::Var<T>&)>;

/// Mean over the grid of (s - t)^2, t = 1 for real, 0 for fake.
template <typename T>
nn::Var<T> lsgan_loss(const nn::Var<T>& scores, bool target_is_real);

template <typename T>
struct GeneratorTerms {
  nn::Var<T> total;
  nn::Var<T> adv_ab, adv_ba;  // adversarial terms for gen_ab and gen_ba
  nn::Var<T> cycle;           // unweighted sum of both reconstruction L1s
  nn::Var<T> identity;        // unweighted; null when lambda_id == 0
  nn::Var<T> fake_a, fake_b;
};

/// adv(disc_b(G_ab a)) + adv(disc_a(G_ba b)) + lambda_cyc * cycle + lambda_id * identity.
/// Throws TrainingError naming the first non-finite component.
template <typename T>
GeneratorTerms<T> generator_objective(const ImageFn<T>& gen_ab, const ImageFn<T>& gen_ba,
                                      const ImageFn<T>& disc_a, const ImageFn<T>& disc_b,
                                      const nn::Var<T>& real_a, const nn::Var<T>& real_b,
                                      double lambda_cyc, double lambda_id, long step = -1);

template <typename T>
GeneratorTerms<T> generator_objective(const CycleGan<T>& nets, const nn::Var<T>& real_a,
                                      const nn::Var<T>& real_b, double lambda_cyc,
                                      double lambda_id, long step = -1);

/// 0.5 * [lsgan(disc(real), real) + lsgan(disc(fake), fake)]. `fake` must be detached.
template <typename T>
nn::Var<T> discriminator_objective(const ImageFn<T>& disc, const nn::Var<T>& real,
                                   const nn::Var<T>& fake, const char* component = "disc",
                                   long step = -1);

// ---- training -------------------------------------------------------------

struct TrainRecord {
  long step = 0;
  double gen_total = 0, disc_a_loss = 0, disc_b_loss = 0, cyc_loss = 0, id_loss = 0;
  bool operator==(const TrainRecord&) const = default;
};

using TrainLog = std::vector<TrainRecord>;

/// History buffer of generated images; returns a mix of fresh and past fakes.
class ImagePool {
 public:
  ImagePool(int capacity, std::uint64_t seed);
  nn::Tensor<float> query(const nn::Tensor<float>& batch);

 private:
  int capacity_;
  std::vector<std::vector<float>> images_;
  std::mt19937_64 rng_;
};

/// Unsupervised: labels are never read.
std::pair<TranslatorModel, TrainLog> train_translator(const data::DomainDataset& train_a,
                                                      const data::DomainDataset& train_b,
                                                      const TranslatorConfig& cfg);

/// Inference through gen_ab or gen_ba. Ids gain "~syn", labels are kept,
/// provenance becomes synthesized_from:<ds.domain>.
data::DomainDataset translate_dataset(const TranslatorModel& model, const data::DomainDataset& ds,
                                      Direction direction);

void save_translator(const TranslatorModel& model, const std::filesystem::path& dir);
TranslatorModel load_translator(const std::filesystem::path& dir);

void write_train_log_csv(const TrainLog& log, const std::filesystem::path& path);

}  // namespace uda::translator
