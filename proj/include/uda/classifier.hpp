#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "uda/dataset.hpp"
#include "uda/nn/layers.hpp"

namespace uda::classifier {

enum class Arch { mini_alexnet, mini_resnet };
const char* arch_name(Arch a);
Arch parse_arch(const std::string& s);

struct TrainSpec {
  int epochs = 20;
  int batch_size = 16;
  double learning_rate = 2e-3;
  int width = 8;  // channels of the first conv stage
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainSpec&) const = default;
};

void to_json(nlohmann::json& j, const TrainSpec& s);
void from_json(const nlohmann::json& j, TrainSpec& s);

/// Three conv+BN+ReLU+maxpool stages, then a two-layer dense head.
template <typename T>
struct MiniAlexNet {
  nn::Conv2d<T> c1;
  nn::BatchNorm2d<T> bn1;
  nn::Conv2d<T> c2;
  nn::BatchNorm2d<T> bn2;
  nn::Conv2d<T> c3;
  nn::BatchNorm2d<T> bn3;
  nn::Linear<T> fc1, fc2;

  MiniAlexNet(nn::ParamSet<T>& ps, int image_size, int width);
  nn::Var<T> operator()(const nn::Var<T>& x, bool training) const;
};

/// Stem conv, three stride-2 residual blocks with 1x1 projections (batch norm
/// after every conv), global average pooling and a dense head.
template <typename T>
struct MiniResNet {
  struct Block {
    nn::Conv2d<T> a, b, proj;
    nn::BatchNorm2d<T> bn_a, bn_b, bn_proj;
  };
  nn::Conv2d<T> stem;
  nn::BatchNorm2d<T> bn_stem;
  std::vector<Block> blocks;
  nn::Linear<T> head;

  MiniResNet(nn::ParamSet<T>& ps, int width);
  nn::Var<T> operator()(const nn::Var<T>& x, bool training) const;
};

/// One of the two presets plus its parameters. Output is a logit per image.
template <typename T>
class ClassifierNet {
 public:
  ClassifierNet(Arch arch, int image_size, int width);
  ClassifierNet(const ClassifierNet&) = delete;
  ClassifierNet& operator=(const ClassifierNet&) = delete;

  void initialize(std::uint64_t seed);
  /// `training` selects batch statistics (and updates running ones) in norm layers.
  nn::Var<T> logits(const nn::Var<T>& x, bool training = false) const;

  nn::ParamSet<T> params;

 private:
  Arch arch_;
  std::unique_ptr<MiniAlexNet<T>> alex_;
  std::unique_ptr<MiniResNet<T>> res_;
};

struct ClassifierModel {
  Arch arch = Arch::mini_alexnet;
  int image_size = 0;
  TrainSpec spec;
  long epochs_trained = 0;
  std::unique_ptr<ClassifierNet<float>> net;

  bool parameters_equal(const ClassifierModel& other) const;
};

struct ScoredRow {
  std::string id;
  data::Label true_label = data::Label::negative;
  double score = 0.0;
  bool operator==(const ScoredRow&) const = default;
};

struct ScoredSet {
  std::vector<ScoredRow> rows;
  std::string arch;
  std::string test_domain;
  bool operator==(const ScoredSet&) const = default;
};

/// Errors unless image_size is a positive multiple of 8.
ClassifierModel init_classifier(Arch arch, int image_size, const TrainSpec& spec);

/// Originals plus the first floor(ratio * |synthesized|) translations in
/// id-hash order, then shuffled by id hash. Labels are untouched.
data::DomainDataset mix_datasets(const data::DomainDataset& source_train,
                                 const data::DomainDataset& synthesized, double ratio = 1.0);

/// Binary cross-entropy with Adam; deterministic given spec.seed.
ClassifierModel train_classifier(const data::DomainDataset& train_set, Arch arch,
                                 const TrainSpec& spec);

/// Sigmoid scores, one row per sample in input order.
ScoredSet predict_scores(const ClassifierModel& model, const data::DomainDataset& test_set);

void save_classifier(const ClassifierModel& model, const std::filesystem::path& dir);
ClassifierModel load_classifier(const std::filesystem::path& dir);

/// `id,true_label,score` with a header row and 9-decimal scores.
void write_scores_csv(const ScoredSet& s, const std::filesystem::path& path);
ScoredSet read_scores_csv(const std::filesystem::path& path);

}  // namespace uda::classifier
