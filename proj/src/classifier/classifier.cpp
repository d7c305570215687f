#include "uda/classifier.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "uda/common.hpp"
#include "uda/image_batch.hpp"
#include "uda/nn/adam.hpp"
#include "uda/nn/checkpoint.hpp"

namespace uda::classifier {

using nlohmann::json;
using nn::Var;

const char* arch_name(Arch a) { return a == Arch::mini_alexnet ? "mini_alexnet" : "mini_resnet"; }

Arch parse_arch(const std::string& s) {
  if (s == "mini_alexnet") return Arch::mini_alexnet;
  if (s == "mini_resnet") return Arch::mini_resnet;
  throw ValidationError("unknown architecture '" + s + "' (expected mini_alexnet or mini_resnet)");
}

void TrainSpec::validate() const {
  if (epochs < 0) throw ValidationError("classifier.epochs must be >= 0");
  if (batch_size < 1) throw ValidationError("classifier.batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ValidationError("classifier.learning_rate must be positive");
  if (width < 1) throw ValidationError("classifier.width must be >= 1");
}

void to_json(json& j, const TrainSpec& s) {
  j = {{"epochs", s.epochs}, {"batch_size", s.batch_size}, {"learning_rate", s.learning_rate},
       {"width", s.width}, {"seed", s.seed}};
}

void from_json(const json& j, TrainSpec& s) {
  s = TrainSpec{};
  s.epochs = j.value("epochs", s.epochs);
  s.batch_size = j.value("batch_size", s.batch_size);
  s.learning_rate = j.value("learning_rate", s.learning_rate);
  s.width = j.value("width", s.width);
  s.seed = j.value("seed", s.seed);
}

bool ClassifierModel::parameters_equal(const ClassifierModel& other) const {
  return arch == other.arch && net && other.net && net->params.values_equal(other.net->params);
}

ClassifierModel init_classifier(Arch arch, int image_size, const TrainSpec& spec) {
  spec.validate();
  if (image_size < 8 || image_size % 8 != 0) {
    throw ValidationError("classifier image_size " + std::to_string(image_size) +
                          " must be a positive multiple of 8");
  }
  ClassifierModel m;
  m.arch = arch;
  m.image_size = image_size;
  m.spec = spec;
  m.net = std::make_unique<ClassifierNet<float>>(arch, image_size, spec.width);
  m.net->initialize(spec.seed);
  return m;
}

data::DomainDataset mix_datasets(const data::DomainDataset& source_train,
                                 const data::DomainDataset& synthesized, double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ValidationError("mix ratio must lie in [0,1]");
  if (!synthesized.empty() && synthesized.image_size != source_train.image_size) {
    throw ValidationError("mix_datasets: image_size mismatch (" + std::to_string(source_train.image_size) +
                          " vs " + std::to_string(synthesized.image_size) + ")");
  }
  for (const auto& s : synthesized.samples) {
    if (s.provenance.is_real()) {
      throw ValidationError("mix_datasets: sample '" + s.id + "' in the synthesized set is not synthesized");
    }
  }
  auto by_hash = [](const data::ImageSample* a, const data::ImageSample* b) {
    const auto ha = fnv1a(a->id), hb = fnv1a(b->id);
    return ha != hb ? ha < hb : a->id < b->id;
  };
  std::vector<const data::ImageSample*> synth;
  for (const auto& s : synthesized.samples) synth.push_back(&s);
  std::sort(synth.begin(), synth.end(), by_hash);
  synth.resize(static_cast<std::size_t>(std::floor(ratio * static_cast<double>(synth.size()) + 1e-9)));

  std::vector<const data::ImageSample*> all;
  for (const auto& s : source_train.samples) all.push_back(&s);
  all.insert(all.end(), synth.begin(), synth.end());
  std::sort(all.begin(), all.end(), by_hash);

  data::DomainDataset out;
  out.domain = synthesized.empty() ? source_train.domain
                                   : "mix(" + source_train.domain + "," + synthesized.domain + ")";
  out.image_size = source_train.image_size;
  out.samples.reserve(all.size());
  for (const auto* s : all) out.samples.push_back(*s);
  out.validate();
  return out;
}

ClassifierModel train_classifier(const data::DomainDataset& train_set, Arch arch, const TrainSpec& spec) {
  spec.validate();
  if (train_set.empty()) throw ValidationError("train_classifier: training set is empty");
  if (train_set.count(data::Label::positive) == 0 || train_set.count(data::Label::negative) == 0) {
    throw ValidationError("train_classifier: training set '" + train_set.domain +
                          "' must contain both classes");
  }
  ClassifierModel model = init_classifier(arch, train_set.image_size, spec);
  auto& net = *model.net;
  nn::Adam<float> opt(net.params, {spec.learning_rate, 0.9, 0.999, 1e-8});
  std::mt19937_64 rng(derive_seed(spec.seed, {"classifier-batches"}));
  std::vector<std::size_t> order(train_set.size());

  for (int epoch = 0; epoch < spec.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t begin = 0; begin < order.size(); begin += spec.batch_size) {
      const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(spec.batch_size));
      std::vector<const data::Image*> imgs;
      std::vector<float> targets;
      for (std::size_t k = begin; k < end; ++k) {
        const auto& s = train_set.samples[order[k]];
        imgs.push_back(&s.image);
        targets.push_back(static_cast<float>(data::label_value(s.label)));
      }
      net.params.zero_grad();
      auto loss = nn::bce_with_logits<float>(
          net.logits(nn::constant<float>(stack_images<float>(imgs)), true), targets);
      if (!std::isfinite(nn::scalar(loss))) {
        throw TrainingError("non-finite classifier loss in epoch " + std::to_string(epoch), epoch, "bce");
      }
      nn::backward(loss);
      opt.step();
    }
    if (!net.params.all_finite()) {
      throw TrainingError("non-finite classifier parameters after epoch " + std::to_string(epoch), epoch,
                          "parameters");
    }
    ++model.epochs_trained;
  }
  return model;
}

ScoredSet predict_scores(const ClassifierModel& model, const data::DomainDataset& test_set) {
  if (test_set.image_size != model.image_size) {
    throw ValidationError("predict_scores: dataset image_size " + std::to_string(test_set.image_size) +
                          " does not match model image_size " + std::to_string(model.image_size));
  }
  ScoredSet out;
  out.arch = arch_name(model.arch);
  out.test_domain = test_set.domain;
  out.rows.reserve(test_set.size());
  nn::NoGradGuard no_grad;
  // One image at a time: a row's score never depends on its neighbours.
  for (const auto& s : test_set.samples) {
    auto z = model.net->logits(nn::constant<float>(stack_images<float>({&s.image})));
    const double logit = nn::scalar(z);
    const double score = logit >= 0 ? 1.0 / (1.0 + std::exp(-logit)) : std::exp(logit) / (1.0 + std::exp(logit));
    if (!std::isfinite(score)) throw TrainingError("non-finite score for '" + s.id + "'", -1, "predict");
    out.rows.push_back({s.id, s.label, score});
  }
  return out;
}

void save_classifier(const ClassifierModel& model, const std::filesystem::path& dir) {
  json cfg = model.spec;
  cfg["arch"] = arch_name(model.arch);
  cfg["image_size"] = model.image_size;
  nn::save_checkpoint(dir, {"classifier", cfg, model.epochs_trained}, model.net->params);
}

ClassifierModel load_classifier(const std::filesystem::path& dir) {
  const auto header = nn::read_checkpoint_header(dir);
  if (header.kind != "classifier") throw IoError("checkpoint " + dir.string() + " is not a classifier");
  ClassifierModel m = init_classifier(parse_arch(header.config.at("arch").get<std::string>()),
                                      header.config.at("image_size").get<int>(),
                                      header.config.get<TrainSpec>());
  m.epochs_trained = nn::load_checkpoint(dir, m.net->params).step_count;
  return m;
}

void write_scores_csv(const ScoredSet& s, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "id,true_label,score\n";
  for (const auto& r : s.rows) out << r.id << ',' << data::label_value(r.true_label) << ',' << fixed9(r.score) << '\n';
}

ScoredSet read_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "id,true_label,score") {
    throw IoError("scores file " + path.string() + " lacks the 'id,true_label,score' header");
  }
  ScoredSet s;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, label, score;
    if (!std::getline(ss, id, ',') || !std::getline(ss, label, ',') || !std::getline(ss, score)) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected 3 fields");
    }
    if (label != "0" && label != "1") throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad label");
    double v = 0.0;
    try {
      v = std::stod(score);
    } catch (const std::exception&) {
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad score '" + score + "'");
    }
    s.rows.push_back({id, label == "1" ? data::Label::positive : data::Label::negative, v});
  }
  return s;
}

}  // namespace uda::classifier
