#include "uda/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "uda/common.hpp"

namespace uda::data {

std::pair<DomainDataset, DomainDataset> split_dataset(const DomainDataset& ds,
                                                      double train_fraction,
                                                      std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("train_fraction must lie strictly between 0 and 1");
  }
  std::vector<bool> in_train(ds.size(), false);
  for (Label label : {Label::negative, Label::positive}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (ds.samples[i].label == label) members.push_back(i);
    }
    if (members.size() < 2) {
      throw ValidationError("cannot stratify dataset '" + ds.domain + "': class " +
                            label_dir(label) + " has fewer than 2 samples");
    }
    std::mt19937_64 rng(derive_seed(seed, {"split", ds.domain, label_value(label)}));
    std::shuffle(members.begin(), members.end(), rng);
    const auto n_train = static_cast<std::size_t>(
        std::floor(train_fraction * static_cast<double>(members.size()) + 1e-9));
    for (std::size_t k = 0; k < n_train; ++k) in_train[members[k]] = true;
  }

  DomainDataset train, test;
  train.domain = test.domain = ds.domain;
  train.image_size = test.image_size = ds.image_size;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    (in_train[i] ? train : test).samples.push_back(ds.samples[i]);
  }
  return {std::move(train), std::move(test)};
}

}  // namespace uda::data
