#pragma once

#include <cstdint>
#include <utility>

#include "uda/dataset.hpp"

namespace uda::data {

/// Stratified split; per class, floor(train_fraction * class_count) samples go
/// to train. Both halves keep the input's sample order.
std::pair<DomainDataset, DomainDataset> split_dataset(const DomainDataset& ds,
                                                      double train_fraction,
                                                      std::uint64_t seed);

}  // namespace uda::data
