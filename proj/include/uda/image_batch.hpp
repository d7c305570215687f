#pragma once

#include <vector>

#include "uda/common.hpp"
#include "uda/dataset.hpp"
#include "uda/nn/tensor.hpp"

namespace uda {

/// Stacks square images into an (N,1,H,W) tensor.
template <typename T>
nn::Tensor<T> stack_images(const std::vector<const data::Image*>& images) {
  if (images.empty()) throw ValidationError("stack_images: no images");
  const int n = images.front()->size;
  nn::Tensor<T> t(nn::Shape{static_cast<int>(images.size()), 1, n, n});
  std::size_t off = 0;
  for (const auto* img : images) {
    if (img->size != n) throw ValidationError("stack_images: mixed image sizes");
    for (float p : img->pixels) t.data[off++] = static_cast<T>(p);
  }
  return t;
}

}  // namespace uda
