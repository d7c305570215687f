#include <random>

#include "uda/classifier.hpp"
#include "uda/common.hpp"

namespace uda::classifier {

using nn::Var;

template <typename T>
MiniAlexNet<T>::MiniAlexNet(nn::ParamSet<T>& ps, int image_size, int c)
    : c1(ps, "alex.c1", 1, c, 3, 1, 1, false),
      bn1(ps, "alex.bn1", c),
      c2(ps, "alex.c2", c, 2 * c, 3, 1, 1, false),
      bn2(ps, "alex.bn2", 2 * c),
      c3(ps, "alex.c3", 2 * c, 4 * c, 3, 1, 1, false),
      bn3(ps, "alex.bn3", 4 * c),
      fc1(ps, "alex.fc1", 4 * c * (image_size / 8) * (image_size / 8), 8 * c),
      fc2(ps, "alex.fc2", 8 * c, 1) {}

template <typename T>
Var<T> MiniAlexNet<T>::operator()(const Var<T>& x, bool training) const {
  Var<T> h = nn::max_pool2<T>(nn::relu<T>(bn1(c1(x), training)));
  h = nn::max_pool2<T>(nn::relu<T>(bn2(c2(h), training)));
  h = nn::max_pool2<T>(nn::relu<T>(bn3(c3(h), training)));
  return fc2(nn::relu<T>(fc1(h)));
}

template <typename T>
MiniResNet<T>::MiniResNet(nn::ParamSet<T>& ps, int c)
    : stem(ps, "res.stem", 1, c, 3, 1, 1, false), bn_stem(ps, "res.stem_bn", c) {
  const int widths[4] = {c, c, 2 * c, 4 * c};
  for (int i = 0; i < 3; ++i) {
    const std::string p = "res.block" + std::to_string(i);
    const int in = widths[i], out = widths[i + 1];
    blocks.push_back({nn::Conv2d<T>(ps, p + ".a", in, out, 3, 2, 1, false),
                      nn::Conv2d<T>(ps, p + ".b", out, out, 3, 1, 1, false),
                      nn::Conv2d<T>(ps, p + ".proj", in, out, 1, 2, 0, false),
                      nn::BatchNorm2d<T>(ps, p + ".a_bn", out), nn::BatchNorm2d<T>(ps, p + ".b_bn", out),
                      nn::BatchNorm2d<T>(ps, p + ".proj_bn", out)});
  }
  head = nn::Linear<T>(ps, "res.head", 4 * c, 1);
}

template <typename T>
Var<T> MiniResNet<T>::operator()(const Var<T>& x, bool training) const {
  Var<T> h = nn::relu<T>(bn_stem(stem(x), training));
  for (const auto& b : blocks) {
    Var<T> branch = b.bn_b(b.b(nn::relu<T>(b.bn_a(b.a(h), training))), training);
    h = nn::relu<T>(nn::add<T>(branch, b.bn_proj(b.proj(h), training)));
  }
  return head(nn::global_avg_pool<T>(h));
}

template <typename T>
ClassifierNet<T>::ClassifierNet(Arch arch, int image_size, int width) : arch_(arch) {
  if (arch == Arch::mini_alexnet) {
    alex_ = std::make_unique<MiniAlexNet<T>>(params, image_size, width);
  } else {
    res_ = std::make_unique<MiniResNet<T>>(params, width);
  }
}

template <typename T>
void ClassifierNet<T>::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, {"classifier-init", arch_name(arch_)}));
  for (const auto& [name, v] : params.items()) {
    if (name.ends_with(".bias") || name.ends_with(".beta") || name.ends_with(".running_mean")) {
      nn::init_constant(v, 0.0);
      continue;
    }
    if (name.ends_with(".gamma") || name.ends_with(".running_var")) {
      nn::init_constant(v, 1.0);
      continue;
    }
    const int fan_in = static_cast<int>(v->value.shape.sample_numel());
    nn::init_he_uniform(v, rng, fan_in);
  }
}

template <typename T>
Var<T> ClassifierNet<T>::logits(const Var<T>& x, bool training) const {
  return alex_ ? (*alex_)(x, training) : (*res_)(x, training);
}

template struct MiniAlexNet<float>;
template struct MiniAlexNet<double>;
template struct MiniResNet<float>;
template struct MiniResNet<double>;
template class ClassifierNet<float>;
template class ClassifierNet<double>;

}  // namespace uda::classifier
