#include <random>

#include "uda/common.hpp"
#include "uda/translator.hpp"

namespace uda::translator {

using nn::Var;

template <typename T>
Generator<T>::Generator(nn::ParamSet<T>& ps, const std::string& prefix, int c, int n_blocks)
    : stem(ps, prefix + ".stem", 1, c, 3, 1, 1, false),
      down1(ps, prefix + ".down1", c, 2 * c, 3, 2, 1, false),
      down2(ps, prefix + ".down2", 2 * c, 4 * c, 3, 2, 1, false) {
  for (int i = 0; i < n_blocks; ++i) {
    const std::string p = prefix + ".res" + std::to_string(i);
    blocks.push_back({nn::Conv2d<T>(ps, p + ".a", 4 * c, 4 * c, 3, 1, 1, false),
                      nn::Conv2d<T>(ps, p + ".b", 4 * c, 4 * c, 3, 1, 1, false)});
  }
  up1 = nn::ConvTranspose2d<T>(ps, prefix + ".up1", 4 * c, 2 * c, 4, 2, 1, false);
  up2 = nn::ConvTranspose2d<T>(ps, prefix + ".up2", 2 * c, c, 4, 2, 1, false);
  head = nn::Conv2d<T>(ps, prefix + ".head", c, 1, 3, 1, 1, true);
}

template <typename T>
Var<T> Generator<T>::operator()(const Var<T>& x) const {
  auto block = [](const Var<T>& h) { return nn::relu<T>(nn::instance_norm<T>(h)); };
  Var<T> h = block(stem(x));
  h = block(down1(h));
  h = block(down2(h));
  for (const auto& r : blocks) {
    h = nn::add<T>(h, nn::instance_norm<T>(r.b(block(r.a(h)))));
  }
  h = block(up1(h));
  h = block(up2(h));
  return nn::sigmoid<T>(head(h));
}

template <typename T>
Discriminator<T>::Discriminator(nn::ParamSet<T>& ps, const std::string& prefix, int c)
    : c1(ps, prefix + ".c1", 1, c, 4, 2, 1, true),
      c2(ps, prefix + ".c2", c, 2 * c, 4, 2, 1, false),
      c3(ps, prefix + ".c3", 2 * c, 1, 3, 1, 1, true) {}

template <typename T>
Var<T> Discriminator<T>::operator()(const Var<T>& x) const {
  const T slope = T(0.2);
  Var<T> h = nn::leaky_relu<T>(c1(x), slope);
  h = nn::leaky_relu<T>(nn::instance_norm<T>(c2(h)), slope);
  return c3(h);
}

template <typename T>
CycleGan<T>::CycleGan(int c, int n_blocks)
    : gen_ab(gen_params, "gen_ab", c, n_blocks),
      gen_ba(gen_params, "gen_ba", c, n_blocks),
      disc_a(disc_params, "disc_a", c),
      disc_b(disc_params, "disc_b", c) {}

template <typename T>
void CycleGan<T>::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(derive_seed(seed, {"translator-init"}));
  for (const auto* ps : {&gen_params, &disc_params}) {
    for (const auto& [name, v] : ps->items()) {
      if (name.ends_with(".bias")) {
        nn::init_constant(v, 0.0);
      } else {
        nn::init_normal(v, rng, 0.02);
      }
    }
  }
}

template <typename T>
nn::ParamSet<T> CycleGan<T>::all_params() const {
  nn::ParamSet<T> all;
  for (const auto* ps : {&gen_params, &disc_params}) {
    for (const auto& [name, v] : ps->items()) all.adopt(name, v);
  }
  return all;
}

template struct Generator<float>;
template struct Generator<double>;
template struct Discriminator<float>;
template struct Discriminator<double>;
template struct CycleGan<float>;
template struct CycleGan<double>;

}  // namespace uda::translator
