#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "emix/param_store.hpp"
#include "emix/rng.hpp"

using namespace emix;

TEST_CASE("adam step matches the hand-computed update") {
  ParamStore store;
  store.add("p", Tensor2::row({1.0, -2.0}));
  std::map<std::string, Tensor2> grads;
  grads["p"] = Tensor2::row({0.5, -0.25});

  const double lr = 1e-2, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  store.adam_step(grads, lr, b1, b2, eps);

  // first step: m = (1-b1)g, v = (1-b2)g^2, mhat = g, vhat = g^2
  for (int i = 0; i < 2; ++i) {
    const double g = grads["p"].data[i];
    const double expect =
        (i == 0 ? 1.0 : -2.0) - lr * g / (std::sqrt(g * g) + eps);
    CHECK(store.at("p").data[i] == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(store.step() == 1);

  // second step with the same gradient still moves in -sign(g) direction
  const Tensor2 before = store.at("p");
  store.adam_step(grads, lr, b1, b2, eps);
  CHECK(store.at("p").data[0] < before.data[0]);
  CHECK(store.at("p").data[1] > before.data[1]);
}

TEST_CASE("adam touches only named parameters and validates shapes") {
  ParamStore store;
  store.add("a", Tensor2::row({1.0}));
  store.add("b", Tensor2::row({2.0}));
  std::map<std::string, Tensor2> grads;
  grads["a"] = Tensor2::row({1.0});
  store.adam_step(grads, 0.1);
  CHECK(store.at("b").data[0] == 2.0);
  std::map<std::string, Tensor2> bad;
  bad["a"] = Tensor2(2, 2);
  CHECK_THROWS(store.adam_step(bad, 0.1));
}

TEST_CASE("copy_section overwrites the prefixed counterparts") {
  ParamStore store;
  store.add("live/x", Tensor2::row({1.0, 2.0}));
  store.add("target/live/x", Tensor2::row({0.0, 0.0}));
  store.copy_section("live/", "target/live/");
  CHECK(store.at("target/live/x").data[1] == 2.0);
}

TEST_CASE("checkpoint round-trips bit-exactly") {
  Rng rng(13);
  ParamStore store;
  Tensor2 t(3, 5);
  for (double& v : t.data) v = rng.normal() * 1e-7;
  store.add("net/W0", t);
  store.add("net/b0", Tensor2::row({0.25, -0.75}));

  const std::string path =
      (std::filesystem::temp_directory_path() / "emix_ckpt_test.bin").string();
  save_checkpoint(path, {{"", &store}});

  ParamStore loaded;
  loaded.add("net/W0", Tensor2(3, 5));
  loaded.add("net/b0", Tensor2::row({0.0, 0.0}));
  load_checkpoint(path, {{"", &loaded}});
  for (size_t i = 0; i < t.size(); ++i)
    CHECK(loaded.at("net/W0").data[i] == store.at("net/W0").data[i]);
  CHECK(loaded.at("net/b0").data[1] == -0.75);

  // shape mismatch is rejected
  ParamStore wrong;
  wrong.add("net/W0", Tensor2(5, 3));
  wrong.add("net/b0", Tensor2::row({0.0, 0.0}));
  CHECK_THROWS(load_checkpoint(path, {{"", &wrong}}));
  std::remove(path.c_str());
}

TEST_CASE("grad_l2_norm") {
  std::map<std::string, Tensor2> grads;
  grads["a"] = Tensor2::row({3.0});
  grads["b"] = Tensor2::row({4.0});
  CHECK(grad_l2_norm(grads) == doctest::Approx(5.0));
}
