#include <doctest.h>

#include <filesystem>

#include "shiftcal/checkpoint.hpp"

using namespace shiftcal;

TEST_CASE("forecaster checkpoints round-trip bit-exactly") {
  Rng rng(1);
  Forecaster f;
  f.features.stages.push_back(
      make_dense_net({2, 5}, {Activation::Tanh}, rng));
  f.features.stages.push_back(make_dense_net({5, 5}, {Activation::Tanh}, rng));
  f.head = make_dense_net({5, 3}, {Activation::Identity}, rng);
  f.temperature = 0.731234567890123456;
  f.mode = CalibrationMode::Full;

  Forecaster back = forecaster_from_json(forecaster_to_json(f));
  CHECK(back.temperature == f.temperature);
  CHECK(back.mode == f.mode);
  REQUIRE(back.features.stages.size() == 2);
  for (size_t s = 0; s < 2; ++s)
    for (size_t li = 0; li < f.features.stages[s].layers.size(); ++li) {
      CHECK(back.features.stages[s].layers[li].weights.data ==
            f.features.stages[s].layers[li].weights.data);
      CHECK(back.features.stages[s].layers[li].bias == f.features.stages[s].layers[li].bias);
    }
  CHECK(back.head.layers[0].weights.data == f.head.layers[0].weights.data);

  // file round trip through the atomic writer
  auto path = (std::filesystem::temp_directory_path() / "shiftcal_fc.json").string();
  save_forecaster(f, path);
  Forecaster loaded = load_forecaster(path);
  CHECK(loaded.head.layers[0].weights.data == f.head.layers[0].weights.data);
  CHECK(loaded.temperature == f.temperature);
  std::filesystem::remove(path);
}

TEST_CASE("discriminator checkpoints round-trip and kinds are checked") {
  Rng rng(2);
  SourceDiscriminator d;
  d.features.stages.push_back(make_dense_net({2, 4}, {Activation::Tanh}, rng));
  d.head = make_dense_net({4, 1}, {Activation::Identity}, rng);
  d.temperature = 1.25;
  d.clamp_bound = 42.0;

  std::string text = discriminator_to_json(d);
  SourceDiscriminator back = discriminator_from_json(text);
  CHECK(back.clamp_bound == 42.0);
  CHECK(back.temperature == 1.25);
  CHECK(back.head.layers[0].weights.data == d.head.layers[0].weights.data);

  CHECK_THROWS(forecaster_from_json(text));
  CHECK_THROWS(discriminator_from_json("{\"format\":\"something-else\"}"));
}
