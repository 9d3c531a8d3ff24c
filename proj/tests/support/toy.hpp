#pragma once

// A small but complete model stack for fast training and gradient tests.

#include <memory>
#include <string>
#include <vector>

#include "speechrt/backbone.hpp"
#include "speechrt/codec.hpp"
#include "speechrt/grad_check.hpp"
#include "speechrt/reasoner.hpp"
#include "speechrt/refiner.hpp"
#include "speechrt/synthetic.hpp"
#include "speechrt/training.hpp"

namespace toy {

using namespace speechrt;

inline StubConfig stub_config() {
  StubConfig c;
  c.width = 16;
  c.text_vocab = 12;
  return c;
}

inline BackboneConfig backbone_config() {
  BackboneConfig c;
  c.width = 16;
  c.layers = 2;
  c.heads = 2;
  c.mlp_hidden = 32;
  c.vocab = 16;
  c.levels = 3;
  c.text_vocab = 12;
  c.context_limit = 256;
  return c;
}

inline RefinerConfig refiner_config() {
  RefinerConfig c;
  c.width = 8;
  c.layers = 2;
  c.heads = 2;
  c.mlp_hidden = 16;
  c.levels = 3;
  c.vocab = 16;
  c.backbone_width = 16;
  return c;
}

inline CodecConfig codec_config() {
  CodecConfig c;
  c.levels = 3;
  c.vocab = 16;
  c.dim = 8;
  c.frame_hop = 32;
  c.sample_rate = 1600;
  return c;
}

struct World {
  ReasonerStub stub{stub_config()};
  RvqCodec codec = train_codec(codec_training_pool(8, 12, 4, 64, 1), codec_config());
  Backbone backbone{backbone_config()};
  Refiner refiner{refiner_config()};
  SyntheticGenerator data{stub, codec, 16};
};

// ParamRefs over both models, pointing gradients into `grads`.
inline std::vector<ParamRef> params(World& w, ModelGradients& grads) {
  std::vector<ParamRef> out;
  std::vector<Matrix*> gs;
  grads.backbone.visit("bb.", [&](const std::string&, Matrix& m) { gs.push_back(&m); });
  grads.refiner.visit("rf.", [&](const std::string&, Matrix& m) { gs.push_back(&m); });
  w.backbone.weights().visit("bb.", [&](const std::string& n, Matrix& m) { out.push_back({n, &m, nullptr}); });
  w.refiner.weights().visit("rf.", [&](const std::string& n, Matrix& m) { out.push_back({n, &m, nullptr}); });
  for (std::size_t i = 0; i < out.size(); ++i) out[i].grad = gs[i];
  return out;
}

}  // namespace toy
