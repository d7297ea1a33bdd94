#pragma once

// Shared helpers for the test binaries: a finite-difference gradient harness
// over the tape ops and small layout builders.

#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "textplace/layout.hpp"
#include "textplace/rng.hpp"
#include "textplace/tensor.hpp"

namespace testsupport {

using textplace::nn::Tape;
using textplace::nn::TensorPtr;

// Rebuilds the graph per call so inputs can be perturbed in place between
// calls; returns a fixed random projection of the output, making the check a
// scalar function of every input element.
using Builder = std::function<TensorPtr(Tape&)>;

inline double projected(const Builder& build, const std::vector<double>& weights) {
  Tape tape;
  const TensorPtr out = build(tape);
  REQUIRE(out->numel() == weights.size());
  double s = 0.0;
  for (size_t i = 0; i < weights.size(); ++i) s += weights[i] * out->data[i];
  return s;
}

// Central differences, combined absolute/relative criterion:
// |analytic - fd| <= tol * (1 + |analytic| + |fd|).
// stride checks every stride-th element of large inputs.
inline void check_gradients(const Builder& build,
                            const std::vector<TensorPtr>& inputs, uint64_t seed,
                            double tol = 1e-3, double h = 1e-5,
                            size_t stride = 1) {
  for (const TensorPtr& input : inputs) input->zero_grad();
  Tape tape;
  const TensorPtr out = build(tape);
  std::vector<double> weights(out->numel());
  textplace::Rng rng(seed);
  for (double& w : weights) w = rng.uniform(-1.0, 1.0);
  for (size_t i = 0; i < weights.size(); ++i) out->grad[i] = weights[i];
  tape.backward();

  for (const TensorPtr& input : inputs) {
    REQUIRE(input->has_grad());
    for (size_t i = 0; i < input->numel(); i += stride) {
      const double saved = input->data[i];
      input->data[i] = saved + h;
      const double up = projected(build, weights);
      input->data[i] = saved - h;
      const double down = projected(build, weights);
      input->data[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double an = input->grad[i];
      CHECK(std::abs(an - fd) <= tol * (1.0 + std::abs(an) + std::abs(fd)));
    }
  }
}

inline TensorPtr randn(std::vector<int> shape, textplace::Rng& rng,
                       double bound = 1.0) {
  TensorPtr t = textplace::nn::make_tensor(std::move(shape));
  t->fill_uniform(rng, bound);
  return t;
}

inline textplace::Element colored_element(textplace::ElementKind kind,
                                          textplace::BBox box,
                                          textplace::Rgb color) {
  textplace::Element e;
  e.kind = kind;
  e.bbox = box;
  e.color = color;
  return e;
}

// Background + one shape context + target text, everything valid.
inline textplace::Layout small_layout(textplace::BBox target_box = {0.4, 0.55,
                                                                    0.3, 0.2}) {
  using namespace textplace;
  Layout l;
  l.id = "small";
  l.canvas_width = l.canvas_height = 48;
  l.elements.push_back(colored_element(ElementKind::coloredBackground,
                                       {0, 0, 1, 1}, {245, 240, 230}));
  l.elements.push_back(colored_element(ElementKind::svgElement,
                                       {0.1, 0.1, 0.3, 0.25}, {120, 160, 210}));
  l.elements.push_back(make_text_element("Sale", target_box, {30, 30, 34}, 1));
  l.target_index = 2;
  return l;
}

}  // namespace testsupport
