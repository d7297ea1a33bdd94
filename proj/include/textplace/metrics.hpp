#pragma once

#include <array>

#include "textplace/layout.hpp"

namespace textplace {

struct CIoUBreakdown {
  double iou = 0.0;            // [0,1]
  double center_penalty = 0.0; // rho^2 / c^2
  double aspect_term_v = 0.0;  // (4/pi^2) * (atan(wg/hg) - atan(wp/hp))^2
  double alpha = 0.0;          // v / ((1 - iou) + v), 0 when denominator is 0
  double ciou = 0.0;           // iou - center_penalty - alpha * v
  double loss = 0.0;           // 1 - ciou
};

// Intersection over union; 0 when both boxes are degenerate.
double iou(const BBox& a, const BBox& b);

// Boundary displacement error: mean absolute displacement of the four edges.
double bde(const BBox& pred, const BBox& gt);

CIoUBreakdown ciou(const BBox& pred, const BBox& gt);

// d(1 - ciou)/d(left, top, width, height) of pred, with alpha held constant.
std::array<double, 4> ciou_loss_grad(const BBox& pred, const BBox& gt);

}  // namespace textplace
