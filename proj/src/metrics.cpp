#include "textplace/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace textplace {

namespace {

void require_finite(const BBox& b) {
  if (!b.finite()) throw std::invalid_argument("non-finite bbox");
}

void require_nonnegative(const BBox& b) {
  if (b.width < 0.0 || b.height < 0.0)
    throw std::invalid_argument("negative bbox size");
}

// Subgradient of min/max: 0.5 at exact ties so that symmetric kinks match
// central finite differences.
double d_is_min(double a, double b) {
  if (a < b) return 1.0;
  if (a > b) return 0.0;
  return 0.5;
}

struct Overlap {
  double iw = 0.0;
  double ih = 0.0;
  double inter = 0.0;
  double uni = 0.0;
};

Overlap overlap(const BBox& a, const BBox& b) {
  Overlap o;
  o.iw = std::min(a.right(), b.right()) - std::max(a.left, b.left);
  o.ih = std::min(a.bottom(), b.bottom()) - std::max(a.top, b.top);
  o.inter = (o.iw > 0.0 && o.ih > 0.0) ? o.iw * o.ih : 0.0;
  o.uni = a.area() + b.area() - o.inter;
  return o;
}

constexpr double kAspectScale = 4.0 / (std::numbers::pi * std::numbers::pi);

}  // namespace

double iou(const BBox& a, const BBox& b) {
  require_finite(a);
  require_finite(b);
  require_nonnegative(a);
  require_nonnegative(b);
  const Overlap o = overlap(a, b);
  if (o.uni <= 0.0) return 0.0;
  return o.inter / o.uni;
}

double bde(const BBox& pred, const BBox& gt) {
  require_finite(pred);
  require_finite(gt);
  return (std::abs(pred.left - gt.left) + std::abs(pred.right() - gt.right()) +
          std::abs(pred.top - gt.top) + std::abs(pred.bottom() - gt.bottom())) /
         4.0;
}

CIoUBreakdown ciou(const BBox& pred, const BBox& gt) {
  require_finite(pred);
  require_finite(gt);
  require_nonnegative(pred);
  if (gt.width <= 0.0 || gt.height <= 0.0)
    throw std::invalid_argument("degenerate ground truth");

  CIoUBreakdown out;
  const Overlap o = overlap(pred, gt);
  out.iou = o.inter / o.uni;  // uni >= gt area > 0

  const double dx = pred.center_x() - gt.center_x();
  const double dy = pred.center_y() - gt.center_y();
  const double rho2 = dx * dx + dy * dy;
  const double cw = std::max(pred.right(), gt.right()) - std::min(pred.left, gt.left);
  const double ch = std::max(pred.bottom(), gt.bottom()) - std::min(pred.top, gt.top);
  const double c2 = cw * cw + ch * ch;  // >= gt diagonal > 0
  out.center_penalty = rho2 / c2;

  const double diff = std::atan2(gt.width, gt.height) - std::atan2(pred.width, pred.height);
  out.aspect_term_v = kAspectScale * diff * diff;

  const double denom = (1.0 - out.iou) + out.aspect_term_v;
  out.alpha = denom > 0.0 ? out.aspect_term_v / denom : 0.0;

  out.ciou = out.iou - out.center_penalty - out.alpha * out.aspect_term_v;
  out.loss = 1.0 - out.ciou;
  return out;
}

std::array<double, 4> ciou_loss_grad(const BBox& pred, const BBox& gt) {
  require_finite(pred);
  require_finite(gt);
  if (pred.width <= 0.0 || pred.height <= 0.0)
    throw std::invalid_argument("degenerate prediction");
  if (gt.width <= 0.0 || gt.height <= 0.0)
    throw std::invalid_argument("degenerate ground truth");

  const CIoUBreakdown bd = ciou(pred, gt);
  const Overlap o = overlap(pred, gt);

  // d(intersection) and d(union) w.r.t. (l, t, w, h) of pred.
  std::array<double, 4> dI{0, 0, 0, 0};
  if (o.iw > 0.0 && o.ih > 0.0) {
    const double right_active = d_is_min(pred.right(), gt.right());
    const double left_active = d_is_min(gt.left, pred.left);
    const double bottom_active = d_is_min(pred.bottom(), gt.bottom());
    const double top_active = d_is_min(gt.top, pred.top);
    dI[0] = o.ih * (right_active - left_active);
    dI[1] = o.iw * (bottom_active - top_active);
    dI[2] = o.ih * right_active;
    dI[3] = o.iw * bottom_active;
  }
  const std::array<double, 4> dU{-dI[0], -dI[1], pred.height - dI[2],
                                 pred.width - dI[3]};
  std::array<double, 4> dIoU;
  for (int i = 0; i < 4; ++i)
    dIoU[i] = (dI[i] * o.uni - o.inter * dU[i]) / (o.uni * o.uni);

  // Center-distance penalty rho^2 / c^2.
  const double dx = pred.center_x() - gt.center_x();
  const double dy = pred.center_y() - gt.center_y();
  const double rho2 = dx * dx + dy * dy;
  const std::array<double, 4> dRho2{2.0 * dx, 2.0 * dy, dx, dy};

  const double cw = std::max(pred.right(), gt.right()) - std::min(pred.left, gt.left);
  const double ch = std::max(pred.bottom(), gt.bottom()) - std::min(pred.top, gt.top);
  const double c2 = cw * cw + ch * ch;
  const double encl_right = d_is_min(gt.right(), pred.right());
  const double encl_left = d_is_min(pred.left, gt.left);
  const double encl_bottom = d_is_min(gt.bottom(), pred.bottom());
  const double encl_top = d_is_min(pred.top, gt.top);
  const std::array<double, 4> dCw{encl_right - encl_left, 0.0, encl_right, 0.0};
  const std::array<double, 4> dCh{0.0, encl_bottom - encl_top, 0.0, encl_bottom};
  std::array<double, 4> dPenalty;
  for (int i = 0; i < 4; ++i) {
    const double dC2 = 2.0 * cw * dCw[i] + 2.0 * ch * dCh[i];
    dPenalty[i] = (dRho2[i] * c2 - rho2 * dC2) / (c2 * c2);
  }

  // Aspect term with alpha treated as a constant.
  const double diff = std::atan2(gt.width, gt.height) - std::atan2(pred.width, pred.height);
  const double wh2 = pred.width * pred.width + pred.height * pred.height;
  const double dv_dw = 2.0 * kAspectScale * diff * (-pred.height / wh2);
  const double dv_dh = 2.0 * kAspectScale * diff * (pred.width / wh2);

  std::array<double, 4> grad;
  for (int i = 0; i < 4; ++i) grad[i] = -dIoU[i] + dPenalty[i];
  grad[2] += bd.alpha * dv_dw;
  grad[3] += bd.alpha * dv_dh;
  for (double g : grad)
    if (!std::isfinite(g)) throw std::runtime_error("non-finite ciou gradient");
  return grad;
}

}  // namespace textplace
