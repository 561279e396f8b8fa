#pragma once

namespace htr {

/// Axis-aligned box in image coordinates, corners (x1, y1) top-left and
/// (x2, y2) bottom-right.
struct BoxXYXY {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  bool valid() const { return x1 <= x2 && y1 <= y2; }
  double area() const { return (x2 - x1) * (y2 - y1); }
};

}  // namespace htr
