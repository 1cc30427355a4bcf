#pragma once

#include <algorithm>

#include "mogen/tensor.hpp"

namespace mogen {

// Axis-aligned box in normalized [0,1] coordinates.
struct NormBox {
    double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;

    double width() const { return x1 - x0; }
    double height() const { return y1 - y0; }
    double area() const { return width() * height(); }

    void validate() const {
        if (!(x0 < x1) || !(y0 < y1) || x0 < 0.0 || y0 < 0.0 || x1 > 1.0 || y1 > 1.0)
            throw ContractError("NormBox: coordinates must satisfy 0 <= x0 < x1 <= 1, 0 <= y0 < y1 <= 1");
        if (area() <= 0.0) throw ContractError("NormBox: degenerate box");
    }

    double iou(const NormBox& o) const {
        const double ix = std::max(0.0, std::min(x1, o.x1) - std::max(x0, o.x0));
        const double iy = std::max(0.0, std::min(y1, o.y1) - std::max(y0, o.y0));
        const double inter = ix * iy;
        const double uni = area() + o.area() - inter;
        return uni > 0.0 ? inter / uni : 0.0;
    }

    bool operator==(const NormBox& o) const {
        return x0 == o.x0 && y0 == o.y0 && x1 == o.x1 && y1 == o.y1;
    }
};

}  // namespace mogen
