#include "ctgeo/image.hpp"

#include <cmath>
#include <string>

#include "ctgeo/errors.hpp"

namespace ctgeo {

ImageGrid ImageGrid::centered(int nx, int ny, double spacing) {
    ImageGrid g;
    g.nx = nx;
    g.ny = ny;
    g.spacing = spacing;
    g.origin_x = -0.5 * spacing * (nx - 1);
    g.origin_y = -0.5 * spacing * (ny - 1);
    g.validate();
    return g;
}

void ImageGrid::validate() const {
    if (nx < 1 || ny < 1) {
        throw InvalidParameter("image grid must be at least 1x1, got " + std::to_string(nx) +
                               "x" + std::to_string(ny));
    }
    if (!(spacing > 0.0) || !std::isfinite(spacing)) {
        throw InvalidParameter("pixel spacing must be positive");
    }
    if (!std::isfinite(origin_x) || !std::isfinite(origin_y)) {
        throw InvalidParameter("image origin must be finite");
    }
}

void Image::require_same_grid(const Image& other) const {
    if (grid.nx != other.grid.nx || grid.ny != other.grid.ny) {
        throw ShapeMismatch("image shapes differ: " + std::to_string(grid.nx) + "x" +
                            std::to_string(grid.ny) + " vs " + std::to_string(other.grid.nx) +
                            "x" + std::to_string(other.grid.ny));
    }
}

} // namespace ctgeo
