#pragma once

#include <cstddef>
#include <vector>

namespace ctgeo {

/// Pixel grid descriptor. Pixel (ix, iy) has its center at
/// (origin_x + ix * spacing, origin_y + iy * spacing) in mm.
struct ImageGrid {
    int nx = 0;
    int ny = 0;
    double spacing = 1.0; ///< mm, isotropic
    double origin_x = 0.0;
    double origin_y = 0.0;

    /// Grid centered on the isocenter.
    static ImageGrid centered(int nx, int ny, double spacing);

    double x(int ix) const { return origin_x + ix * spacing; }
    double y(int iy) const { return origin_y + iy * spacing; }
    std::size_t size() const { return static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny); }
    void validate() const;

    friend bool operator==(const ImageGrid&, const ImageGrid&) = default;
};

/// Gray values stored row-major: data[iy * nx + ix].
struct Image {
    ImageGrid grid;
    std::vector<double> data;

    Image() = default;
    explicit Image(const ImageGrid& g) : grid(g), data(g.size(), 0.0) {}

    double& at(int ix, int iy) { return data[static_cast<std::size_t>(iy) * grid.nx + ix]; }
    double at(int ix, int iy) const { return data[static_cast<std::size_t>(iy) * grid.nx + ix]; }

    /// Throws ShapeMismatch if the grids differ.
    void require_same_grid(const Image& other) const;
};

} // namespace ctgeo
