#pragma once

#include "epimob/geo/cell_id.hpp"
#include "epimob/geo/geo_polygon.hpp"

#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace epimob::geo {

// Spatial indexing backend. Implementations are immutable after construction
// and safe for concurrent use.
class GridSystem {
public:
    virtual ~GridSystem() = default;

    virtual std::string_view name() const = 0;

    // Throws InvalidInput for out-of-range coordinates.
    virtual CellId cell_of(const LatLon& p, Resolution res) const = 0;

    // Sorted, unique. Every cell whose center lies inside `poly` is included;
    // when the polygon is smaller than a cell and contains no center, the cell
    // holding its centroid is returned instead. Zero-area polygons yield {}.
    // Throws InvalidInput for invalid (e.g. self-intersecting) rings.
    std::vector<CellId> cells_covering(const GeoPolygon& poly, Resolution res) const;

    // Throws InvalidInput unless coarser < resolution_of(c).
    CellId parent_cell(CellId c, Resolution coarser) const;

    virtual Resolution resolution_of(CellId c) const = 0;
    virtual bool is_valid(CellId c) const = 0;
    virtual LatLon cell_center(CellId c) const = 0;
    // Boundary vertices, counter-clockwise, not closed.
    virtual std::vector<LatLon> cell_boundary(CellId c) const = 0;
    // All cells within grid distance k of c (including c), sorted.
    virtual std::vector<CellId> disk(CellId c, int k) const = 0;
    virtual double cell_area_km2(Resolution res) const = 0;

    // True when parent_cell(parent_cell(c, a), b) == parent_cell(c, b) for all b < a.
    virtual bool is_hierarchical() const = 0;

protected:
    virtual std::vector<CellId> centers_inside(const GeoPolygon& poly, Resolution res) const = 0;
    virtual CellId parent_unchecked(CellId c, Resolution coarser) const = 0;
};

// H3 at the requested resolution (default backend).
std::shared_ptr<const GridSystem> make_h3_grid();

// Flat axial hexagons on an equirectangular projection around `origin`.
// Level-8 cells are 0.737 km^2; each coarser level is 7x larger.
std::shared_ptr<const GridSystem> make_flat_grid(LatLon origin = {35.6812, 139.7671});

// "h3" or "flat".
std::shared_ptr<const GridSystem> make_grid(std::string_view backend);

// GeoJSON-style closed ring: [[lon, lat], ...] with first vertex repeated.
std::vector<std::pair<double, double>> geojson_ring(const GridSystem& grid, CellId c);

} // namespace epimob::geo
