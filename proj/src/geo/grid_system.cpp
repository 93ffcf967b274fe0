#include "epimob/geo/grid_system.hpp"

#include "epimob/error.hpp"

#include <algorithm>

namespace epimob::geo {

std::vector<CellId> GridSystem::cells_covering(const GeoPolygon& poly, Resolution res) const {
    poly.validate();
    if (poly.degenerate()) return {};
    auto cells = centers_inside(poly, res);
    if (cells.empty()) {
        cells.push_back(cell_of(poly.centroid(), res));
    }
    std::sort(cells.begin(), cells.end());
    cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
    return cells;
}

CellId GridSystem::parent_cell(CellId c, Resolution coarser) const {
    if (!is_valid(c)) throw InvalidInput("invalid cell id " + c.to_hex());
    const Resolution own = resolution_of(c);
    if (coarser.level() >= own.level()) {
        throw InvalidInput("parent resolution " + std::to_string(coarser.level()) + " is not coarser than " +
                           std::to_string(own.level()), "res");
    }
    return parent_unchecked(c, coarser);
}

std::shared_ptr<const GridSystem> make_grid(std::string_view backend) {
    if (backend == "h3") return make_h3_grid();
    if (backend == "flat") return make_flat_grid();
    throw InvalidInput("unknown grid backend '" + std::string(backend) + "'", "grid");
}

std::vector<std::pair<double, double>> geojson_ring(const GridSystem& grid, CellId c) {
    std::vector<std::pair<double, double>> ring;
    for (const auto& p : grid.cell_boundary(c)) ring.emplace_back(p.lon, p.lat);
    if (!ring.empty()) ring.push_back(ring.front());
    return ring;
}

} // namespace epimob::geo
