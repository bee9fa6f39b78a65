#pragma once

#include "sparseloc/headmodel.hpp"
#include "sparseloc/model.hpp"
#include "sparseloc/rng.hpp"

#include <memory>

namespace fixtures {

using namespace sparseloc;

// A coarse sphere keeps solver tests fast while staying geometrically realistic.
inline const LeadField& coarse_sphere(int dof = 1) {
    static const LeadField one = normalize_columns(generate_sphere_leadfield({85.0, 0.33, 20.0, 32, 120.0}, 1));
    static const LeadField three = normalize_columns(generate_sphere_leadfield({85.0, 0.33, 20.0, 32, 120.0}, 3));
    return dof == 3 ? three : one;
}

// The desk-scale space used by the campaigns (110 mm sphere, 12.5 mm grid, 64 electrodes).
inline const LeadField& campaign_sphere() {
    static const LeadField lf = normalize_columns(generate_sphere_leadfield({110.0, 0.33, 12.5, 64, 120.0}, 1));
    return lf;
}

inline Matrix gaussian(int rows, int cols, std::uint64_t seed) {
    CounterRng rng(seed);
    Matrix m(rows, cols);
    for (int j = 0; j < cols; ++j)
        for (int i = 0; i < rows; ++i) m(i, j) = rng.normal();
    return m;
}

// Bare lead field around an explicit gain; sources sit on a line, radial-free.
inline LeadField from_gain(const Matrix& k, int dof = 1) {
    auto ss = std::make_shared<SourceSpace>();
    const int m = static_cast<int>(k.cols()) / dof;
    ss->dof = dof;
    ss->head_radius = 1000.0;
    for (int j = 0; j < m; ++j) {
        ss->positions.emplace_back(j, 0.0, 0.0);
        ss->orientations.push_back(dof == 1 ? Orientation(Vec3::UnitZ()) : std::nullopt);
    }
    ss->adjacency.assign(m, {});
    for (int j = 0; j + 1 < m; ++j) {
        ss->adjacency[j].push_back(j + 1);
        ss->adjacency[j + 1].push_back(j);
    }
    auto ea = std::make_shared<ElectrodeArray>();
    ea->count = static_cast<int>(k.rows());
    LeadField lf;
    lf.gain = k;
    lf.column_weights = Vector::Ones(k.cols());
    lf.sources = ss;
    lf.electrodes = ea;
    return lf;
}

} // namespace fixtures
