#pragma once

#include "drface/mesh.hpp"

#include <string>
#include <vector>

namespace drface {

// Average vertex distance in millimeters.
double e_avd(const Mesh& a, const Mesh& b);

// Spatial edge-difference perceptual error: relative per-edge length change,
// length-weighted deviation around each vertex, averaged over vertices.
// Edge weights come from the first (original) mesh. Dimensionless.
double e_sed(const Mesh& original, const Mesh& reconstructed);

// Mean per-vertex positional standard deviation over a set of meshes with
// shared connectivity; realizes the decomposition metrics E_id/E_exp.
double decomposition_std(const std::vector<Mesh>& meshes);

// Per-mesh values of one metric plus aggregates, as emitted by the eval CLI.
struct MetricReport {
    std::string metric;
    std::vector<std::pair<std::string, double>> per_mesh; // (mesh id, value)

    double mean() const;
    double median() const;
};

} // namespace drface
