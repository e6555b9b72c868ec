#ifndef FRACLAP_IO_HPP
#define FRACLAP_IO_HPP

#include <iosfwd>
#include <string>
#include <vector>

#include "fraclap/adapt.hpp"
#include "fraclap/mesh.hpp"

namespace fraclap {

// Mesh <-> JSON document (vertices, triangles with generations, domain tag).
std::string mesh_to_json(const Mesh& mesh);
Mesh mesh_from_json(const std::string& text);

// Per-level CSV with the fixed header
// level,nelems,ndofs,eta,error,energy,t_solve,t_estimate
void records_to_csv(std::ostream& os, const std::vector<AdaptRecord>& records);

// SHA-1 hex digest (used for content-addressing the initial mesh in run
// manifests).
std::string sha1_hex(const std::string& data);

struct PlotSeries {
    std::string label;
    std::string color;
    bool dashed = false;
    std::vector<double> x, y;
};

// Minimal log-log SVG polyline plot with decade ticks and reference slopes.
std::string loglog_svg(const std::vector<PlotSeries>& series,
                       const std::vector<double>& reference_slopes, const std::string& title);

}  // namespace fraclap

#endif
