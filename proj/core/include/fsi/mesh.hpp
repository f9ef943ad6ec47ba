#pragma once

#include "fsi/kinematics.hpp"
#include "fsi/types.hpp"

#include <array>
#include <vector>

namespace fsi {

/// Triangulated sphere. Face normals point into the body (out of the fluid).
struct SurfaceMesh {
    double radius = 0.0;
    std::vector<Vec3> vertices;                // reference frame, centred at the origin
    std::vector<std::array<int, 3>> faces;
    std::vector<Vec3> centroids;               // reference frame
    std::vector<Vec3> normals;                 // unit, into the body
    std::vector<double> areas;

    double total_area() const;
    /// Centroid and into-body normal of face f after the body isometry.
    Vec3 centroid(std::size_t f, const BodyState& body) const { return body.X + body.O * centroids[f]; }
    Vec3 normal(std::size_t f, const BodyState& body) const { return body.O * normals[f]; }
};

/// Icosahedron refined `level` times (20·4^level faces); level 3 gives 1280 faces.
SurfaceMesh icosphere(double radius, int level = 3);

/// Sum of n dA and of (x−X)×n dA over the mesh placed at the body pose.
std::pair<Vec3, Vec3> closed_surface_moments(const SurfaceMesh& mesh, const BodyState& body);

}  // namespace fsi
