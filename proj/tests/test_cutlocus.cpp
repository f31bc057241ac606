#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include "cutlocus/cutlocus.hpp"
#include "cutlocus/solver.hpp"
#include "support.hpp"

namespace {

using namespace cutlocus;
using cutlocus::testing::p1_gradient;

struct SphereCase {
    SurfaceMesh mesh = generate_sphere(1.0, 4);
    FunctionSpace space = build_space(mesh, 1);
    int north = mesh.nearest_vertex({0, 0, 1});
    SolutionField sol;

    SphereCase() {
        SolveParams p;
        p.m = 50;
        sol = solve(assemble(space), space, SourceSet({north}, space.num_dofs()), p);
    }
};

const SphereCase& sphere_case() {
    static const SphereCase c;
    return c;
}

/// Flags recomputed from vertex values: for P1 the single constraint point is
/// the centroid, where u is the vertex mean and the gradient is constant.
std::vector<char> reference_flags(const SurfaceMesh& m, const Vector& c, double lambda) {
    std::vector<char> out(m.num_triangles(), 0);
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto& f = m.triangle(t);
        const double u = (c[f[0]] + c[f[1]] + c[f[2]]) / 3.0;
        const double g = p1_gradient(m.vertex(f[0]), m.vertex(f[1]), m.vertex(f[2]), c[f[0]], c[f[1]], c[f[2]]).norm();
        out[t] = u > lambda && g * g <= 1.0 - lambda * lambda / (u * u);
    }
    return out;
}

CutLocusSet set_from_triangles(const SurfaceMesh& m, const std::vector<int>& tris) {
    CutLocusSet s;
    s.lambda = 1.0;
    s.points_per_triangle = 1;
    s.mesh_area = m.total_area();
    s.triangle_flags.assign(m.num_triangles(), 0);
    s.point_flags.assign(m.num_triangles(), 0);
    s.point_positions.resize(m.num_triangles());
    for (int t = 0; t < m.num_triangles(); ++t) s.point_positions[t] = m.centroid(t);
    for (int t : tris) s.triangle_flags[t] = s.point_flags[t] = 1;
    detail::rebuild_components(s, m);
    return s;
}

/// Triangles reachable from `seed` within `steps` edge-adjacency steps.
std::vector<int> patch(const SurfaceMesh& m, int seed, int steps) {
    std::vector<char> in(m.num_triangles(), 0);
    std::vector<int> frontier = {seed}, all = {seed};
    in[seed] = 1;
    for (int s = 0; s < steps; ++s) {
        std::vector<int> next;
        for (int t : frontier)
            for (int k = 0; k < 3; ++k) {
                const int n = m.neighbor(t, k);
                if (!in[n]) {
                    in[n] = 1;
                    next.push_back(n);
                    all.push_back(n);
                }
            }
        frontier = next;
    }
    std::sort(all.begin(), all.end());
    return all;
}

void expect_consistent(const CutLocusSet& s, const SurfaceMesh& m) {
    std::vector<int> seen(m.num_triangles(), 0);
    double total = 0.0;
    for (std::size_t i = 0; i < s.components.size(); ++i) {
        const auto& c = s.components[i];
        EXPECT_EQ(c.id, static_cast<int>(i));
        double area = 0.0;
        for (int t : c.triangles) {
            ++seen[t];
            area += m.area(t);
            EXPECT_EQ(s.component_of[t], c.id);
        }
        EXPECT_NEAR(c.area, area, 1e-12);
        total += c.area;
        if (i > 0) { EXPECT_GE(s.components[i - 1].area, c.area); }
    }
    for (int t = 0; t < m.num_triangles(); ++t) {
        EXPECT_EQ(seen[t], s.triangle_flags[t] ? 1 : 0);
        if (!s.triangle_flags[t]) { EXPECT_EQ(s.component_of[t], -1); }
    }
    EXPECT_NEAR(s.flagged_area, total, 1e-12);
    for (std::size_t p = 0; p < s.point_flags.size(); ++p)
        if (s.point_flags[p]) { EXPECT_TRUE(s.triangle_flags[p / s.points_per_triangle]); }
}

TEST(Extract, MatchesDirectEvaluationOfTheInequality) {
    const SphereCase& c = sphere_case();
    for (double lambda : {0.02, 0.1, 0.5}) {
        const CutLocusSet s = extract(c.sol, c.space, lambda);
        const auto ref = reference_flags(c.mesh, c.sol.coeffs, lambda);
        int mismatches = 0;
        for (int t = 0; t < c.mesh.num_triangles(); ++t) mismatches += s.triangle_flags[t] != ref[t];
        EXPECT_EQ(mismatches, 0) << "lambda " << lambda;
        expect_consistent(s, c.mesh);
    }
}

TEST(Extract, LambdaAboveMaximumGivesEmptySet) {
    const SphereCase& c = sphere_case();
    const CutLocusSet s = extract(c.sol, c.space, c.sol.coeffs.maxCoeff());
    EXPECT_TRUE(s.empty());
    EXPECT_TRUE(s.empty_warning);
    EXPECT_EQ(s.flagged_triangle_count(), 0);
    EXPECT_EQ(s.flagged_area, 0.0);
    EXPECT_FALSE(extract(c.sol, c.space, 0.1).empty_warning);
}

TEST(Extract, NestedInLambda) {
    const SphereCase& c = sphere_case();
    const std::vector<double> lambdas = {0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0};
    std::vector<CutLocusSet> sets;
    for (double l : lambdas) sets.push_back(extract(c.sol, c.space, l));
    for (std::size_t i = 0; i + 1 < sets.size(); ++i)
        for (std::size_t p = 0; p < sets[i].point_flags.size(); ++p)
            if (sets[i + 1].point_flags[p]) { EXPECT_TRUE(sets[i].point_flags[p]) << "lambda " << lambdas[i + 1]; }
}

TEST(Extract, NestedInLambdaForP2) {
    const SurfaceMesh m = generate_torus(2, 1, 32, 16);
    const FunctionSpace s = build_space(m, 2, 6);
    SolveParams p;
    p.m = 20;
    const SolutionField sol = solve(assemble(s), s, SourceSet({0}, s.num_dofs()), p);
    const CutLocusSet a = extract(sol, s, 0.05), b = extract(sol, s, 0.2);
    EXPECT_GT(a.flagged_triangle_count(), 0);
    for (std::size_t q = 0; q < a.point_flags.size(); ++q)
        if (b.point_flags[q]) { EXPECT_TRUE(a.point_flags[q]); }
    expect_consistent(a, m);
}

TEST(Extract, SphereCutLocusIsTheAntipode) {
    const SphereCase& c = sphere_case();
    const CutLocusSet s = filter(extract(c.sol, c.space, 0.1), c.mesh);
    ASSERT_FALSE(s.empty());
    EXPECT_EQ(s.components.size(), 1u);
    for (const Vec3& x : s.flagged_points())
        EXPECT_LE(sphere_distance(Vec3::Zero(), 1.0, x.normalized(), {0, 0, -1}), 0.15);
    const auto h = hausdorff_to_reference(s, {Vec3(0, 0, -1)});
    EXPECT_LE(h.set_to_reference, 0.15);
}

TEST(Extract, SourceNeighbourhoodIsNeverFlagged) {
    const SphereCase& c = sphere_case();
    for (double lambda : {0.1, 0.2}) {
        ASSERT_GT(lambda, c.mesh.h_max());
        const CutLocusSet s = extract(c.sol, c.space, lambda);
        for (int t = 0; t < c.mesh.num_triangles(); ++t) {
            const auto& f = c.mesh.triangle(t);
            if (std::find(f.begin(), f.end(), c.north) != f.end()) { EXPECT_FALSE(s.triangle_flags[t]); }
        }
    }
}

TEST(Extract, AcceptsNormalizedField) {
    const SphereCase& c = sphere_case();
    const NormalizedSolution n = normalize_lipschitz(c.sol, c.space);
    const CutLocusSet s = extract(n, c.space, 0.1);
    const auto ref = reference_flags(c.mesh, n.coeffs, 0.1);
    for (int t = 0; t < c.mesh.num_triangles(); ++t) EXPECT_EQ(s.triangle_flags[t], ref[t]);
}

TEST(Extract, RejectsBadArguments) {
    const SphereCase& c = sphere_case();
    EXPECT_THROW(extract(c.sol, c.space, 0.0), Error);
    EXPECT_THROW(extract(c.sol, c.space, -0.1), Error);
    std::vector<double> short_norms(c.sol.gradient_norms.begin(), c.sol.gradient_norms.end() - 1);
    try {
        extract(c.sol.coeffs, short_norms, c.space, 0.1);
        FAIL() << "mismatched gradients accepted";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Dimension);
    }
}

TEST(Components, EdgeAdjacencyOnly) {
    const SurfaceMesh m = cutlocus::testing::octahedron();
    // Faces 0 and 2 share only vertex 0; faces 0 and 1 share edge (0, 2).
    const CutLocusSet a = set_from_triangles(m, {0, 2});
    EXPECT_EQ(a.components.size(), 2u);
    const CutLocusSet b = set_from_triangles(m, {0, 1, 2});
    ASSERT_EQ(b.components.size(), 1u);
    EXPECT_EQ(b.components[0].triangles, (std::vector<int>{0, 1, 2}));
    EXPECT_TRUE(components(std::vector<char>(8, 0), m).empty());
    EXPECT_THROW(components(std::vector<char>(7, 0), m), Error);
}

TEST(Components, PartitionAndAreas) {
    const SurfaceMesh m = generate_torus(3, 1, 24, 12);
    const auto a = patch(m, 0, 3), b = patch(m, 200, 1);
    std::vector<int> both = a;
    both.insert(both.end(), b.begin(), b.end());
    const CutLocusSet s = set_from_triangles(m, both);
    ASSERT_EQ(s.components.size(), 2u);
    EXPECT_EQ(s.components[0].triangles, a);
    EXPECT_EQ(s.components[1].triangles, b);
    expect_consistent(s, m);
}

TEST(Filter, ThresholdSemantics) {
    const SurfaceMesh m = generate_sphere(1.0, 4);
    const double a = m.total_area();
    const auto big = patch(m, 0, 4);
    const int lone = patch(m, 3000, 0)[0];
    ASSERT_LT(m.area(lone), 1e-3 * a);
    const CutLocusSet s = set_from_triangles(m, [&] {
        auto v = big;
        v.push_back(lone);
        return v;
    }());
    ASSERT_EQ(s.components.size(), 2u);
    const CutLocusSet f = filter(s, m, 1e-3);
    ASSERT_EQ(f.components.size(), 1u);
    EXPECT_EQ(f.components[0].triangles, big);
    EXPECT_FALSE(f.triangle_flags[lone]);
    EXPECT_FALSE(f.point_flags[lone]);
    expect_consistent(f, m);

    const CutLocusSet id = filter(s, m, 0.0);
    EXPECT_EQ(id.triangle_flags, s.triangle_flags);
    EXPECT_EQ(id.point_flags, s.point_flags);
    EXPECT_THROW(filter(s, m, 1.0), Error);
    EXPECT_THROW(filter(s, m, -0.1), Error);
}

TEST(Filter, IdempotentAndStableOnTheSphere) {
    const SphereCase& c = sphere_case();
    const CutLocusSet raw = extract(c.sol, c.space, 0.1);
    const CutLocusSet once = filter(raw, c.mesh), twice = filter(once, c.mesh);
    EXPECT_EQ(once.point_flags, twice.point_flags);
    EXPECT_EQ(once.triangle_flags, twice.triangle_flags);
    EXPECT_EQ(once.components.size(), twice.components.size());
    for (double f : {3e-4, 5e-4, 1.5e-3}) EXPECT_EQ(filter(raw, c.mesh, f).triangle_flags, once.triangle_flags) << f;
    // At 1e-4 the single-triangle checkerboard components survive; the principal component does not change.
    const CutLocusSet finer = filter(raw, c.mesh, 1e-4);
    ASSERT_FALSE(finer.empty());
    EXPECT_EQ(finer.components[0].triangles, once.components[0].triangles);
}

TEST(SubcomplexEuler, KnownComplexes) {
    const SurfaceMesh sphere = generate_sphere(1.0, 2);
    std::vector<int> all(sphere.num_triangles());
    std::iota(all.begin(), all.end(), 0);
    EXPECT_EQ(subcomplex_euler(sphere, all), 2);
    EXPECT_EQ(subcomplex_euler(sphere, {0}), 1);
    EXPECT_EQ(subcomplex_euler(sphere, patch(sphere, 5, 3)), 1);

    const SurfaceMesh torus = generate_torus(3, 1, 12, 6);
    std::vector<int> tall(torus.num_triangles());
    std::iota(tall.begin(), tall.end(), 0);
    EXPECT_EQ(subcomplex_euler(torus, tall), 0);
    // One band of quads around the tube: triangles 2 * (i * nv + j) and the next one for fixed j.
    std::vector<int> band;
    for (int i = 0; i < 12; ++i) {
        band.push_back(2 * (i * 6));
        band.push_back(2 * (i * 6) + 1);
    }
    EXPECT_EQ(set_from_triangles(torus, band).components.size(), 1u);
    EXPECT_EQ(subcomplex_euler(torus, band), 0);
}

TEST(LabelCells, AntipodalSourcesSplitTheSphere) {
    const SurfaceMesh m = generate_sphere(1.0, 4);
    const std::vector<int> src = {m.nearest_vertex({0, 0, 1}), m.nearest_vertex({0, 0, -1})};
    const VoronoiLabeling l = label_cells(m, src);
    const long zeros = std::count(l.vertex_labels.begin(), l.vertex_labels.end(), 0);
    const long ones = std::count(l.vertex_labels.begin(), l.vertex_labels.end(), 1);
    EXPECT_EQ(zeros + ones, m.num_vertices());
    EXPECT_LE(std::abs(zeros - ones), 0.05 * std::max(zeros, ones));
    EXPECT_EQ(l.vertex_labels[src[0]], 0);
    EXPECT_EQ(l.vertex_labels[src[1]], 1);
    for (int i = 0; i < m.num_vertices(); ++i) {
        if (m.vertex(i).z() > 0.05) { EXPECT_EQ(l.vertex_labels[i], 0); }
        if (m.vertex(i).z() < -0.05) { EXPECT_EQ(l.vertex_labels[i], 1); }
    }
}

TEST(LabelCells, TriangleMajority) {
    const SurfaceMesh m = generate_sphere(1.0, 3);
    const std::vector<int> src = {0, 5, 9, 100};
    const VoronoiLabeling l = label_cells(m, src, DistanceOracle::graph(m, src, 1));
    for (std::size_t k = 0; k < src.size(); ++k) EXPECT_EQ(l.vertex_labels[src[k]], static_cast<int>(k));
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto& f = m.triangle(t);
        const int a = l.vertex_labels[f[0]], b = l.vertex_labels[f[1]], c = l.vertex_labels[f[2]];
        const int lt = l.triangle_labels[t];
        EXPECT_GE(lt, 0);
        EXPECT_LT(lt, 4);
        const int votes = (a == lt) + (b == lt) + (c == lt);
        if (a != b && b != c && a != c) {
            EXPECT_EQ(lt, std::min({a, b, c}));
        } else {
            EXPECT_GE(votes, 2);
        }
    }
}

TEST(LabelCells, Preconditions) {
    const SurfaceMesh m = generate_sphere(1.0, 1);
    EXPECT_THROW(label_cells(m, {0}), Error);
    EXPECT_THROW(label_cells(m, {0, 1}, DistanceOracle::graph(m, {0, 2}, 0)), Error);
}

TEST(Hausdorff, Examples) {
    const std::vector<Vec3> a = {{0, 0, 0}, {1, 0, 0}, {0, 2, 0}};
    const auto same = hausdorff(a, a);
    EXPECT_EQ(same.set_to_reference, 0.0);
    EXPECT_EQ(same.reference_to_set, 0.0);
    const auto single = hausdorff({Vec3(1, 2, 3)}, {Vec3(1, 2, 5.5)});
    EXPECT_DOUBLE_EQ(single.set_to_reference, 2.5);
    EXPECT_DOUBLE_EQ(single.reference_to_set, 2.5);
    const auto asym = hausdorff({Vec3(0, 0, 0)}, {Vec3(1, 0, 0), Vec3(3, 0, 0)});
    EXPECT_DOUBLE_EQ(asym.set_to_reference, 1.0);
    EXPECT_DOUBLE_EQ(asym.reference_to_set, 3.0);
    EXPECT_THROW(hausdorff({}, a), Error);
    EXPECT_THROW(hausdorff(a, {}), Error);

    const SurfaceMesh m = generate_sphere(1.0, 1);
    EXPECT_THROW(hausdorff_to_reference(set_from_triangles(m, {}), a), Error);
    const CutLocusSet s = set_from_triangles(m, {3});
    const auto h = hausdorff_to_reference(s, {m.centroid(3)});
    EXPECT_LT(h.set_to_reference, 1e-15);
}

TEST(ComponentTable, Csv) {
    const SurfaceMesh m = generate_torus(3, 1, 24, 12);
    const CutLocusSet s = set_from_triangles(m, [&] {
        auto v = patch(m, 0, 2);
        const auto w = patch(m, 300, 0);
        v.insert(v.end(), w.begin(), w.end());
        return v;
    }());
    std::ostringstream os;
    write_component_csv(os, s);
    std::istringstream in(os.str());
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "id,area,triangle_count");
    for (const auto& c : s.components) {
        std::getline(in, line);
        std::istringstream row(line);
        int id;
        double area;
        std::size_t n;
        char comma;
        row >> id >> comma >> area >> comma >> n;
        EXPECT_EQ(id, c.id);
        EXPECT_EQ(area, c.area);
        EXPECT_EQ(n, c.triangles.size());
    }
    EXPECT_FALSE(std::getline(in, line));
}

}  // namespace
