#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <map>
#include <numeric>

#include <voxrec/grid_io.hpp>
#include <voxrec/rng.hpp>
#include <voxrec/voxel_grid.hpp>

using namespace voxrec;

namespace {

PointFeatureCloud random_cloud(Rng& rng, int n, int width, double extent = 0.5) {
  PointFeatureCloud cloud;
  cloud.features.resize(n, width);
  for (int i = 0; i < n; ++i) {
    cloud.positions.push_back(rng.uniform3(-extent, extent));
    for (int c = 0; c < width; ++c) cloud.features(i, c) = rng.uniform(-1.0, 1.0);
  }
  return cloud;
}

// Brute-force grouping oracle: std::map keyed grouping with plain double
// accumulation, independent of the hash-grid code path.
struct GroupOracle {
  std::map<VoxelKey, std::pair<int, Eigen::VectorXd>> groups;
};

GroupOracle group_oracle(const PointFeatureCloud& cloud, double voxel_size) {
  GroupOracle g;
  for (size_t i = 0; i < cloud.positions.size(); ++i) {
    VoxelKey k;
    for (int c = 0; c < 3; ++c)
      k[c] = static_cast<int32_t>(std::floor(cloud.positions[i](c) / voxel_size));
    auto [it, fresh] = g.groups.try_emplace(
        k, 0, Eigen::VectorXd::Zero(cloud.features.cols()).eval());
    it->second.first += 1;
    it->second.second += cloud.features.row(i).transpose();
  }
  return g;
}

}  // namespace

TEST_CASE("voxelize pools features within a cell") {
  PointFeatureCloud cloud;
  cloud.positions = {Vec3(0.001, 0.001, 0.001), Vec3(0.009, 0.009, 0.009)};
  cloud.features.resize(2, 2);
  cloud.features << 1.0, 10.0, 3.0, 20.0;
  const SparseVoxelGrid grid = voxelize(cloud, 0.01);
  REQUIRE(grid.size() == 1);
  CHECK(grid.keys[0] == VoxelKey{0, 0, 0});
  CHECK(grid.counts[0] == 2);
  CHECK(grid.features(0, 0) == Catch::Approx(2.0).margin(1e-15));
  CHECK(grid.features(0, 1) == Catch::Approx(15.0).margin(1e-15));
}

TEST_CASE("voxelize boundary uses the floor rule") {
  PointFeatureCloud cloud;
  cloud.positions = {Vec3(0.01, 0.0, 0.0)};
  cloud.features.resize(1, 1);
  cloud.features << 1.0;
  const SparseVoxelGrid grid = voxelize(cloud, 0.01);
  REQUIRE(grid.size() == 1);
  CHECK(grid.keys[0] == VoxelKey{1, 0, 0});
}

TEST_CASE("voxelize of an empty cloud is an empty grid") {
  PointFeatureCloud cloud;
  cloud.features.resize(0, 4);
  const SparseVoxelGrid grid = voxelize(cloud, 0.01);
  CHECK(grid.size() == 0);
}

TEST_CASE("voxelize matches the brute-force grouping oracle") {
  Rng rng(51);
  const PointFeatureCloud cloud = random_cloud(rng, 10000, 3);
  const SparseVoxelGrid grid = voxelize(cloud, 0.01);
  const GroupOracle oracle = group_oracle(cloud, 0.01);

  REQUIRE(grid.size() == oracle.groups.size());
  size_t i = 0;
  for (const auto& [key, group] : oracle.groups) {
    CHECK(grid.keys[i] == key);  // oracle map is also in ascending key order
    CHECK(grid.counts[i] == group.first);
    const Eigen::VectorXd mean = group.second / group.first;
    CHECK((grid.features.row(i).transpose() - mean).cwiseAbs().maxCoeff() < 1e-12);
    ++i;
  }
  CHECK(std::accumulate(grid.counts.begin(), grid.counts.end(), 0) == 10000);
  for (size_t p = 0; p < cloud.positions.size(); ++p) {
    const VoxelKey k = voxel_key_of(cloud.positions[p], 0.01);
    CHECK(grid.keys[grid.point_to_voxel[p]] == k);
  }
}

TEST_CASE("voxelize is permutation invariant") {
  Rng rng(52);
  PointFeatureCloud cloud = random_cloud(rng, 3000, 4);
  const SparseVoxelGrid a = voxelize(cloud, 0.02);

  std::vector<int> perm(cloud.positions.size());
  std::iota(perm.begin(), perm.end(), 0);
  for (size_t i = perm.size(); i > 1; --i) std::swap(perm[i - 1], perm[rng.uniform_int(0, i - 1)]);
  PointFeatureCloud shuffled;
  shuffled.features.resize(cloud.features.rows(), cloud.features.cols());
  for (size_t i = 0; i < perm.size(); ++i) {
    shuffled.positions.push_back(cloud.positions[perm[i]]);
    shuffled.features.row(i) = cloud.features.row(perm[i]);
  }
  const SparseVoxelGrid b = voxelize(shuffled, 0.02);

  REQUIRE(a.size() == b.size());
  for (size_t v = 0; v < a.size(); ++v) {
    CHECK(a.keys[v] == b.keys[v]);
    CHECK(a.counts[v] == b.counts[v]);
    CHECK((a.features.row(v) - b.features.row(v)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("pooled features stay in the member convex hull") {
  Rng rng(53);
  const PointFeatureCloud cloud = random_cloud(rng, 2000, 3);
  const SparseVoxelGrid grid = voxelize(cloud, 0.05);
  Eigen::MatrixXd lo = Eigen::MatrixXd::Constant(grid.size(), 3, 1e300);
  Eigen::MatrixXd hi = Eigen::MatrixXd::Constant(grid.size(), 3, -1e300);
  for (size_t p = 0; p < cloud.positions.size(); ++p) {
    const int v = grid.point_to_voxel[p];
    lo.row(v) = lo.row(v).cwiseMin(cloud.features.row(p));
    hi.row(v) = hi.row(v).cwiseMax(cloud.features.row(p));
  }
  for (size_t v = 0; v < grid.size(); ++v) {
    CHECK((grid.features.row(v) - lo.row(v)).minCoeff() >= -1e-12);
    CHECK((hi.row(v) - grid.features.row(v)).minCoeff() >= -1e-12);
  }
}

TEST_CASE("serialize orders voxels by curve code and round-trips") {
  PointFeatureCloud cloud;
  cloud.positions = {Vec3(0.015, 0.015, 0.015), Vec3(0.001, 0.001, 0.001)};
  cloud.features.resize(2, 1);
  cloud.features << 7.0, 5.0;
  const SparseVoxelGrid grid = voxelize(cloud, 0.01);
  const SerializedGrid seq = serialize(grid, CurveKind::morton);
  REQUIRE(seq.order.size() == 2);
  CHECK(grid.keys[seq.order[0]] == VoxelKey{0, 0, 0});
  CHECK(grid.keys[seq.order[1]] == VoxelKey{1, 1, 1});
  CHECK(seq.features(0, 0) == 5.0);
  CHECK(seq.features(1, 0) == 7.0);
}

TEST_CASE("serialize then unserialize restores feature-by-key assignment") {
  Rng rng(54);
  for (CurveKind kind : {CurveKind::morton, CurveKind::hilbert}) {
    const PointFeatureCloud cloud = random_cloud(rng, 5000, 5, 2.0);
    const SparseVoxelGrid grid = voxelize(cloud, 0.01);
    const SerializedGrid seq = serialize(grid, kind);
    const Eigen::MatrixXd restored = unserialize(seq, seq.features);
    CHECK((restored - grid.features).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("single-voxel grid serializes to a length-1 sequence") {
  PointFeatureCloud cloud;
  cloud.positions = {Vec3(0.0, 0.0, 0.0)};
  cloud.features.resize(1, 2);
  cloud.features << 1.0, 2.0;
  const SerializedGrid seq = serialize(voxelize(cloud, 0.01), CurveKind::hilbert);
  CHECK(seq.order.size() == 1);
}

TEST_CASE("sequence processors") {
  Eigen::MatrixXd seq(3, 2);
  seq << 0, 1, 3, 1, 0, 1;

  SECTION("identity returns input bit-for-bit") {
    const Eigen::MatrixXd out = IdentityProcessor{}.apply(seq);
    CHECK((out - seq).cwiseAbs().maxCoeff() == 0.0);
  }

  SECTION("moving average on a constant sequence is a fixed point") {
    Eigen::MatrixXd flat = Eigen::MatrixXd::Constant(5, 3, 2.5);
    const Eigen::MatrixXd out = MovingAverageProcessor{}.apply(flat);
    CHECK((out - flat).cwiseAbs().maxCoeff() < 1e-15);
  }

  SECTION("moving average with edge clamping") {
    const Eigen::MatrixXd out = MovingAverageProcessor{}.apply(seq);
    for (int i = 0; i < 3; ++i) {
      CHECK(out(i, 0) == Catch::Approx(1.0).margin(1e-15));
      CHECK(out(i, 1) == Catch::Approx(1.0).margin(1e-15));
    }
  }

  SECTION("shape violation detected") {
    struct Bad final : SequenceProcessor {
      Eigen::MatrixXd apply(const Eigen::MatrixXd& s) const override {
        return s.topRows(s.rows() - 1);
      }
      std::string name() const override { return "bad"; }
    };
    SerializedGrid sg;
    sg.features = seq;
    sg.order = {0, 1, 2};
    CHECK_THROWS_WITH(process_serialized(sg, Bad{}), "shape contract violated");
  }
}

TEST_CASE("knn interpolation closed-form cases") {
  PointFeatureCloud cloud;
  cloud.positions = {Vec3(0.005, 0.005, 0.005), Vec3(0.035, 0.005, 0.005)};
  cloud.features.resize(2, 2);
  cloud.features << 1.0, -2.0, 3.0, 6.0;
  const SparseVoxelGrid grid = voxelize(cloud, 0.01);

  SECTION("query at a voxel center returns that voxel's feature") {
    const std::vector<Vec3> q = {grid.center(0)};
    const Eigen::MatrixXd out = knn_interpolate(q, grid, 1);
    CHECK(out(0, 0) == 1.0);
    CHECK(out(0, 1) == -2.0);
  }

  SECTION("equidistant query averages the two voxels") {
    const std::vector<Vec3> q = {Vec3(0.02, 0.005, 0.005)};
    const Eigen::MatrixXd out = knn_interpolate(q, grid, 2);
    CHECK(out(0, 0) == Catch::Approx(2.0).margin(1e-12));
    CHECK(out(0, 1) == Catch::Approx(2.0).margin(1e-12));
  }

  SECTION("empty grid has no support") {
    SparseVoxelGrid empty;
    empty.features.resize(0, 2);
    const std::vector<Vec3> q = {Vec3::Zero()};
    CHECK_THROWS_WITH(knn_interpolate(q, empty, 1), "no support");
  }
}

TEST_CASE("knn interpolation matches the linear-scan oracle") {
  Rng rng(55);
  const PointFeatureCloud cloud = random_cloud(rng, 4000, 4);
  const SparseVoxelGrid grid = voxelize(cloud, 0.01);

  std::vector<Vec3> queries;
  for (int i = 0; i < 1000; ++i) queries.push_back(rng.uniform3(-0.6, 0.6));

  const int k = 3;
  const Eigen::MatrixXd fast = knn_interpolate(queries, grid, k);

  double max_dev = 0.0;
  for (size_t qi = 0; qi < queries.size(); ++qi) {
    std::vector<std::pair<double, int>> all;
    for (size_t v = 0; v < grid.size(); ++v)
      all.emplace_back((grid.center(v) - queries[qi]).norm(), static_cast<int>(v));
    std::sort(all.begin(), all.end());
    Eigen::VectorXd expect = Eigen::VectorXd::Zero(4);
    if (all[0].first < kKnnEpsilon) {
      expect = grid.features.row(all[0].second).transpose();
    } else {
      double wsum = 0.0;
      for (int j = 0; j < k; ++j) {
        const double w = 1.0 / (all[j].first + kKnnEpsilon);
        wsum += w;
        expect += w * grid.features.row(all[j].second).transpose();
      }
      expect /= wsum;
    }
    max_dev = std::max(max_dev, (fast.row(qi).transpose() - expect).cwiseAbs().maxCoeff());
  }
  CHECK(max_dev < 1e-10);
}

TEST_CASE("grid export and import round-trip") {
  Rng rng(56);
  const PointFeatureCloud cloud = random_cloud(rng, 500, 3);
  const SparseVoxelGrid grid = voxelize(cloud, 0.01);

  const std::string path =
      (std::filesystem::temp_directory_path() / "voxrec_grid_test.bin").string();
  export_grid(grid, CurveKind::hilbert, path);
  const SparseVoxelGrid back = import_grid(path);
  std::filesystem::remove(path);

  REQUIRE(back.size() == grid.size());
  CHECK(back.voxel_size == grid.voxel_size);
  for (size_t v = 0; v < grid.size(); ++v) {
    CHECK(back.keys[v] == grid.keys[v]);
    CHECK((back.features.row(v) - grid.features.row(v)).cwiseAbs().maxCoeff() == 0.0);
  }
  CHECK(back.order_kind == CurveKind::hilbert);
}

TEST_CASE("grid too large to serialize") {
  SparseVoxelGrid grid;
  grid.keys = {VoxelKey{0, 0, 0}, VoxelKey{1 << 22, 0, 0}};
  grid.features.resize(2, 1);
  grid.features << 1.0, 2.0;
  grid.counts = {1, 1};
  CHECK_THROWS_WITH(serialize(grid, CurveKind::morton), "grid too large");
}
