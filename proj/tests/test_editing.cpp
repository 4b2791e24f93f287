#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "une/editing.hpp"
#include "une/synthetic.hpp"

using namespace une;

namespace {

Matrix gaussian(Index n, Index d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return detail::gaussian_matrix(n, d, rng);
}

SemanticDirection make_direction(Vector w, double b, std::uint64_t seed, std::string name = "a") {
  SemanticDirection d;
  d.w = std::move(w);
  d.b = b;
  d.attribute_name = std::move(name);
  d.train = std::make_shared<const Matrix>(gaussian(40, d.w.size(), seed));
  d.margin_std = detail::margin_std(d.w, d.b, *d.train);
  return d;
}

struct OracleProbe {
  OracleDataset ds;
  LatentMatrix train, test;
  ProbeResult probe;
};

OracleProbe oracle_probe(std::size_t view) {
  OracleProbe o{make_oracle(oracle_default(), 0.0), {}, {}, {}};
  auto [tr, te] = split(o.ds.views[view], o.ds.manifest);
  o.train = tr;
  o.test = te;
  o.probe = probe_all(tr, te, o.ds.labels.select_rows(o.ds.manifest.train_indices),
                      o.ds.labels.select_rows(o.ds.manifest.test_indices));
  return o;
}

double sigmoid(double s) { return 1.0 / (1.0 + std::exp(-s)); }

}  // namespace

TEST(Direction, IdentityPreprocessingKeepsWeights) {
  LinearProbe p;
  p.attribute_names = {"x"};
  p.weights = Matrix(1, 4);
  p.weights << 0.5, -1.0, 2.0, 0.25;
  p.biases = Vector::Constant(1, 0.3);
  p.pca = PcaModel::identity(4);
  p.scaler = {Vector::Zero(4), Vector::Ones(4)};
  p.fitted = {true};
  const SemanticDirection d = direction_from_probe(p, "x", LatentMatrix(gaussian(20, 4, 1)));
  EXPECT_EQ(d.w, p.weights.row(0).transpose());
  EXPECT_EQ(d.b, 0.3);
  EXPECT_THROW(direction_from_probe(p, "y", LatentMatrix(gaussian(20, 4, 1))), KeyError);
}

TEST(Direction, RawScoreMatchesProbeScore) {
  const OracleProbe o = oracle_probe(1);
  const SemanticDirection d = direction_from_probe(o.probe.probe, "attr3", o.train);
  const Matrix z = gaussian(100, o.train.cols(), 2);
  const Vector probe_scores = o.probe.probe.scores(z).col(3);
  const Vector raw = (z * d.w).array() + d.b;
  EXPECT_LE((probe_scores - raw).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(Direction, PullsBackToPlantedUneDirection) {
  const OracleProbe o = oracle_probe(0);
  for (std::size_t j = 0; j < o.ds.attributes.size(); ++j) {
    const auto& attr = o.ds.attributes[j];
    const SemanticDirection d = direction_from_probe(o.probe.probe, attr.name, o.train);
    const Vector in_une = o.ds.mixings[0].transpose() * d.w;
    EXPECT_GT(cosine_similarity(in_une, attr.direction), 0.99) << attr.name;
  }
}

TEST(Edit, BasicIdentities) {
  const SemanticDirection d = make_direction(Vector::Unit(3, 0), 0.0, 3);
  Vector z(3);
  z << 1.0, 2.0, 3.0;
  EXPECT_EQ(edit(z, d, 0.0), z);
  EXPECT_EQ(edit(z, d, 1.0), Vector(Vector(z) + Vector::Unit(3, 0)));
  EXPECT_THROW(edit(Vector::Zero(4), d, 1.0), ShapeError);
}

TEST(Edit, ScoreIsAffineInAlpha) {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int t = 0; t < 20; ++t) {
    const SemanticDirection d = make_direction(gaussian(12, 1, 10 + t).col(0), u(rng), 50 + t);
    const Vector z = gaussian(12, 1, 100 + t).col(0);
    const double alpha = u(rng);
    const double lhs = d.score(edit(z, d, alpha));
    const double rhs = d.score(z) + alpha * d.w.squaredNorm();
    EXPECT_NEAR(lhs, rhs, 1e-12 * (1.0 + std::abs(rhs)));
  }
}

TEST(Edit, ComposesAdditively) {
  const SemanticDirection d = make_direction(gaussian(8, 1, 5).col(0), 0.1, 6);
  const Vector z = gaussian(8, 1, 7).col(0);
  EXPECT_TRUE(edit(edit(z, d, 0.75), d, -0.25).isApprox(edit(z, d, 0.5), 1e-15));
  EXPECT_EQ(edit(edit(z, d, 0.5), d, 0.25), edit(z, d, 0.75));  // dyadic steps are exact
}

TEST(Intensity, PlaneLandingAndFixedPoint) {
  const SemanticDirection d = make_direction(gaussian(10, 1, 8).col(0), -0.4, 9);
  const Vector z = gaussian(10, 1, 11).col(0);
  const Vector on_plane = edit_to_intensity(z, d, 0.0);
  EXPECT_LE(std::abs(d.score(on_plane)), 1e-8 * d.w.norm() * z.norm());
  const double t_now = intensity(z, d);
  EXPECT_TRUE(edit_to_intensity(z, d, t_now).isApprox(z, 1e-14));
  for (double t : {-2.0, -0.5, 1.0, 3.0}) EXPECT_NEAR(intensity(edit_to_intensity(z, d, t), d), t, 1e-8);
}

TEST(Intensity, OracleMarginsSaturateProbe) {
  const OracleProbe o = oracle_probe(2);
  const SemanticDirection d = direction_from_probe(o.probe.probe, "attr5", o.train);
  const Matrix edited = edit_rows_to_intensities(o.test.data().topRows(50), d, {-2.0, 2.0});
  ASSERT_EQ(edited.rows(), 100);
  const Vector s = o.probe.probe.scores(edited).col(5);
  for (Index r = 0; r < 50; ++r) {
    EXPECT_LT(sigmoid(s(2 * r)), 0.05);
    EXPECT_GT(sigmoid(s(2 * r + 1)), 0.95);
  }
}

TEST(Intensity, ZeroDirectionRejected) {
  SemanticDirection d;
  d.w = Vector::Zero(3);
  d.margin_std = 1.0;
  EXPECT_THROW(edit_to_intensity(Vector::Ones(3), d, 1.0), DegenerateDirection);
}

TEST(Orthogonalize, PerpendicularInputUnchanged) {
  const SemanticDirection a = make_direction(Vector::Unit(4, 0), 0.2, 12, "a");
  const SemanticDirection b = make_direction(Vector::Unit(4, 1), 0.0, 13, "b");
  EXPECT_EQ(orthogonalize(a, b).w, a.w);
  EXPECT_THROW(orthogonalize(a, a), DegenerateDirection);
}

TEST(Orthogonalize, HighDimensionalIdentities) {
  const Index d = 16384;
  SemanticDirection a = make_direction(gaussian(d, 1, 14).col(0), 0.5, 15, "target");
  SemanticDirection b = make_direction(gaussian(d, 1, 16).col(0), -0.3, 17, "spurious");
  b.train = a.train;
  const SemanticDirection o = orthogonalize(a, b);
  const double scale = a.w.norm() * b.w.norm();
  EXPECT_LE(std::abs(b.w.dot(o.w)), 1e-9 * scale);
  const Vector z = gaussian(d, 1, 18).col(0);
  for (double alpha : {-3.0, 0.7, 10.0}) {
    EXPECT_LE(std::abs(b.w.dot(edit(z, o, alpha)) - b.w.dot(z)), 1e-9 * scale * (1.0 + std::abs(alpha)));
  }
  const SemanticDirection twice = orthogonalize(o, b);
  EXPECT_LE((twice.w - o.w).norm(), 1e-12 * o.w.norm());
  // The training-mean score is preserved.
  const Vector mu = a.train->colwise().mean().transpose();
  EXPECT_NEAR(o.score(mu), a.score(mu), 1e-9 * (1.0 + std::abs(a.score(mu))));
  EXPECT_GT(o.margin_std, 0.0);
}

TEST(Orthogonalize, AgainstSeveralDirections) {
  const SemanticDirection a = make_direction(gaussian(20, 1, 19).col(0), 0.0, 20, "a");
  std::vector<SemanticDirection> sp;
  sp.push_back(make_direction(gaussian(20, 1, 21).col(0), 0.0, 22, "s1"));
  sp.push_back(make_direction(gaussian(20, 1, 23).col(0), 0.0, 24, "s2"));
  sp.push_back(make_direction(Vector(sp[0].w + 2.0 * sp[1].w), 0.0, 25, "dependent"));
  const SemanticDirection o = orthogonalize_against(a, sp);
  for (const auto& s : sp) EXPECT_LE(std::abs(s.w.dot(o.w)), 1e-12 * s.w.norm() * a.w.norm());
  // With a single spurious direction both routines agree.
  EXPECT_TRUE(orthogonalize_against(a, {sp[0]}).w.isApprox(orthogonalize(a, sp[0]).w, 1e-13));
  EXPECT_THROW(orthogonalize_against(sp[2], {sp[0], sp[1]}), DegenerateDirection);
}
