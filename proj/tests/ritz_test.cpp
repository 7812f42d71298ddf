#include <gtest/gtest.h>

#include "ldgm/ritz.hpp"
#include "oracles.hpp"

using namespace ldgm;

namespace {

ExactCombination partial(int d, int axis, int order) {
  std::vector<int> o(static_cast<std::size_t>(d + 1), 0);
  if (axis >= 0) o[static_cast<std::size_t>(axis)] = order;
  return {{1.0, o}};
}

// p = u*, q = grad u*.
MockField split_mock(const ProblemSpec& spec, BatchTape& tape) {
  std::vector<ExactCombination> out{partial(spec.dim, -1, 0)};
  for (int a = 0; a < spec.dim; ++a) out.push_back(partial(spec.dim, a, 1));
  return MockField(spec, out, tape);
}

NetworkConfig ritz_net(int d, int outputs) {
  NetworkConfig c;
  c.input_dim = d;
  c.hidden_layers = 2;
  c.width = 6;
  c.output_dim = outputs;
  return c;
}

}  // namespace

TEST(Ritz, ZeroNetworkWithoutSourceIsZero) {
  for (int d : {1, 2}) {
    const auto spec = bilaplacian_ritz(d);
    const auto batch = draw_batch({100, 1, 40, 1}, spec, 0);
    RitzConfig cfg;
    BatchTape t1, t2;
    NetworkField local(zero_parameters(ritz_net(d, d + 1)), t1);
    NetworkField plain(zero_parameters(ritz_net(d, 1)), t2);
    EXPECT_EQ(ldrm_loss(spec, local, batch, cfg).total.scalar(), 0.0);
    EXPECT_EQ(drm_loss(spec, plain, batch, cfg).total.scalar(), 0.0);
  }
}

TEST(Ritz, SplitAgreesWithStandardEnergy) {
  for (int d : {1, 2}) {
    const auto spec = bilaplacian_ritz(d);
    const auto cfg = manufactured_ritz(spec);
    const auto batch = draw_batch({500, 1, 200, 3}, spec, 0);
    BatchTape t1, t2;
    const auto split = split_mock(spec, t1);
    const auto whole = MockField::of_solution(spec, t2);
    const auto a = ldrm_loss(spec, split, batch, cfg), b = drm_loss(spec, whole, batch, cfg);
    EXPECT_NEAR(a.total.scalar(), b.total.scalar(), 1e-10 * std::abs(b.total.scalar()));
    EXPECT_NEAR(a.equation.scalar(), b.equation.scalar(), 1e-10 * std::abs(b.equation.scalar()));
    EXPECT_LT(a.boundary.scalar(), 1e-20);
  }
}

TEST(Ritz, StandardIntegrandPointwise) {
  const auto spec = bilaplacian_ritz(1);
  const auto cfg = manufactured_ritz(spec);
  const auto batch = draw_batch({300, 1, 2, 4}, spec, 0);
  BatchTape tape;
  const auto mock = MockField::of_solution(spec, tape);
  const double je = drm_loss(spec, mock, batch, cfg).equation.scalar();
  const double pi = std::numbers::pi;
  double acc = 0.0;
  for (Eigen::Index c = 0; c < batch.interior.cols(); ++c) {
    const double x = batch.interior(0, c);
    const double u = std::pow(std::sin(pi * x), 2);
    const double lap = 2 * pi * pi * std::cos(2 * pi * x);
    const double f = -8 * std::pow(pi, 4) * std::cos(2 * pi * x);
    acc += 0.5 * lap * lap - f * u;
  }
  EXPECT_NEAR(je, acc / 300.0, 1e-9 * std::abs(je));
}

TEST(Ritz, BoundaryTermLinearInPenalty) {
  const auto spec = bilaplacian_ritz(1);
  const auto batch = draw_batch({50, 1, 20, 5}, spec, 0);
  const auto params = init_xavier(ritz_net(1, 2), 3);
  double prev = -1e300;
  double base = 0.0;
  for (double lambda : {1.0, 10.0, 100.0, 1000.0}) {
    RitzConfig cfg;
    cfg.penalty = lambda;
    BatchTape tape;
    NetworkField f(params, tape);
    const auto l = ldrm_loss(spec, f, batch, cfg);
    EXPECT_GT(l.total.scalar(), prev);
    prev = l.total.scalar();
    if (lambda == 1.0) base = l.boundary.scalar();
    EXPECT_NEAR(l.boundary.scalar(), lambda * base, 1e-9 * lambda * base);
  }
}

TEST(Ritz, Validation) {
  const auto spec = bilaplacian_ritz(2);
  const auto batch = draw_batch({10, 1, 10, 5}, spec, 0);
  BatchTape tape;
  NetworkField wrong(init_xavier(ritz_net(2, 2), 1), tape);
  EXPECT_THROW(ldrm_loss(spec, wrong, batch, {}), ShapeError);
  EXPECT_THROW(drm_loss(spec, wrong, batch, {}), ShapeError);
  RitzConfig bad;
  bad.penalty = 0.0;
  NetworkField ok(init_xavier(ritz_net(2, 3), 1), tape);
  EXPECT_THROW(ldrm_loss(spec, ok, batch, bad), ConfigError);
  EXPECT_THROW(ldrm_loss(beam(), ok, draw_batch({}, beam(), 0), {}), ShapeError);
}

TEST(Ritz, GradientsMatchFiniteDifferences) {
  for (int d : {1, 2}) {
    const auto spec = bilaplacian_ritz(d);
    const auto cfg = manufactured_ritz(spec);
    const auto batch = draw_batch({30, 1, 10, 6}, spec, 0);
    for (bool local : {true, false}) {
      const ParameterSet p = init_xavier(ritz_net(d, local ? d + 1 : 1), 9);
      auto loss_of = [&](const NetworkField& f) {
        return local ? ldrm_loss(spec, f, batch, cfg) : drm_loss(spec, f, batch, cfg);
      };
      BatchTape tape;
      NetworkField field(p, tape);
      const Eigen::VectorXd g = field.network().gradient(loss_of(field).total);
      auto f = [&](const Eigen::VectorXd& theta) {
        ParameterSet q = p;
        q.assign(theta);
        BatchTape t;
        NetworkField nf(q, t);
        return loss_of(nf).total.scalar();
      };
      EXPECT_LT(oracle::rel_error(g, oracle::gradient_fd(f, p.flatten(), 1e-6)), 1e-5)
          << "d=" << d << (local ? " local" : " standard");
    }
  }
}
